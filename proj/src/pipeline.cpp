#include "layerspectra/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "layerspectra/invariants.hpp"
#include "layerspectra/report.hpp"

namespace layerspectra {

namespace fs = std::filesystem;

namespace {

const char* kCommands[] = {"validate", "invariants", "certify", "solve", "sweep", "report"};

// ---- config parsing --------------------------------------------------------

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(where + ": unknown key '" + key + "'");
    }
  }
}

double get_double(const Json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + ": not finite");
  return x;
}

double get_positive(const Json& j, const char* key, const std::string& where) {
  const double x = get_double(j, key, where);
  if (x <= 0) throw ConfigError(where + "." + key + ": must be positive");
  return x;
}

// 0 selects the documented default.
double get_nonnegative(const Json& j, const char* key, const std::string& where) {
  const double x = get_double(j, key, where);
  if (x < 0) throw ConfigError(where + "." + key + ": must be >= 0 (0 selects the default)");
  return x;
}

long long get_int(const Json& j, const char* key, const std::string& where, long long lo) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  const auto x = v.get<long long>();
  if (x < lo) throw ConfigError(where + "." + key + ": must be >= " + std::to_string(lo));
  return x;
}

std::vector<double> get_positive_list(const Json& j, const char* key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected an array");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number() || !std::isfinite(x.get<double>()) || x.get<double>() <= 0) {
      throw ConfigError(where + "." + key + ": entries must be positive numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

ProfileSpec parse_profile(const Json& j) {
  if (!j.is_object()) throw ConfigError("profile: expected an object");
  check_keys(j, {"family", "beta", "width", "theta", "table"}, "profile");
  if (!j.contains("family") || !j.at("family").is_string()) throw ConfigError("profile.family: required string");
  ProfileSpec p;
  p.family = j.at("family").get<std::string>();
  if (p.family == "flat") {
    // nothing else
  } else if (p.family == "gaussian_bump") {
    if (!j.contains("beta") || !j.contains("width")) throw ConfigError("gaussian_bump needs beta and width");
    p.beta = get_double(j, "beta", "profile");
    p.width = get_positive(j, "width", "profile");
  } else if (p.family == "turning") {
    if (!j.contains("theta") || !j.contains("width")) throw ConfigError("turning needs theta and width");
    p.theta = get_double(j, "theta", "profile");
    p.width = get_positive(j, "width", "profile");
  } else if (p.family == "table") {
    if (!j.contains("table") || !j.at("table").is_string()) throw ConfigError("profile.table: required path");
    p.table = j.at("table").get<std::string>();
  } else {
    throw ConfigError("profile.family: unknown family '" + p.family + "'");
  }
  return p;
}

NumericsConfig parse_numerics(const Json& j) {
  if (!j.is_object()) throw ConfigError("numerics: expected an object");
  check_keys(j,
             {"h", "s_max", "sigma_sweep", "mesh_levels", "mesh_u_cells", "mesh_h_s", "truncation_fractions",
              "eig_tol", "eig_count", "angular_modes", "flatness_tolerance", "force_perturbation",
              "margin_factor"},
             "numerics");
  const std::string w = "numerics";
  NumericsConfig n;
  if (j.contains("h")) n.h = get_nonnegative(j, "h", w);
  if (j.contains("s_max")) n.s_max = get_nonnegative(j, "s_max", w);
  if (j.contains("sigma_sweep")) {
    n.sigma_sweep = get_positive_list(j, "sigma_sweep", w);
    if (n.sigma_sweep.empty()) throw ConfigError("numerics.sigma_sweep: empty");
  }
  if (j.contains("mesh_levels")) n.mesh_levels = static_cast<int>(get_int(j, "mesh_levels", w, 3));
  if (j.contains("mesh_u_cells")) n.mesh_u_cells = static_cast<std::size_t>(get_int(j, "mesh_u_cells", w, 7));
  if (j.contains("mesh_h_s")) n.mesh_h_s = get_nonnegative(j, "mesh_h_s", w);
  if (j.contains("truncation_fractions")) {
    n.truncation_fractions = get_positive_list(j, "truncation_fractions", w);
    if (n.truncation_fractions.empty()) throw ConfigError("numerics.truncation_fractions: empty");
    for (double f : n.truncation_fractions) {
      if (f > 1) throw ConfigError("numerics.truncation_fractions: entries must be <= 1");
    }
  }
  if (j.contains("eig_tol")) n.eig_tol = get_positive(j, "eig_tol", w);
  if (j.contains("eig_count")) n.eig_count = static_cast<int>(get_int(j, "eig_count", w, 1));
  if (j.contains("angular_modes")) {
    const auto& v = j.at("angular_modes");
    if (!v.is_array() || v.empty()) throw ConfigError("numerics.angular_modes: expected a non-empty array");
    n.angular_modes.clear();
    for (const auto& x : v) {
      if (!x.is_number_integer() || x.get<long long>() < 0) {
        throw ConfigError("numerics.angular_modes: entries must be integers >= 0");
      }
      n.angular_modes.push_back(static_cast<int>(x.get<long long>()));
    }
  }
  if (j.contains("flatness_tolerance")) n.flatness_tolerance = get_positive(j, "flatness_tolerance", w);
  if (j.contains("force_perturbation")) {
    if (!j.at("force_perturbation").is_boolean()) throw ConfigError("numerics.force_perturbation: expected bool");
    n.force_perturbation = j.at("force_perturbation").get<bool>();
  }
  if (j.contains("margin_factor")) n.margin_factor = get_positive(j, "margin_factor", w);
  return n;
}

SweepSpec parse_sweep(const Json& j) {
  if (!j.is_object()) throw ConfigError("sweep: expected an object");
  check_keys(j, {"beta", "width", "half_width", "half_width_fraction"}, "sweep");
  SweepSpec s;
  if (j.contains("beta")) {
    const auto& v = j.at("beta");
    if (!v.is_array()) throw ConfigError("sweep.beta: expected an array");
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError("sweep.beta: entries must be numbers");
      s.beta.push_back(x.get<double>());
    }
  }
  if (j.contains("width")) s.width = get_positive_list(j, "width", "sweep");
  if (j.contains("half_width")) s.half_width = get_positive_list(j, "half_width", "sweep");
  if (j.contains("half_width_fraction")) {
    s.half_width_fraction = get_positive_list(j, "half_width_fraction", "sweep");
    for (double f : s.half_width_fraction) {
      if (f >= 1) throw ConfigError("sweep.half_width_fraction: entries must be < 1");
    }
  }
  if (!s.half_width.empty() && !s.half_width_fraction.empty()) {
    throw ConfigError("sweep: give half_width or half_width_fraction, not both");
  }
  return s;
}

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

bool is_command(const std::string& name) {
  return std::any_of(std::begin(kCommands), std::end(kCommands), [&](const char* c) { return name == c; });
}

RunConfig parse_config(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  check_keys(j,
             {"schema_version", "command", "profile", "half_width", "half_width_fraction", "numerics", "output_dir",
              "seed", "sweep"},
             "config");
  RunConfig c;
  c.base_dir = base_dir;
  if (!j.contains("schema_version")) throw ConfigError("config: schema_version required");
  c.schema_version = static_cast<int>(get_int(j, "schema_version", "config", 0));
  if (c.schema_version != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(c.schema_version));
  }
  if (j.contains("command")) {
    if (!j.at("command").is_string() || !is_command(j.at("command").get<std::string>())) {
      throw ConfigError("config.command: unknown command");
    }
    c.command = j.at("command").get<std::string>();
  }
  if (!j.contains("profile")) throw ConfigError("config: profile required");
  c.profile = parse_profile(j.at("profile"));
  if (j.contains("half_width")) c.half_width = get_positive(j, "half_width", "config");
  if (j.contains("half_width_fraction")) {
    c.half_width_fraction = get_positive(j, "half_width_fraction", "config");
    if (*c.half_width_fraction >= 1) throw ConfigError("config.half_width_fraction: must be < 1");
  }
  if (c.half_width && c.half_width_fraction) {
    throw ConfigError("config: give half_width or half_width_fraction, not both");
  }
  if (j.contains("numerics")) c.numerics = parse_numerics(j.at("numerics"));
  if (j.contains("output_dir")) {
    if (!j.at("output_dir").is_string()) throw ConfigError("config.output_dir: expected a string");
    c.output_dir = j.at("output_dir").get<std::string>();
  }
  if (j.contains("seed")) c.seed = static_cast<std::uint64_t>(get_int(j, "seed", "config", 0));
  if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));

  const bool sweep_sets_a = c.sweep && (!c.sweep->half_width.empty() || !c.sweep->half_width_fraction.empty());
  if (!c.half_width && !c.half_width_fraction && !sweep_sets_a) {
    throw ConfigError("config: half_width or half_width_fraction required");
  }
  if (c.half_width_fraction && c.profile.family == "flat") {
    throw ConfigError("config: half_width_fraction is undefined for the flat profile (rho_m = inf)");
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Json to_json(const RunConfig& c) {
  Json profile = {{"family", c.profile.family}};
  if (c.profile.family == "gaussian_bump") {
    profile["beta"] = c.profile.beta;
    profile["width"] = c.profile.width;
  } else if (c.profile.family == "turning") {
    profile["theta"] = c.profile.theta;
    profile["width"] = c.profile.width;
  } else if (c.profile.family == "table") {
    profile["table"] = c.profile.table;
  }
  const auto& n = c.numerics;
  Json modes = Json::array();
  for (int l : n.angular_modes) modes.push_back(l);
  Json numerics = {{"h", n.h},
                   {"s_max", n.s_max},
                   {"sigma_sweep", numbers(n.sigma_sweep)},
                   {"mesh_levels", n.mesh_levels},
                   {"mesh_u_cells", n.mesh_u_cells},
                   {"mesh_h_s", n.mesh_h_s},
                   {"truncation_fractions", numbers(n.truncation_fractions)},
                   {"eig_tol", n.eig_tol},
                   {"eig_count", n.eig_count},
                   {"angular_modes", modes},
                   {"flatness_tolerance", n.flatness_tolerance},
                   {"force_perturbation", n.force_perturbation},
                   {"margin_factor", n.margin_factor}};
  Json j = {{"schema_version", c.schema_version},
            {"command", c.command},
            {"profile", profile},
            {"numerics", numerics},
            {"seed", c.seed}};
  if (c.half_width) j["half_width"] = *c.half_width;
  if (c.half_width_fraction) j["half_width_fraction"] = *c.half_width_fraction;
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  if (c.sweep) {
    Json s = Json::object();
    if (!c.sweep->beta.empty()) s["beta"] = numbers(c.sweep->beta);
    if (!c.sweep->width.empty()) s["width"] = numbers(c.sweep->width);
    if (!c.sweep->half_width.empty()) s["half_width"] = numbers(c.sweep->half_width);
    if (!c.sweep->half_width_fraction.empty()) s["half_width_fraction"] = numbers(c.sweep->half_width_fraction);
    j["sweep"] = s;
  }
  return j;
}

CurvatureProfile make_profile(const RunConfig& config) {
  const auto& p = config.profile;
  if (p.family == "flat") return CurvatureProfile::flat();
  if (p.family == "gaussian_bump") return CurvatureProfile::gaussian_bump(p.beta, p.width);
  if (p.family == "turning") return CurvatureProfile::turning(p.theta, p.width);
  if (p.family == "table") {
    const fs::path path = fs::path(p.table).is_absolute() ? fs::path(p.table) : config.base_dir / p.table;
    if (!fs::exists(path)) throw ConfigError("profile table not found: " + path.string());
    return CurvatureProfile::from_csv(path.string());
  }
  throw ConfigError("unknown profile family " + p.family);
}

ResolvedRun resolve(const RunConfig& config) {
  ResolvedRun out{make_profile(config), 0.0, 0.0, 0.0, 0.0};
  const double length = out.profile.length_scale();
  if (config.half_width) {
    out.a = *config.half_width;
  } else if (config.half_width_fraction) {
    // rho_m from a preliminary curve at the profile's own scale.
    const auto curve = build_meridian(out.profile, 50.0 * length, length / 100.0);
    const double rho = rho_m(principal_curvatures(curve));
    if (!std::isfinite(rho)) throw ConfigError("half_width_fraction needs a curved profile (rho_m = inf)");
    out.a = *config.half_width_fraction * rho;
  } else {
    throw ConfigError("no half-width given");
  }
  out.h = config.numerics.h > 0 ? config.numerics.h : std::min(length / 100.0, out.a / 20.0);
  out.s_max = config.numerics.s_max > 0 ? config.numerics.s_max : std::max(50.0 * length, 100.0 * out.a);
  if (out.s_max <= 10 * out.h) throw ConfigError("s_max must exceed 10 h");
  return out;
}

std::string input_hash(const RunConfig& config) {
  Json j = to_json(config);
  j.erase("command");
  j.erase("output_dir");
  if (config.profile.family == "table") {
    const fs::path path = fs::path(config.profile.table).is_absolute() ? fs::path(config.profile.table)
                                                                       : config.base_dir / config.profile.table;
    try {
      j["table_sha256"] = sha256_hex(read_file(path));
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return sha256_hex(j.dump());
}

std::string version_string() { return "layerspectra 0.1.0"; }

fs::path output_root(const RunConfig& config, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("LAYERSPECTRA_OUT"); env && *env) return env;
  if (!config.output_dir.empty()) return config.output_dir;
  return "runs";
}

namespace {

std::string csv_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string short_double(double x) {
  if (!std::isfinite(x)) return csv_double(x);
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const Json::exception*>(&e)) return 2;
  if (dynamic_cast<const AdmissibilityError*>(&e)) return 3;
  if (dynamic_cast<const ConvergenceError*>(&e) || dynamic_cast<const ConsistencyError*>(&e) ||
      dynamic_cast<const GeometryError*>(&e) || dynamic_cast<const IntegrationBlowup*>(&e) ||
      dynamic_cast<const NoBumpError*>(&e)) {
    return 4;
  }
  if (dynamic_cast<const DomainError*>(&e)) return 2;
  return 1;
}

std::optional<Json> load_record(const fs::path& dir) {
  const fs::path path = dir / "run.json";
  if (!fs::exists(path)) return std::nullopt;
  try {
    Json j = Json::parse(read_file(path));
    if (!j.is_object() || !j.contains("input_hash") || !j.contains("results")) return std::nullopt;
    return j;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string verdict_line(const Json& results) {
  std::ostringstream out;
  if (results.contains("admissibility")) {
    const auto& a = results.at("admissibility");
    out << "admissible: " << (a.at("admissible").get<bool>() ? "yes" : "no") << " (A1 "
        << a.at("A1").get<std::string>() << ", A2 " << a.at("A2").get<std::string>() << ", A3 "
        << a.at("A3").get<std::string>() << ")";
  }
  if (results.contains("invariants")) {
    const auto& k = results.at("invariants").at("K_total");
    out << "; K_total = " << short_double(number_from(k.at("value"))) << "; "
        << results.at("invariants").at("parabolicity").at("verdict").get<std::string>();
  }
  if (results.contains("certificate")) {
    out << "; certificate: " << results.at("certificate").at("verdict").get<std::string>();
  }
  if (results.contains("spectrum")) {
    const auto& s = results.at("spectrum");
    if (!s.at("modes").empty()) {
      const auto& m0 = s.at("modes")[0];
      if (!m0.at("extrapolated").empty()) {
        out << "; lambda_1 = " << short_double(number_from(m0.at("extrapolated")[0])) << " +- "
            << short_double(number_from(m0.at("uncertainty")[0])) << " vs threshold "
            << short_double(number_from(m0.at("threshold")));
      }
    }
    const auto& b = s.at("bound_states");
    out << "; bound states: " << b.at("count").get<int>()
        << (b.at("conclusive").get<bool>() ? " (conclusive)" : " (inconclusive)");
  }
  return out.str();
}

Json meridian_samples(const MeridianCurve& curve, std::size_t max_samples = 400) {
  // Samples on the profile's own scale; the far field is a straight line.
  const double window = std::min(curve.s_max(), 10.0 * curve.profile().length_scale() + 5.0);
  Json out = Json::array();
  const std::size_t n = curve.size();
  std::size_t last = 0;
  while (last + 1 < n && curve.s()[last + 1] <= window) ++last;
  const std::size_t stride = std::max<std::size_t>(1, (last + max_samples) / max_samples);
  for (std::size_t i = 0; i <= last; i += stride) {
    out.push_back(Json::array({number(curve.s()[i]), number(curve.r()[i]), number(curve.z()[i]),
                               number(curve.r_prime(i)), number(curve.z_prime(i))}));
  }
  return out;
}

std::string eigs_csv(const std::vector<ConvergenceStudy>& studies) {
  std::ostringstream out;
  out << "l,kind,mesh_id,s_max,h_s,h_u,dofs,index,lambda,residual,uncertainty\n";
  for (const auto& st : studies) {
    auto rows = [&](const std::vector<MeshLevel>& levels, const char* kind) {
      for (const auto& lv : levels) {
        for (std::size_t i = 0; i < lv.values.size(); ++i) {
          out << st.l << ',' << kind << ',' << lv.mesh_id << ',' << csv_double(lv.s_max) << ','
              << csv_double(lv.h_s) << ',' << csv_double(lv.h_u) << ',' << lv.dofs << ',' << i + 1 << ','
              << csv_double(lv.values[i]) << ','
              << (i < lv.residuals.size() ? csv_double(lv.residuals[i]) : "") << ",\n";
        }
      }
    };
    rows(st.ladder, "ladder");
    rows(st.truncation, "truncation");
    for (std::size_t i = 0; i < st.extrapolated.size(); ++i) {
      out << st.l << ",extrapolated,,,,,," << i + 1 << ',' << csv_double(st.extrapolated[i]) << ",,"
          << (i < st.uncertainty.size() ? csv_double(st.uncertainty[i]) : "") << '\n';
    }
  }
  return out.str();
}

enum Stage { kValidate = 1, kInvariants = 2, kCertify = 4, kSolve = 8 };

int stages_for(const std::string& command) {
  if (command == "validate") return kValidate;
  if (command == "invariants") return kValidate | kInvariants;
  if (command == "certify") return kValidate | kInvariants | kCertify;
  if (command == "solve") return kValidate | kSolve;
  return kValidate | kInvariants | kCertify | kSolve;  // sweep point
}

void save_timing(const fs::path& dir, const std::string& label, double seconds) {
  Json timing = Json::object();
  if (fs::exists(dir / "timing.json")) {
    try {
      timing = Json::parse(read_file(dir / "timing.json"));
    } catch (const std::exception&) {
      timing = Json::object();
    }
  }
  timing[label] = seconds;
  write_atomic(dir / "timing.json", dump(timing));
}

// Runs the stage set for one point and writes its records. Results from
// earlier commands in the same directory are kept.
RunOutcome execute(const RunConfig& config, const fs::path& root, int stages, const std::string& label) {
  const auto start = std::chrono::steady_clock::now();
  RunOutcome outcome;
  const std::string hash = input_hash(config);
  outcome.run_dir = root / hash;
  const fs::path dir = outcome.run_dir;
  fs::create_directories(dir);

  const ResolvedRun rr = resolve(config);
  const MeridianCurve curve = build_meridian(rr.profile, rr.s_max, rr.h);
  const LayerSpec layer = make_layer(curve, rr.a);

  Json record;
  if (auto previous = load_record(dir); previous && previous->at("input_hash") == hash) {
    record = *previous;
  } else {
    Json snapshot = to_json(config);
    snapshot.erase("command");
    snapshot.erase("output_dir");
    record = {{"schema_version", kSchemaVersion},
              {"input_hash", hash},
              {"config", snapshot},
              {"commands", Json::array()},
              {"results", Json::object()}};
  }
  Json cfg = to_json(config);
  write_atomic(dir / "config.json", dump(cfg));

  Json& results = record["results"];
  record["version"] = version_string();
  record["profile"] = rr.profile.describe();
  record["family"] = config.profile.family;
  record["a"] = number(rr.a);
  record["h"] = number(rr.h);
  record["s_max"] = number(rr.s_max);
  record["threshold"] = number(layer.threshold());

  auto finish = [&](int code, const std::string& message) {
    std::set<std::string> commands;
    for (const auto& c : record["commands"]) commands.insert(c.get<std::string>());
    commands.insert(label);
    record["commands"] = Json::array();
    for (const auto& c : commands) record["commands"].push_back(c);
    record["verdict"] = verdict_line(results);
    write_atomic(dir / "run.json", dump(record));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_timing(dir, label, seconds);
    outcome.exit_code = code;
    outcome.message = message;
    outcome.record = record;
    return outcome;
  };

  // validate
  ValidateOptions vopts;
  vopts.flatness.tolerance = config.numerics.flatness_tolerance;
  const AdmissibilityReport adm = validate(layer, vopts);
  Json adm_json = to_json(adm);
  adm_json["meridian"] = meridian_samples(curve);
  results["admissibility"] = adm_json;
  record["rho_m"] = number(adm.rho_m);
  {
    std::ostringstream csv;
    write_meridian_csv(csv, curve, layer.pair);
    write_atomic(dir / "meridian.csv", csv.str());
  }

  if (stages & kInvariants) {
    Json inv = {{"K_total", to_json(K_total(layer))},
                {"eta", to_json(eta_table(rr.a, 8))},
                {"lemma2_diagnostics", to_json(lemma2_diagnostics(curve, layer.pair))},
                {"parabolicity", to_json(parabolicity(curve, layer.pair))},
                {"volume_growth", to_json(volume_growth(curve, layer.pair))}};
    results["invariants"] = inv;
    write_atomic(dir / "invariants.json", dump(inv));
  }

  if ((stages & (kCertify | kSolve)) && !adm.admissible()) {
    return finish(3, "layer is not admissible: " + verdict_line(results));
  }

  if (stages & kCertify) {
    CertifyOptions copts;
    copts.sigmas = config.numerics.sigma_sweep;
    copts.force_perturbation = config.numerics.force_perturbation;
    const Json cert = to_json(certify(layer, copts));
    results["certificate"] = cert;
    write_atomic(dir / "certificate.json", dump(cert));
  }

  if (stages & kSolve) {
    std::vector<ConvergenceStudy> studies;
    Json modes = Json::array();
    std::vector<double> lowest;
    double unc = 0.0;
    bool conclusive = true;
    for (int l : config.numerics.angular_modes) {
      ConvergenceOptions o;
      o.levels = config.numerics.mesh_levels;
      o.base_u_cells = config.numerics.mesh_u_cells;
      o.base_h_s = config.numerics.mesh_h_s;
      for (double f : config.numerics.truncation_fractions) o.truncations.push_back(f * rr.s_max);
      std::sort(o.truncations.begin(), o.truncations.end());
      o.l = l;
      o.count = config.numerics.eig_count;
      o.eig.tol = config.numerics.eig_tol;
      o.eig.seed = config.seed;
      studies.push_back(convergence_study(layer, o));
      modes.push_back(to_json(studies.back()));
      for (double v : studies.back().extrapolated) lowest.push_back(v);
      for (double u : studies.back().uncertainty) unc = std::max(unc, u);
      conclusive = conclusive && studies.back().conclusive;
    }
    std::sort(lowest.begin(), lowest.end());
    BoundStateCount count = bound_state_count(lowest, unc, rr.a, config.numerics.margin_factor * unc);
    if (!conclusive) {
      count.conclusive = false;
      count.note += count.note.empty() ? "convergence study inconclusive" : "; convergence study inconclusive";
    }
    results["spectrum"] = {{"modes", modes}, {"bound_states", to_json(count)}};
    write_atomic(dir / "eigs.csv", eigs_csv(studies));
  }

  return finish(0, verdict_line(results));
}

RunOutcome guarded(const std::function<RunOutcome()>& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    RunOutcome out;
    out.exit_code = exit_code_for(e);
    out.message = e.what();
    return out;
  }
}

bool point_done(const fs::path& dir, const std::string& hash) {
  const auto rec = load_record(dir);
  if (!rec || rec->at("input_hash") != hash) return false;
  const auto& res = rec->at("results");
  if (!res.contains("admissibility")) return false;
  if (!res.at("admissibility").at("admissible").get<bool>()) return true;
  return res.contains("certificate") && res.contains("spectrum");
}

struct SweepPoint {
  RunConfig config;
  double beta = 0.0;
  double width = 0.0;
  std::string a_spec;
};

std::vector<SweepPoint> sweep_points(const RunConfig& config) {
  const SweepSpec& s = *config.sweep;
  std::vector<double> betas = s.beta, widths = s.width;
  if (betas.empty()) betas.push_back(config.profile.beta);
  if (widths.empty()) widths.push_back(config.profile.width);
  if ((!s.beta.empty() || !s.width.empty()) && config.profile.family != "gaussian_bump") {
    throw ConfigError("sweep: beta/width grids need the gaussian_bump family");
  }
  std::vector<std::pair<std::optional<double>, std::optional<double>>> halves;
  for (double a : s.half_width) halves.emplace_back(a, std::nullopt);
  for (double f : s.half_width_fraction) halves.emplace_back(std::nullopt, f);
  if (halves.empty()) halves.emplace_back(config.half_width, config.half_width_fraction);

  std::vector<SweepPoint> out;
  for (double beta : betas) {
    for (double width : widths) {
      for (const auto& [a, f] : halves) {
        SweepPoint p;
        p.config = config;
        p.config.sweep.reset();
        p.config.command = "certify";
        p.config.output_dir.clear();
        if (config.profile.family == "gaussian_bump") {
          p.config.profile.beta = beta;
          p.config.profile.width = width;
        }
        p.config.half_width = a;
        p.config.half_width_fraction = f;
        if (f && p.config.profile.family == "flat") throw ConfigError("sweep: fractions need a curved profile");
        p.beta = beta;
        p.width = width;
        p.a_spec = a ? "a=" + short_double(*a) : "fraction=" + short_double(*f);
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

RunOutcome run_sweep(const RunConfig& config, const fs::path& root, int workers) {
  if (!config.sweep) throw ConfigError("sweep: config has no sweep section");
  const std::string sweep_hash = input_hash(config);
  const fs::path sweep_dir = root / sweep_hash;
  fs::create_directories(sweep_dir);
  write_atomic(sweep_dir / "config.json", dump(to_json(config)));

  const auto points = sweep_points(config);
  std::vector<RunOutcome> outcomes(points.size());
  std::vector<bool> resumed(points.size(), false);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      outcomes[i] = guarded([&] {
        const std::string hash = input_hash(points[i].config);
        if (point_done(root / hash, hash)) {
          resumed[i] = true;
          RunOutcome o;
          o.run_dir = root / hash;
          o.record = *load_record(o.run_dir);
          return o;
        }
        return execute(points[i].config, root, stages_for("sweep"), "sweep");
      });
    }
  };
  const int n_threads = std::max(1, std::min<int>(workers, static_cast<int>(points.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ostringstream csv;
  csv << "index,beta,width,a,rho_m,admissible,K_total,K_error,certificate,case,best_q3,lambda1,"
         "lambda1_uncertainty,threshold,bound_states,count_conclusive,consistent,status,run_id\n";
  Json listing = Json::array();
  int contradictions = 0, certified = 0, failures = 0, worst_code = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& o = outcomes[i];
    const auto& r = o.record;
    std::string status = o.exit_code == 0 ? (resumed[i] ? "resumed" : "ok") : "error: " + o.message;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    std::string run_id = r.is_object() && r.contains("input_hash") ? r.at("input_hash").get<std::string>() : "";
    Json row = {{"index", i}, {"beta", points[i].beta}, {"width", points[i].width}, {"a_spec", points[i].a_spec},
                {"run_id", run_id}, {"status", status}};

    double a = NAN, rho = NAN, K = NAN, Kerr = NAN, best = NAN, lam = NAN, unc = NAN, thr = NAN;
    std::string admissible = "", cert = "", cert_case = "", count = "", count_ok = "", consistent = "";
    if (r.is_object() && r.contains("results")) {
      const auto& res = r.at("results");
      a = number_from(r.at("a"));
      thr = number_from(r.at("threshold"));
      if (r.contains("rho_m")) rho = number_from(r.at("rho_m"));
      if (res.contains("admissibility")) admissible = res.at("admissibility").at("admissible").get<bool>() ? "yes" : "no";
      if (res.contains("certificate")) {
        const auto& c = res.at("certificate");
        cert = c.at("verdict").get<std::string>();
        cert_case = c.at("case").get<std::string>();
        K = number_from(c.at("K_total"));
        Kerr = number_from(c.at("K_error"));
        best = number_from(c.at("best_q3"));
      }
      if (res.contains("spectrum")) {
        const auto& s = res.at("spectrum");
        const auto& m0 = s.at("modes")[0];
        if (!m0.at("extrapolated").empty()) {
          lam = number_from(m0.at("extrapolated")[0]);
          unc = number_from(m0.at("uncertainty")[0]);
        }
        count = std::to_string(s.at("bound_states").at("count").get<int>());
        count_ok = s.at("bound_states").at("conclusive").get<bool>() ? "yes" : "no";
        const double margin = number_from(s.at("bound_states").at("margin"));
        if (cert == "Certified") {
          ++certified;
          const bool ok = lam <= thr - margin && margin >= unc;
          consistent = ok ? "yes" : "no";
          if (!ok) ++contradictions;
        } else {
          consistent = "n/a";
        }
      }
    }
    if (o.exit_code != 0 && o.exit_code != 3) {
      ++failures;
      worst_code = std::max(worst_code, o.exit_code);
    }
    csv << i << ',' << csv_double(points[i].beta) << ',' << csv_double(points[i].width) << ',' << csv_double(a)
        << ',' << csv_double(rho) << ',' << admissible << ',' << csv_double(K) << ',' << csv_double(Kerr) << ','
        << cert << ',' << cert_case << ',' << csv_double(best) << ',' << csv_double(lam) << ','
        << csv_double(unc) << ',' << csv_double(thr) << ',' << count << ',' << count_ok << ',' << consistent
        << ',' << status << ',' << run_id << '\n';
    row["consistent"] = consistent;
    listing.push_back(row);
  }
  write_atomic(sweep_dir / "summary.csv", csv.str());

  RunOutcome out;
  out.run_dir = sweep_dir;
  out.record = {{"schema_version", kSchemaVersion},
                {"input_hash", sweep_hash},
                {"config", to_json(config)},
                {"points", listing},
                {"certified", certified},
                {"contradictions", contradictions},
                {"failures", failures},
                {"version", version_string()}};
  out.record["config"].erase("command");
  out.record["config"].erase("output_dir");
  std::ostringstream msg;
  msg << points.size() << " points, " << certified << " certified, " << contradictions
      << " contradictions, " << failures << " failures";
  out.record["verdict"] = msg.str();
  write_atomic(sweep_dir / "sweep.json", dump(out.record));
  out.message = msg.str();
  out.exit_code = failures > 0 ? worst_code : 0;
  return out;
}

RunOutcome run_report(const RunConfig& config, const fs::path& root) {
  const std::string hash = input_hash(config);
  const fs::path dir = root / hash;
  std::vector<Json> records;
  if (config.sweep) {
    if (!fs::exists(dir / "sweep.json")) throw Error("report: no sweep record in " + dir.string());
    const Json sweep = Json::parse(read_file(dir / "sweep.json"));
    for (const auto& p : sweep.at("points")) {
      const std::string id = p.at("run_id").get<std::string>();
      if (id.empty()) continue;
      if (auto rec = load_record(root / id)) records.push_back(*rec);
    }
  } else if (auto rec = load_record(dir)) {
    records.push_back(*rec);
  }
  if (records.empty()) throw Error("report: no stored records under " + dir.string());
  write_report(render_report(records), dir);
  RunOutcome out;
  out.run_dir = dir;
  out.message = "report written to " + (dir / "report.md").string();
  return out;
}

}  // namespace

RunOutcome run(const RunConfig& config, const fs::path& root, int workers) {
  return guarded([&] {
    if (config.command == "sweep") return run_sweep(config, root, workers);
    if (config.command == "report") return run_report(config, root);
    if (config.sweep) throw ConfigError(config.command + ": config has a sweep section; use the sweep command");
    return execute(config, root, stages_for(config.command), config.command);
  });
}

}  // namespace layerspectra
