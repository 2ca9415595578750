#include "layerspectra/records.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

namespace layerspectra {

Json number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double number_from(const Json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError("expected a number, got " + j.dump());
}

namespace {

Json term(const TermValue& t) { return {{"value", number(t.value)}, {"error", number(t.error)}}; }

Json numbers(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(number(x));
  return out;
}

}  // namespace

Json to_json(const MetricBounds& b) {
  return {{"c_minus", number(b.c_minus)}, {"c_plus", number(b.c_plus)}};
}

Json to_json(const SelfIntersectionReport& r) {
  Json j = {{"verdict", to_string(r.verdict)},
            {"resolution", number(r.resolution)},
            {"axis_clearance", number(r.axis_clearance)},
            {"segments", r.segments},
            {"note", r.note}};
  if (r.witness) j["witness"] = Json::array({number(r.witness->x), number(r.witness->y)});
  return j;
}

Json to_json(const FlatnessReport& r) {
  return {{"verdict", to_string(r.verdict)}, {"tail_value", number(r.tail_value)},
          {"decay_rate", number(r.decay_rate)}, {"window", Json::array({number(r.window_lo), number(r.window_hi)})},
          {"tolerance", number(r.tolerance)},  {"note", r.note}};
}

Json to_json(const AdmissibilityReport& r) {
  Json j = {{"A1", to_string(r.a1)},
            {"A2", to_string(r.a2)},
            {"A3", to_string(r.a3)},
            {"admissible", r.admissible()},
            {"rho_m", number(r.rho_m)},
            {"a", number(r.a)},
            {"self_intersection", to_json(r.intersection)},
            {"flatness", to_json(r.flatness)}};
  if (r.bounds) j["metric_bounds"] = to_json(*r.bounds);
  return j;
}

Json to_json(const EtaTable& t) {
  return {{"a", number(t.a)}, {"k1", number(t.k1)}, {"eta", numbers(t.values)}};
}

Json to_json(const KTotal& k) {
  return {{"value", number(k.value)},
          {"error_bound", number(k.error_bound)},
          {"c2_integral", number(k.c2_integral)},
          {"c2_error", number(k.c2_error)},
          {"eta2", number(k.eta2)},
          {"finite_part", number(k.integral.finite_part)},
          {"tail", number(k.integral.tail)},
          {"tail_error", number(k.integral.tail_error)},
          {"integrable", k.integrable}};
}

Json to_json(const Lemma2Constants& c) {
  return {{"computable", c.computable}, {"D", number(c.D)}, {"D_error", number(c.D_error)},
          {"s0", number(c.s0)},         {"r0", number(c.r0)}, {"B", number(c.B)},
          {"C", number(c.C)},           {"aleph", number(c.aleph)}, {"s1", number(c.s1)},
          {"note", c.note}};
}

Json to_json(const Lemma2Diagnostics& d) {
  return {{"S", number(d.S)},
          {"r_over_S", number(d.r_over_S)},
          {"r_over_S_half", number(d.r_over_S_half)},
          {"fitted_C", number(d.fitted_C)},
          {"fitted_C_half", number(d.fitted_C_half)},
          {"ks_kt_r_integral", number(d.ks_kt_r_integral)},
          {"ks_kt_r_half", number(d.ks_kt_r_half)},
          {"ks_kt_r_bound", number(d.ks_kt_r_bound)},
          {"z_prime_S", number(d.z_prime_S)},
          {"z_prime_half", number(d.z_prime_half)},
          {"r_limit", to_string(d.r_limit)},
          {"integral_limit", to_string(d.integral_limit)},
          {"z_limit", to_string(d.z_limit)},
          {"note", d.note}};
}

Json to_json(const ParabolicityReport& p) {
  return {{"verdict", to_string(p.verdict)},
          {"integral", number(p.integral())},
          {"finite_part", number(p.finite_part)},
          {"finite_error", number(p.finite_error)},
          {"tail", number(p.tail)},
          {"tail_error", number(p.tail_error)},
          {"tail_power", number(p.tail_power)},
          {"envelope_tail_bound", number(p.envelope_tail_bound)},
          {"lemma2", to_json(p.lemma2)},
          {"note", p.note}};
}

Json to_json(const VolumeGrowthReport& v, std::size_t max_samples) {
  Json samples = Json::array();
  const std::size_t n = v.s.size();
  const std::size_t stride = std::max<std::size_t>(1, (n + max_samples - 1) / max_samples);
  for (std::size_t i = 0; i < n; i += stride) samples.push_back(Json::array({number(v.s[i]), number(v.V[i])}));
  if (n > 0 && (n - 1) % stride != 0) samples.push_back(Json::array({number(v.s.back()), number(v.V.back())}));
  return {{"samples", samples},
          {"alpha_at_S", number(v.alpha_at_S)},
          {"alpha", number(v.alpha)},
          {"alpha_error", number(v.alpha_error)},
          {"envelope_checked", v.envelope_checked},
          {"s0", number(v.s0)},
          {"D", number(v.D)},
          {"c1", number(v.c1)},
          {"c2", number(v.c2)},
          {"c1_upper", number(v.c1_upper)},
          {"c2_upper", number(v.c2_upper)},
          {"envelope_contains", v.envelope_contains},
          {"worst_margin", number(v.worst_margin)},
          {"note", v.note}};
}

Json to_json(const CertificateRow& row) {
  return {{"sigma", number(row.sigma)},       {"tangential", term(row.tangential)},
          {"curvature", term(row.curvature)}, {"q3", term(row.q3)},
          {"direct", term(row.direct)},       {"discrepancy", number(row.discrepancy)},
          {"phi_underflow", row.phi_underflow}};
}

Json to_json(const PerturbationRow& row) {
  return {{"sigma", number(row.sigma)},
          {"epsilon", number(row.epsilon)},
          {"base", number(row.base)},
          {"cross", number(row.cross)},
          {"cross_closed", number(row.cross_closed)},
          {"cross_leading", number(row.cross_leading)},
          {"bump_energy", number(row.bump_energy)},
          {"q3_quadratic", number(row.q3_quadratic)},
          {"q3_direct", term(row.q3_direct)},
          {"error", number(row.error)}};
}

Json to_json(const BumpSpec& bump) {
  return {{"lo", number(bump.lo)},
          {"hi", number(bump.hi)},
          {"sign", number(bump.sign)},
          {"threshold", number(bump.threshold)},
          {"shape", "(1 - x^2)^3"}};
}

Json to_json(const Certificate& c) {
  Json rows = Json::array();
  for (const auto& r : c.rows) rows.push_back(to_json(r));
  Json prows = Json::array();
  for (const auto& r : c.perturbation) prows.push_back(to_json(r));
  Json hyp = Json::array();
  for (const auto& h : c.hypotheses) {
    hyp.push_back({{"name", h.name}, {"verdict", to_string(h.verdict)}, {"detail", h.detail}});
  }
  Json j = {{"case", c.case_tag},
            {"verdict", to_string(c.verdict)},
            {"K_total", number(c.K_total)},
            {"K_error", number(c.K_error)},
            {"c2_integral", number(c.c2_integral)},
            {"threshold", number(c.threshold)},
            {"s0", number(c.s0)},
            {"rows", rows},
            {"perturbation", prows},
            {"hypotheses", hyp},
            {"best_q3", number(c.best_q3)},
            {"note", c.note}};
  j["bump"] = c.bump ? to_json(*c.bump) : Json(nullptr);
  return j;
}

Json to_json(const MeshLevel& level) {
  return {{"mesh_id", level.mesh_id},  {"s_max", number(level.s_max)},
          {"h_s", number(level.h_s)},  {"h_u", number(level.h_u)},
          {"dofs", level.dofs},        {"values", numbers(level.values)},
          {"residuals", numbers(level.residuals)}, {"inertia_ok", level.inertia_ok}};
}

Json to_json(const ConvergenceStudy& s) {
  Json ladder = Json::array();
  for (const auto& l : s.ladder) ladder.push_back(to_json(l));
  Json trunc = Json::array();
  for (const auto& l : s.truncation) trunc.push_back(to_json(l));
  return {{"l", s.l},
          {"threshold", number(s.threshold)},
          {"ladder", ladder},
          {"truncation", trunc},
          {"observed_order", number(s.observed_order)},
          {"extrapolated", numbers(s.extrapolated)},
          {"uncertainty", numbers(s.uncertainty)},
          {"discretization_error", number(s.discretization_error)},
          {"truncation_sensitivity", number(s.truncation_sensitivity)},
          {"monotone", s.monotone},
          {"conclusive", s.conclusive},
          {"note", s.note}};
}

Json to_json(const BoundStateCount& b) {
  return {{"count", b.count},
          {"conclusive", b.conclusive},
          {"margin", number(b.margin)},
          {"uncertainty", number(b.uncertainty)},
          {"note", b.note}};
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
  const std::filesystem::path tmp = path.string() + suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace layerspectra
