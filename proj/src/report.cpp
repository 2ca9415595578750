#include "layerspectra/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "layerspectra/certifier.hpp"

namespace layerspectra {

namespace {

std::string fmt(double x, int digits = 6) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

double num(const Json& j, const char* key, double fallback = std::nan("")) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return number_from(j.at(key));
  } catch (const Error&) {
    return fallback;
  }
}

std::string str(const Json& j, const char* key, const std::string& fallback = "n/a") {
  if (!j.is_object() || !j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
  if (v.is_number()) return fmt(v.get<double>());
  return v.dump();
}

const Json* blob(const Json& record, const char* name) {
  if (!record.contains("results")) return nullptr;
  const auto& results = record.at("results");
  if (!results.contains(name) || results.at(name).is_null()) return nullptr;
  return &results.at(name);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

std::string render_svg(const PlotSpec& plot) {
  const double width = 640, height = 400;
  const double left = 70, right = 160, top = 40, bottom = 50;
  const double pw = width - left - right, ph = height - top - bottom;

  auto xmap = [&](double x) { return plot.log_x ? std::log10(x) : x; };
  double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
  for (const auto& s : plot.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (plot.log_x && s.x[i] <= 0) continue;
      x_lo = std::min(x_lo, xmap(s.x[i]));
      x_hi = std::max(x_hi, xmap(s.x[i]));
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (plot.reference && std::isfinite(*plot.reference)) {
    y_lo = std::min(y_lo, *plot.reference);
    y_hi = std::max(y_hi, *plot.reference);
  }
  if (!std::isfinite(x_lo)) { x_lo = 0; x_hi = 1; }
  if (!std::isfinite(y_lo)) { y_lo = 0; y_hi = 1; }
  if (x_hi - x_lo <= 0) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi - y_lo <= 0) {
    const double pad = std::max(std::abs(y_lo) * 0.05, 1e-12);
    y_lo -= pad;
    y_hi += pad;
  } else {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  auto px = [&](double x) { return left + (xmap(x) - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(plot.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int t = 0; t <= 4; ++t) {
    const double fx = x_lo + (x_hi - x_lo) * t / 4.0;
    const double gx = left + pw * t / 4.0;
    const std::string label = plot.log_x ? "1e" + fmt(fx, 3) : fmt(fx, 4);
    out << "<line x1=\"" << fmt(gx) << "\" y1=\"" << top + ph << "\" x2=\"" << fmt(gx) << "\" y2=\""
        << top + ph + 4 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << fmt(gx) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
        << label << "</text>\n";
    const double fy = y_lo + (y_hi - y_lo) * t / 4.0;
    const double gy = top + ph - ph * t / 4.0;
    out << "<line x1=\"" << left - 4 << "\" y1=\"" << fmt(gy) << "\" x2=\"" << left << "\" y2=\""
        << fmt(gy) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << fmt(gy + 4) << "\" text-anchor=\"end\">"
        << fmt(fy, 5) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 10 << "\" text-anchor=\"middle\">"
      << escape(plot.x_label) << (plot.log_x ? " (log)" : "") << "</text>\n";
  out << "<text x=\"15\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << top + ph / 2 << ")\">" << escape(plot.y_label) << "</text>\n";

  double legend_y = top + 10;
  if (plot.reference && std::isfinite(*plot.reference)) {
    const double gy = py(*plot.reference);
    out << "<line x1=\"" << left << "\" y1=\"" << fmt(gy) << "\" x2=\"" << left + pw << "\" y2=\""
        << fmt(gy) << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << left + pw + 30
        << "\" y2=\"" << legend_y << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    out << "<text x=\"" << left + pw + 34 << "\" y=\"" << legend_y + 4 << "\">"
        << escape(plot.reference_label) << "</text>\n";
    legend_y += 16;
  }

  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
    std::ostringstream pts;
    std::size_t n = 0;
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (plot.log_x && s.x[i] <= 0) continue;
      pts << (n++ ? " " : "") << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    }
    if (n == 1) {
      const auto p = pts.str();
      const auto comma = p.find(',');
      out << "<circle cx=\"" << p.substr(0, comma) << "\" cy=\"" << p.substr(comma + 1)
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    } else if (n > 1) {
      out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
          << pts.str() << "\"/>\n";
    }
    out << "<line x1=\"" << left + pw + 10 << "\" y1=\"" << legend_y << "\" x2=\"" << left + pw + 30
        << "\" y2=\"" << legend_y << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << left + pw + 34 << "\" y=\"" << legend_y + 4 << "\">" << escape(s.label)
        << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  return out.str();
}

namespace {

void admissibility_section(std::ostringstream& md, const Json* adm) {
  md << "### Admissibility\n\n";
  if (!adm) {
    md << "_missing: no admissibility record_\n\n";
    return;
  }
  md << "| check | verdict |\n|---|---|\n";
  md << "| A1 (injective, no self-intersection) | " << str(*adm, "A1") << " |\n";
  md << "| A2 (a < rho_m) | " << str(*adm, "A2") << " |\n";
  md << "| A3 (asymptotic flatness) | " << str(*adm, "A3") << " |\n\n";
  md << "rho_m = " << fmt(num(*adm, "rho_m")) << ", a = " << fmt(num(*adm, "a"));
  if (adm->contains("metric_bounds")) {
    const auto& b = adm->at("metric_bounds");
    md << ", C- = " << fmt(num(b, "c_minus")) << ", C+ = " << fmt(num(b, "c_plus"));
  }
  md << ".\n\n";
}

void invariants_section(std::ostringstream& md, const Json* inv) {
  md << "### Invariants\n\n";
  if (!inv) {
    md << "_missing: invariants not computed_\n\n";
    return;
  }
  const auto& k = inv->at("K_total");
  md << "| quantity | value |\n|---|---|\n";
  md << "| K_total | " << fmt(num(k, "value")) << " +- " << fmt(num(k, "error_bound"), 3) << " |\n";
  md << "| int c2 r^2 ds | " << fmt(num(k, "c2_integral")) << " |\n";
  if (inv->contains("parabolicity")) {
    const auto& p = inv->at("parabolicity");
    md << "| parabolicity | " << str(p, "verdict") << " |\n";
    md << "| int_1^inf ds/(w2 r^2) | " << fmt(num(p, "integral")) << " |\n";
    if (p.contains("lemma2")) {
      const auto& l2 = p.at("lemma2");
      md << "| D, s0, s1 | " << fmt(num(l2, "D")) << ", " << fmt(num(l2, "s0")) << ", "
         << fmt(num(l2, "s1")) << " |\n";
    }
  }
  if (inv->contains("volume_growth")) {
    const auto& v = inv->at("volume_growth");
    md << "| V/(v3 s^3) at S | " << fmt(num(v, "alpha_at_S")) << " |\n";
    md << "| envelope contains V | " << str(v, "envelope_contains") << " |\n";
  }
  md << "\n";
}

void certificate_section(std::ostringstream& md, const Json* cert) {
  md << "### Variational certificate\n\n";
  if (!cert) {
    md << "_missing: certify not run_\n\n";
    return;
  }
  md << "Case " << str(*cert, "case") << ", verdict **" << str(*cert, "verdict") << "**, s0 = "
     << fmt(num(*cert, "s0")) << ". " << str(*cert, "note", "") << "\n\n";
  md << "| sigma | tangential | curvature | Q3 | direct | discrepancy |\n|---|---|---|---|---|---|\n";
  for (const auto& row : cert->at("rows")) {
    md << "| " << fmt(num(row, "sigma"), 3) << " | " << fmt(num(row.at("tangential"), "value")) << " | "
       << fmt(num(row.at("curvature"), "value")) << " | " << fmt(num(row.at("q3"), "value")) << " +- "
       << fmt(num(row.at("q3"), "error"), 2) << " | " << fmt(num(row.at("direct"), "value")) << " | "
       << fmt(num(row, "discrepancy"), 2) << " |\n";
  }
  md << "\n";
  const auto& pert = cert->at("perturbation");
  if (!pert.empty()) {
    md << "Bump perturbation:\n\n| sigma | epsilon | cross | cross (closed form) | bump energy | Q3 perturbed |\n"
          "|---|---|---|---|---|---|\n";
    for (const auto& row : pert) {
      md << "| " << fmt(num(row, "sigma"), 3) << " | " << fmt(num(row, "epsilon")) << " | "
         << fmt(num(row, "cross")) << " | " << fmt(num(row, "cross_closed")) << " | "
         << fmt(num(row, "bump_energy")) << " | " << fmt(num(row, "q3_quadratic")) << " |\n";
    }
    md << "\n";
  }
}

void spectrum_section(std::ostringstream& md, const Json* spec) {
  md << "### Eigensolver\n\n";
  if (!spec) {
    md << "_missing: solve not run_\n\n";
    return;
  }
  for (const auto& mode : spec->at("modes")) {
    md << "Angular mode l = " << mode.at("l").get<int>() << ", order " << fmt(num(mode, "observed_order"), 3)
       << ".\n\n| mesh | dofs | lambda_1 | lambda_2 |\n|---|---|---|---|\n";
    auto rows = [&](const Json& levels) {
      for (const auto& lv : levels) {
        const auto& v = lv.at("values");
        md << "| " << lv.at("mesh_id").get<std::string>() << " | " << lv.at("dofs").get<std::size_t>()
           << " | " << (v.size() > 0 ? fmt(number_from(v[0]), 9) : "n/a") << " | "
           << (v.size() > 1 ? fmt(number_from(v[1]), 9) : "n/a") << " |\n";
      }
    };
    rows(mode.at("ladder"));
    rows(mode.at("truncation"));
    const auto& ex = mode.at("extrapolated");
    const auto& un = mode.at("uncertainty");
    if (!ex.empty()) {
      md << "\nExtrapolated lambda_1 = " << fmt(number_from(ex[0]), 9) << " +- "
         << fmt(number_from(un[0]), 3) << ", threshold " << fmt(num(mode, "threshold"), 9) << ".\n\n";
    }
  }
  if (spec->contains("bound_states")) {
    const auto& b = spec->at("bound_states");
    md << "Bound states below threshold - margin: " << b.at("count").get<int>()
       << (b.at("conclusive").get<bool>() ? " (conclusive)" : " (inconclusive)") << ".\n\n";
  }
}

PlotSpec meridian_plot(const Json& adm, double a) {
  PlotSpec plot{"Meridian and boundary sheets", "r", "z", false, {}, std::nullopt, ""};
  Series mid{"u = 0", {}, {}}, lo{"u = -a", {}, {}}, hi{"u = +a", {}, {}};
  for (const auto& p : adm.at("meridian")) {
    const double r = number_from(p[1]), z = number_from(p[2]);
    const double rp = number_from(p[3]), zp = number_from(p[4]);
    mid.x.push_back(r);
    mid.y.push_back(z);
    lo.x.push_back(r + a * zp);
    lo.y.push_back(z - a * rp);
    hi.x.push_back(r - a * zp);
    hi.y.push_back(z + a * rp);
  }
  plot.series = {mid, lo, hi};
  return plot;
}

PlotSpec phi_plot(const Json& cert) {
  PlotSpec plot{"Trial family phi_sigma", "s", "phi", true, {}, std::nullopt, ""};
  const double s0 = num(cert, "s0", 1.0);
  for (const auto& row : cert.at("rows")) {
    const double sigma = num(row, "sigma");
    Series s{"sigma = " + fmt(sigma, 3), {}, {}};
    for (int i = 0; i <= 120; ++i) {
      const double x = s0 * std::pow(10.0, 6.0 * i / 120.0);
      s.x.push_back(x);
      s.y.push_back(sigma > 0 ? phi_sigma(x, sigma, s0) : 1.0);
    }
    plot.series.push_back(std::move(s));
  }
  return plot;
}

PlotSpec q3_plot(const Json& cert) {
  PlotSpec plot{"Q3 versus sigma", "sigma", "Q3", true, {}, 0.0, "zero"};
  Series q{"Q3 (decomposition)", {}, {}}, d{"Q3 (direct)", {}, {}};
  for (const auto& row : cert.at("rows")) {
    q.x.push_back(num(row, "sigma"));
    q.y.push_back(num(row.at("q3"), "value"));
    d.x.push_back(num(row, "sigma"));
    d.y.push_back(num(row.at("direct"), "value"));
  }
  plot.series = {q, d};
  return plot;
}

PlotSpec lambda_plot(const Json& spec) {
  PlotSpec plot{"lambda_1 versus mesh spacing", "h_s", "lambda_1", true, {}, std::nullopt, "threshold"};
  for (const auto& mode : spec.at("modes")) {
    Series s{"l = " + std::to_string(mode.at("l").get<int>()), {}, {}};
    for (const auto& lv : mode.at("ladder")) {
      if (lv.at("values").empty()) continue;
      s.x.push_back(num(lv, "h_s"));
      s.y.push_back(number_from(lv.at("values")[0]));
    }
    plot.reference = num(mode, "threshold");
    plot.series.push_back(std::move(s));
  }
  return plot;
}

}  // namespace

RenderedReport render_report(const std::vector<Json>& records) {
  if (records.empty()) throw ConfigError("report: no records");
  RenderedReport out;
  std::ostringstream md;
  md << "# layerspectra report\n\n";
  if (records.size() > 1) {
    md << "| run | profile | a | verdict |\n|---|---|---|---|\n";
    for (const auto& r : records) {
      md << "| " << str(r, "input_hash").substr(0, 12) << " | " << str(r, "profile") << " | "
         << fmt(num(r, "a")) << " | " << str(r, "verdict") << " |\n";
    }
    md << "\n";
  }
  for (const auto& r : records) {
    const std::string id = str(r, "input_hash").substr(0, 12);
    md << "## Run " << id << "\n\n";
    md << "Profile " << str(r, "profile") << ", a = " << fmt(num(r, "a")) << ", threshold (pi/2a)^2 = "
       << fmt(num(r, "threshold"), 9) << ".\n\n";
    md << "Verdict: " << str(r, "verdict") << "\n\n";

    const Json* adm = blob(r, "admissibility");
    const Json* inv = blob(r, "invariants");
    const Json* cert = blob(r, "certificate");
    const Json* spec = blob(r, "spectrum");

    const bool flat = str(r, "family", "") == "flat";
    if (flat) {
      md << "Flat profile: no discrete spectrum expected; the spectrum starts at the threshold.\n\n";
    }

    admissibility_section(md, adm);
    invariants_section(md, inv);

    if (cert || spec) {
      md << "### Certificates side by side\n\n| route | result |\n|---|---|\n";
      md << "| variational (trial family) | " << (cert ? str(*cert, "verdict") : "missing");
      if (cert) md << ", best Q3 = " << fmt(num(*cert, "best_q3"));
      md << " |\n| eigensolver | ";
      if (spec && !spec->at("modes").empty()) {
        const auto& m0 = spec->at("modes")[0];
        const auto& ex = m0.at("extrapolated");
        md << "lambda_1 = " << (ex.empty() ? "n/a" : fmt(number_from(ex[0]), 9)) << " vs "
           << fmt(num(m0, "threshold"), 9) << ", bound states "
           << spec->at("bound_states").at("count").get<int>();
      } else {
        md << "missing";
      }
      md << " |\n\n";
    }
    certificate_section(md, cert);
    spectrum_section(md, spec);

    if (adm && adm->contains("meridian")) {
      const std::string name = "meridian_" + id + ".svg";
      out.svgs[name] = render_svg(meridian_plot(*adm, num(r, "a", 0.0)));
      md << "![meridian](" << name << ")\n\n";
    }
    if (cert && !cert->at("rows").empty()) {
      const std::string phi = "phi_" + id + ".svg";
      const std::string q3 = "q3_" + id + ".svg";
      out.svgs[phi] = render_svg(phi_plot(*cert));
      out.svgs[q3] = render_svg(q3_plot(*cert));
      md << "![phi family](" << phi << ")\n\n![Q3](" << q3 << ")\n\n";
    }
    if (spec && !spec->at("modes").empty()) {
      const std::string name = "lambda_" + id + ".svg";
      out.svgs[name] = render_svg(lambda_plot(*spec));
      md << "![lambda_1](" << name << ")\n\n";
    }
  }
  out.markdown = md.str();
  return out;
}

void write_report(const RenderedReport& report, const std::filesystem::path& dir) {
  write_atomic(dir / "report.md", report.markdown);
  for (const auto& [name, svg] : report.svgs) write_atomic(dir / name, svg);
}

}  // namespace layerspectra
