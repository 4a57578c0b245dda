#include "afem/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace afem {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_run_header(std::ostream& os) {
  os << "k,elements,marked,dofs,eta,osc,energy,h1_error,q,newton_iters,cg_iters,residual,"
        "eta_sq_marked,eta_sq_refined,du_sq,osc_sq_common,osc_sq_common_next,energy_prolonged,newton_energy_rise\n";
}

void write_run_row(std::ostream& os, const AdaptRecord& r) {
  os << r.k << ',' << r.num_elements << ',' << r.num_marked << ',' << r.num_dofs << ',' << num(r.eta) << ','
     << num(r.osc) << ',' << num(r.energy) << ',' << num(r.h1_error) << ',' << num(r.q) << ',' << r.newton_iters
     << ',' << r.cg_iters << ',' << num(r.residual) << ',' << num(r.eta_sq_marked) << ',' << num(r.eta_sq_refined)
     << ',' << num(r.du_sq) << ',' << num(r.osc_sq_common) << ',' << num(r.osc_sq_common_next) << ','
     << num(r.energy_prolonged) << ',' << num(r.newton_energy_rise) << '\n';
}

void write_run_csv(std::ostream& os, const std::vector<AdaptRecord>& records) {
  write_run_header(os);
  for (const auto& r : records) write_run_row(os, r);
}

void write_constants(std::ostream& os, const EmpiricalConstants& c, const MonotonicityConstants& m) {
  os << "provenance=" << c.provenance << '\n'
     << "C_E=" << num(c.C_E) << '\n'
     << "C_L=" << num(c.C_L) << '\n'
     << "C_U=" << num(c.C_U) << '\n'
     << "C_LU=" << num(c.C_LU) << '\n'
     << "C_S=" << num(c.C_S) << '\n'
     << "rho=" << num(c.rho) << '\n'
     << "mu=" << num(c.mu) << '\n'
     << "theta0=" << num(c.theta0) << '\n'
     << "nu=" << num(c.nu) << '\n'
     << "F_ref=" << num(c.F_ref) << '\n'
     << "c_a=" << num(m.c_a) << '\n'
     << "C_a=" << num(m.C_a) << '\n'
     << "c_A=" << num(m.c_A) << '\n'
     << "C_A=" << num(m.C_A) << '\n'
     << "t_max=" << num(m.t_max) << '\n';
}

void write_loglog_svg(std::ostream& os, const std::vector<Series>& series, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel) {
  constexpr double W = 640, H = 480, L = 70, R = 20, T = 40, B = 60;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!(s.x[i] > 0.0 && s.y[i] > 0.0)) continue;
      xmin = std::min(xmin, std::log10(s.x[i]));
      xmax = std::max(xmax, std::log10(s.x[i]));
      ymin = std::min(ymin, std::log10(s.y[i]));
      ymax = std::max(ymax, std::log10(s.y[i]));
    }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  xmin = std::floor(xmin), xmax = std::max(std::ceil(xmax), xmin + 1);
  ymin = std::floor(ymin), ymax = std::max(std::ceil(ymax), ymin + 1);
  auto px = [&](double lx) { return L + (lx - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ymin) / (ymax - ymin) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << xml_escape(title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double d = xmin; d <= xmax + 1e-9; d += 1.0)
    os << "<text x=\"" << px(d) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
       << " font-size=\"12\">1e" << static_cast<int>(d) << "</text>\n";
  for (double d = ymin; d <= ymax + 1e-9; d += 1.0)
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(d) + 4 << "\" text-anchor=\"end\" font-family=\"sans-serif\""
       << " font-size=\"12\">1e" << static_cast<int>(d) << "</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\" font-family=\"sans-serif\""
     << " font-size=\"13\">" << xml_escape(xlabel) << "</text>\n"
     << "<text x=\"16\" y=\"" << H / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\""
     << " transform=\"rotate(-90 16 " << H / 2 << ")\">" << xml_escape(ylabel) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % 6];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    bool first = true;
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      if (!(series[s].x[i] > 0.0 && series[s].y[i] > 0.0)) continue;
      os << (first ? "" : " ") << px(std::log10(series[s].x[i])) << ',' << py(std::log10(series[s].y[i]));
      first = false;
    }
    os << "\"/>\n";
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 18 + 16 * s << "\" fill=\"" << color
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(series[s].name) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace afem
