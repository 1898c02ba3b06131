#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/evaluate.hpp"
#include "biaslens/measures.hpp"
#include "biaslens/textio.hpp"

namespace biaslens {

using Json = nlohmann::ordered_json;

enum class ReportFormat { json, tsv, svg };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "tsv") return ReportFormat::tsv;
  if (s == "svg") return ReportFormat::svg;
  throw ConfigError("unsupported report format '" + s + "' (expected json, tsv or svg)");
}

namespace detail {

inline Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline std::optional<double> json_opt(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

inline std::string opt_cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Fixed precision keeps the drawings stable and small.
inline std::string px(double x) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << x;
  return s.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bias reports

inline Json to_json(const BiasReport& r) {
  Json records = Json::array();
  for (const auto& rec : r.records) {
    records.push_back(Json{{"word", rec.word},
                           {"psi", rec.psi},
                           {"assoc_z", detail::opt_json(rec.assoc_z)},
                           {"assoc_z_prime", detail::opt_json(rec.assoc_z_prime)},
                           {"norm_z", detail::opt_json(rec.norm_z)},
                           {"norm_z_prime", detail::opt_json(rec.norm_z_prime)},
                           {"score", rec.score},
                           {"label", to_string(rec.label)}});
  }
  Json meta = Json::object();
  for (const auto& [k, v] : r.metadata) meta[k] = v;
  return Json{{"method", r.method},       {"representation", r.representation}, {"tau", r.tau},
              {"pool_size", r.pool_size}, {"metadata", meta},                   {"records", records}};
}

inline BiasReport bias_report_from_json(const Json& j) {
  try {
    BiasReport r;
    r.method = j.at("method").get<std::string>();
    r.representation = j.at("representation").get<std::string>();
    r.tau = j.at("tau").get<double>();
    r.pool_size = j.at("pool_size").get<std::size_t>();
    if (j.contains("metadata"))
      for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v.get<std::string>();
    for (const auto& jr : j.at("records")) {
      BiasRecord rec;
      rec.word = jr.at("word").get<std::string>();
      rec.psi = jr.at("psi").get<double>();
      rec.assoc_z = detail::json_opt(jr, "assoc_z");
      rec.assoc_z_prime = detail::json_opt(jr, "assoc_z_prime");
      rec.norm_z = detail::json_opt(jr, "norm_z");
      rec.norm_z_prime = detail::json_opt(jr, "norm_z_prime");
      rec.score = jr.at("score").get<double>();
      rec.label = parse_label(jr.at("label").get<std::string>());
      r.records.push_back(std::move(rec));
    }
    return r;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed bias report: ") + e.what());
  }
}

inline void write_report_json(std::ostream& out, const BiasReport& r) { out << to_json(r).dump(2) << '\n'; }

inline BiasReport read_report_json(std::istream& in) {
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed bias report: ") + e.what());
  }
  return bias_report_from_json(j);
}

inline void write_report_tsv(std::ostream& out, const BiasReport& r) {
  out << "word\tpsi\tassoc_z\tassoc_z_prime\tnorm_z\tnorm_z_prime\tscore\tlabel\n";
  for (const auto& rec : r.records) {
    out << rec.word << '\t' << format_double(rec.psi) << '\t' << detail::opt_cell(rec.assoc_z) << '\t'
        << detail::opt_cell(rec.assoc_z_prime) << '\t' << detail::opt_cell(rec.norm_z) << '\t'
        << detail::opt_cell(rec.norm_z_prime) << '\t' << format_double(rec.score) << '\t' << to_string(rec.label)
        << '\n';
  }
}

/// Scatter of normalized association to Z' (x) against Z (y), with the gray
/// unbiased band |y - x| < tau around the diagonal.
inline void write_report_svg(std::ostream& out, const BiasReport& r) {
  using detail::px;
  if (r.records.empty()) throw DataError("cannot draw an empty report");
  for (const auto& rec : r.records)
    if (!rec.norm_z || !rec.norm_z_prime)
      throw UsageError("the scatter plot needs per-concept associations; '" + r.method + "' has none");
  constexpr double size = 400, margin = 50;
  auto X = [&](double x) { return margin + x * size; };
  auto Y = [&](double y) { return margin + (1.0 - y) * size; };
  const double t = std::clamp(r.tau, 0.0, 1.0);

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(size + 2 * margin) << "\" height=\""
      << px(size + 2 * margin) << "\" viewBox=\"0 0 " << px(size + 2 * margin) << ' ' << px(size + 2 * margin)
      << "\">\n";
  out << "<title>" << detail::xml_escape(r.method + " / " + r.representation) << "</title>\n";
  out << "<rect x=\"" << px(margin) << "\" y=\"" << px(margin) << "\" width=\"" << px(size) << "\" height=\""
      << px(size) << "\" fill=\"white\" stroke=\"black\"/>\n";
  // Band between y = x - tau and y = x + tau, clipped to the unit square.
  out << "<polygon class=\"unbiased-band\" data-tau=\"" << format_double(r.tau) << "\" fill=\"#d0d0d0\" points=\""
      << px(X(0)) << ',' << px(Y(0)) << ' ' << px(X(t)) << ',' << px(Y(0)) << ' ' << px(X(1)) << ','
      << px(Y(1 - t)) << ' ' << px(X(1)) << ',' << px(Y(1)) << ' ' << px(X(1 - t)) << ',' << px(Y(1)) << ' '
      << px(X(0)) << ',' << px(Y(t)) << "\"/>\n";
  out << "<line class=\"diagonal\" x1=\"" << px(X(0)) << "\" y1=\"" << px(Y(0)) << "\" x2=\"" << px(X(1))
      << "\" y2=\"" << px(Y(1)) << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  for (const auto& rec : r.records) {
    const char* color = rec.label == Label::z_biased ? "#c0392b" : rec.label == Label::z_prime_biased ? "#2471a3" : "#555555";
    out << "<circle class=\"word\" cx=\"" << px(X(*rec.norm_z_prime)) << "\" cy=\"" << px(Y(*rec.norm_z))
        << "\" r=\"3\" fill=\"" << color << "\"><title>" << detail::xml_escape(rec.word) << "</title></circle>\n";
  }
  out << "<text x=\"" << px(margin + size / 2) << "\" y=\"" << px(size + 2 * margin - 15)
      << "\" text-anchor=\"middle\">association to Z'</text>\n";
  out << "<text x=\"15\" y=\"" << px(margin + size / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
      << px(margin + size / 2) << ")\">association to Z</text>\n";
  out << "</svg>\n";
}

inline void emit_report(std::ostream& out, const BiasReport& r, ReportFormat f) {
  if (r.records.empty()) throw DataError("empty bias report");
  switch (f) {
    case ReportFormat::json: write_report_json(out, r); return;
    case ReportFormat::tsv: write_report_tsv(out, r); return;
    case ReportFormat::svg: write_report_svg(out, r); return;
  }
}

// ---------------------------------------------------------------------------
// Histograms

inline void write_histogram_tsv(std::ostream& out, const Histogram& h) {
  out << "lo\thi\tunbiased\tz_biased\tz_prime_biased\n";
  for (const auto& b : h.bins)
    out << format_double(b.lo) << '\t' << format_double(b.hi) << '\t' << b.unbiased << '\t' << b.z_biased << '\t'
        << b.z_prime_biased << '\n';
}

/// Stacked bars per bin: unbiased, then Z-biased, then Z'-biased.
inline void write_histogram_svg(std::ostream& out, const Histogram& h) {
  using detail::px;
  if (h.bins.empty()) throw DataError("cannot draw an empty histogram");
  constexpr double width = 500, height = 300, margin = 40;
  std::size_t peak = 1;
  for (const auto& b : h.bins) peak = std::max(peak, b.total());
  const double bw = width / static_cast<double>(h.bins.size());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << px(width + 2 * margin) << "\" height=\""
      << px(height + 2 * margin) << "\">\n";
  for (std::size_t i = 0; i < h.bins.size(); ++i) {
    const auto& b = h.bins[i];
    double base = margin + height;
    auto bar = [&](std::size_t n, const char* cls, const char* color) {
      if (!n) return;
      const double hgt = height * static_cast<double>(n) / static_cast<double>(peak);
      base -= hgt;
      out << "<rect class=\"" << cls << "\" x=\"" << px(margin + bw * static_cast<double>(i)) << "\" y=\"" << px(base)
          << "\" width=\"" << px(bw) << "\" height=\"" << px(hgt) << "\" fill=\"" << color << "\"/>\n";
    };
    bar(b.unbiased, "unbiased", "#999999");
    bar(b.z_biased, "z-biased", "#c0392b");
    bar(b.z_prime_biased, "z-prime-biased", "#2471a3");
  }
  out << "<line x1=\"" << px(margin) << "\" y1=\"" << px(margin + height) << "\" x2=\"" << px(margin + width)
      << "\" y2=\"" << px(margin + height) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << px(margin) << "\" y=\"" << px(height + 2 * margin - 10) << "\">" << format_double(-h.range)
      << "</text>\n";
  out << "<text x=\"" << px(margin + width) << "\" y=\"" << px(height + 2 * margin - 10)
      << "\" text-anchor=\"end\">" << format_double(h.range) << "</text>\n";
  out << "</svg>\n";
}

inline void emit_histogram(std::ostream& out, const Histogram& h, ReportFormat f) {
  switch (f) {
    case ReportFormat::tsv: write_histogram_tsv(out, h); return;
    case ReportFormat::svg: write_histogram_svg(out, h); return;
    case ReportFormat::json: throw UsageError("histograms are emitted as tsv or svg");
  }
}

// ---------------------------------------------------------------------------
// Correlation tables and augmentation trajectories

inline void write_correlation_tsv(std::ostream& out, std::span<const CorrelationRow> rows) {
  out << "representation\tmeasure\tcollection\tspearman\tpearson\tn\n";
  for (const auto& r : rows)
    out << r.representation << '\t' << r.measure << '\t' << r.collection << '\t' << format_double(r.spearman) << '\t'
        << format_double(r.pearson) << '\t' << r.n << '\n';
}

inline Json to_json(std::span<const CorrelationRow> rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back(Json{{"representation", r.representation},
                       {"measure", r.measure},
                       {"collection", r.collection},
                       {"spearman", r.spearman},
                       {"pearson", r.pearson},
                       {"n", r.n}});
  return out;
}

inline std::vector<CorrelationRow> correlation_from_json(const Json& j) {
  try {
    std::vector<CorrelationRow> rows;
    for (const auto& r : j)
      rows.push_back({r.at("representation").get<std::string>(), r.at("measure").get<std::string>(),
                      r.at("collection").get<std::string>(), r.at("spearman").get<double>(),
                      r.at("pearson").get<double>(), r.at("n").get<std::size_t>()});
    return rows;
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed correlation table: ") + e.what());
  }
}

inline void emit_correlation(std::ostream& out, std::span<const CorrelationRow> rows, ReportFormat f) {
  if (rows.empty()) throw DataError("empty correlation table");
  switch (f) {
    case ReportFormat::tsv: write_correlation_tsv(out, rows); return;
    case ReportFormat::json: out << to_json(rows).dump(2) << '\n'; return;
    case ReportFormat::svg: throw UsageError("correlation tables are emitted as tsv or json");
  }
}

inline void write_trajectories_tsv(std::ostream& out, std::span<const Trajectory> rows) {
  out << "occupation\tmethod\tpsi_original\tpsi_half\tpsi_full\tnorm_original\tnorm_half\tnorm_full\n";
  for (const auto& t : rows) {
    out << t.occupation << '\t' << t.method;
    for (double x : t.psi) out << '\t' << format_double(x);
    for (double x : t.normalized) out << '\t' << format_double(x);
    out << '\n';
  }
}

inline void write_steps_tsv(std::ostream& out, std::span<const StepAggregate> rows) {
  out << "method\tn\tstep1\tstep2\tstep1_norm\tstep2_norm\n";
  for (const auto& s : rows)
    out << s.method << '\t' << s.n << '\t' << format_double(s.step1) << '\t' << format_double(s.step2) << '\t'
        << format_double(s.step1_normalized) << '\t' << format_double(s.step2_normalized) << '\n';
}

inline Json to_json(const CdaResult& r) {
  Json traj = Json::array();
  for (const auto& t : r.trajectories)
    traj.push_back(Json{{"occupation", t.occupation},
                        {"method", t.method},
                        {"psi", {t.psi[0], t.psi[1], t.psi[2]}},
                        {"normalized", {t.normalized[0], t.normalized[1], t.normalized[2]}}});
  Json steps = Json::array();
  for (const auto& s : r.steps)
    steps.push_back(Json{{"method", s.method},
                         {"n", s.n},
                         {"step1", s.step1},
                         {"step2", s.step2},
                         {"step1_normalized", s.step1_normalized},
                         {"step2_normalized", s.step2_normalized}});
  return Json{{"trajectories", traj}, {"steps", steps}};
}

inline void emit_trajectories(std::ostream& out, const CdaResult& r, ReportFormat f) {
  if (r.trajectories.empty()) throw DataError("no occupation trajectories to report");
  switch (f) {
    case ReportFormat::tsv: write_trajectories_tsv(out, r.trajectories); return;
    case ReportFormat::json: out << to_json(r).dump(2) << '\n'; return;
    case ReportFormat::svg: throw UsageError("trajectories are emitted as tsv or json");
  }
}

}  // namespace biaslens
