#include "lingame/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "lingame/error.hpp"

namespace lingame {

namespace {

std::string fmt(const char* pattern, double v) {
  if (v == 0.0) v = 0.0;  // folds -0
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  std::string s(buf);
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string f2(double v) { return fmt("%.2f", v); }

std::string xml_escape(const std::string& s) {
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

std::vector<const StudyEffect*> included_rows(const MetaResult& meta,
                                              std::span<const StudyEffect> effects) {
  std::vector<const StudyEffect*> rows;
  std::set<std::string> ids;
  for (const auto& e : effects) {
    if (!e.included) continue;
    rows.push_back(&e);
    ids.insert(e.study_id);
  }
  std::set<std::string> weighted;
  for (const auto& [id, w] : meta.weights) weighted.insert(id);
  if (ids != weighted || ids.size() != rows.size()) {
    throw Error(ErrorCode::InconsistentInput,
                "meta-analysis weights do not match the included study effects");
  }
  return rows;
}

struct Domain {
  double lo;
  double hi;
};

Domain domain(const MetaResult& meta, const std::vector<const StudyEffect*>& rows) {
  double lo = std::min({0.0, meta.ci95.first});
  double hi = std::max({0.0, meta.ci95.second});
  for (const auto* e : rows) {
    lo = std::min(lo, e->slope - kCiMultiplier * e->se);
    hi = std::max(hi, e->slope + kCiMultiplier * e->se);
  }
  if (hi - lo <= 0.0) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

std::string model_title(MetaModel model) {
  switch (model) {
    case MetaModel::Fixed: return "Fixed-effects meta-analysis";
    case MetaModel::RandomDL: return "Random-effects meta-analysis (DerSimonian-Laird)";
    case MetaModel::RandomREML: return "Random-effects meta-analysis (REML)";
  }
  return "Meta-analysis";
}

std::string interval_text(double est, double lo, double hi) {
  return f2(est) + " [" + f2(lo) + ", " + f2(hi) + "]";
}

}  // namespace

std::string heterogeneity_line(const MetaResult& m) {
  return "τ²=" + f2(m.tau2) + "; Q=" + f2(m.q) + " (df=" + std::to_string(m.df) +
         "); I²=" + f2(m.i2) + "; z=" + f2(m.z) + "; p=" + f2(m.p);
}

std::string footnote_text(ExclusionReason reason) {
  switch (reason) {
    case ExclusionReason::TooFewConditions: return "too few conditions";
    case ExclusionReason::DegenerateDesign: return "degenerate design";
    case ExclusionReason::MissingData: return "missing data";
  }
  return "unknown";
}

double forest_x(const MetaResult& meta, std::span<const StudyEffect> effects, double value,
                const ForestStyle& style) {
  const auto d = domain(meta, included_rows(meta, effects));
  return style.plot_left + (value - d.lo) / (d.hi - d.lo) * style.plot_width;
}

std::string forest_svg(const MetaResult& meta, std::span<const StudyEffect> effects,
                       const ForestStyle& style) {
  const auto rows = included_rows(meta, effects);
  const auto d = domain(meta, rows);
  const auto x = [&](double v) {
    return style.plot_left + (v - d.lo) / (d.hi - d.lo) * style.plot_width;
  };
  std::vector<const StudyEffect*> excluded;
  for (const auto& e : effects) {
    if (!e.included) excluded.push_back(&e);
  }
  double max_weight = 0.0;
  for (const auto& [id, w] : meta.weights) max_weight = std::max(max_weight, w);

  const double rh = style.row_height;
  const double top = 70.0;
  const double rows_bottom = top + rh * static_cast<double>(rows.size());
  const double pooled_y = rows_bottom + rh;
  const double axis_y = pooled_y + rh;
  const double footer_y = axis_y + 40.0;
  const double height = footer_y + 20.0 + 18.0 * static_cast<double>(excluded.size()) + 10.0;
  const double text_x = style.plot_left + style.plot_width + 20.0;
  const double weight_x = style.width - 20.0;

  std::string s;
  s += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + f2(style.width) +
       "\" height=\"" + f2(height) + "\" viewBox=\"0 0 " + f2(style.width) + " " + f2(height) +
       "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n";
  s += "<rect x=\"0\" y=\"0\" width=\"" + f2(style.width) + "\" height=\"" + f2(height) +
       "\" fill=\"white\"/>\n";
  s += "<text x=\"10.00\" y=\"22.00\" font-size=\"14\" font-weight=\"bold\">" +
       xml_escape(model_title(meta.model)) + "</text>\n";
  s += "<text x=\"10.00\" y=\"52.00\" font-weight=\"bold\">Study</text>\n";
  s += "<text x=\"" + f2(text_x) + "\" y=\"52.00\" font-weight=\"bold\">Slope [95% CI]</text>\n";
  s += "<text x=\"" + f2(weight_x) + "\" y=\"52.00\" font-weight=\"bold\" text-anchor=\"end\">Weight</text>\n";

  const double zx = x(0.0);
  s += "<line class=\"zero\" x1=\"" + f2(zx) + "\" y1=\"" + f2(top) + "\" x2=\"" + f2(zx) +
       "\" y2=\"" + f2(axis_y) + "\" stroke=\"#888888\" stroke-dasharray=\"4,3\"/>\n";

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& e = *rows[i];
    const double w = meta.weights.at(e.study_id);
    const double yc = top + rh * (static_cast<double>(i) + 0.5);
    const double lo = e.slope - kCiMultiplier * e.se;
    const double hi = e.slope + kCiMultiplier * e.se;
    const double side = std::max(3.0, style.max_marker * std::sqrt(w / max_weight));
    s += "<g class=\"study\">\n";
    s += "<text x=\"10.00\" y=\"" + f2(yc + 4.0) + "\">" + xml_escape(e.study_id) + "</text>\n";
    s += "<line x1=\"" + f2(x(lo)) + "\" y1=\"" + f2(yc) + "\" x2=\"" + f2(x(hi)) + "\" y2=\"" +
         f2(yc) + "\" stroke=\"black\"/>\n";
    s += "<rect x=\"" + f2(x(e.slope) - side / 2.0) + "\" y=\"" + f2(yc - side / 2.0) +
         "\" width=\"" + f2(side) + "\" height=\"" + f2(side) + "\" fill=\"#1f4e79\"/>\n";
    s += "<text x=\"" + f2(text_x) + "\" y=\"" + f2(yc + 4.0) + "\">" +
         interval_text(e.slope, lo, hi) + "</text>\n";
    s += "<text x=\"" + f2(weight_x) + "\" y=\"" + f2(yc + 4.0) + "\" text-anchor=\"end\">" +
         fmt("%.1f", 100.0 * w) + "%</text>\n";
    s += "</g>\n";
  }

  s += "<polygon class=\"pooled\" points=\"" + f2(x(meta.ci95.first)) + "," + f2(pooled_y) + " " +
       f2(x(meta.pooled)) + "," + f2(pooled_y - 8.0) + " " + f2(x(meta.ci95.second)) + "," +
       f2(pooled_y) + " " + f2(x(meta.pooled)) + "," + f2(pooled_y + 8.0) +
       "\" fill=\"#b22222\"/>\n";
  s += "<text x=\"10.00\" y=\"" + f2(pooled_y + 4.0) + "\" font-weight=\"bold\">Overall</text>\n";
  s += "<text x=\"" + f2(text_x) + "\" y=\"" + f2(pooled_y + 4.0) + "\" font-weight=\"bold\">" +
       interval_text(meta.pooled, meta.ci95.first, meta.ci95.second) + "</text>\n";

  s += "<line x1=\"" + f2(style.plot_left) + "\" y1=\"" + f2(axis_y) + "\" x2=\"" +
       f2(style.plot_left + style.plot_width) + "\" y2=\"" + f2(axis_y) + "\" stroke=\"black\"/>\n";
  for (double tick : {d.lo, 0.0, d.hi}) {
    s += "<line x1=\"" + f2(x(tick)) + "\" y1=\"" + f2(axis_y) + "\" x2=\"" + f2(x(tick)) +
         "\" y2=\"" + f2(axis_y + 5.0) + "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + f2(x(tick)) + "\" y=\"" + f2(axis_y + 18.0) +
         "\" text-anchor=\"middle\">" + f2(tick) + "</text>\n";
  }
  s += "<text x=\"" + f2(style.plot_left + style.plot_width / 2.0) + "\" y=\"" +
       f2(axis_y + 32.0) +
       "\" text-anchor=\"middle\">Slope of prosocial rate on ΔS (raw coefficient)</text>\n";
  s += "<text class=\"heterogeneity\" x=\"10.00\" y=\"" + f2(footer_y) + "\">" +
       xml_escape(heterogeneity_line(meta)) + "</text>\n";
  for (std::size_t i = 0; i < excluded.size(); ++i) {
    s += "<text class=\"footnote\" x=\"10.00\" y=\"" + f2(footer_y + 20.0 + 18.0 * i) +
         "\" font-size=\"11\">excluded: " + xml_escape(excluded[i]->study_id) + " (" +
         footnote_text(excluded[i]->exclusion_reason.value_or(ExclusionReason::MissingData)) +
         ")</text>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string forest_text(const MetaResult& meta, std::span<const StudyEffect> effects) {
  const auto rows = included_rows(meta, effects);
  const auto d = domain(meta, rows);
  constexpr int kBar = 41;
  const auto col = [&](double v) {
    const double pos = (v - d.lo) / (d.hi - d.lo) * (kBar - 1);
    return std::clamp(static_cast<int>(std::lround(pos)), 0, kBar - 1);
  };
  std::size_t label_width = 7;  // "Overall"
  for (const auto* e : rows) label_width = std::max(label_width, e->study_id.size());

  const auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  const auto bar = [&](double lo, double est, double hi, char mark) {
    std::string b(kBar, ' ');
    b[col(0.0)] = '|';
    for (int c = col(lo); c <= col(hi); ++c) b[c] = '-';
    b[col(est)] = mark;
    return b;
  };

  std::string out = model_title(meta.model) + "\n\n";
  for (const auto* e : rows) {
    const double lo = e->slope - kCiMultiplier * e->se;
    const double hi = e->slope + kCiMultiplier * e->se;
    out += pad(e->study_id, label_width) + "  " + bar(lo, e->slope, hi, '#') + "  " +
           pad(interval_text(e->slope, lo, hi), 24) + fmt("%5.1f", 100.0 * meta.weights.at(e->study_id)) +
           "%\n";
  }
  out += pad("Overall", label_width) + "  " +
         bar(meta.ci95.first, meta.pooled, meta.ci95.second, '<') + "  " +
         interval_text(meta.pooled, meta.ci95.first, meta.ci95.second) + "\n\n";
  out += heterogeneity_line(meta) + "\n";
  for (const auto& e : effects) {
    if (e.included) continue;
    out += "excluded: " + e.study_id + " (" +
           footnote_text(e.exclusion_reason.value_or(ExclusionReason::MissingData)) + ")\n";
  }
  return out;
}

namespace {

void dump(const nlohmann::json& v, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += inner + nlohmann::json(it.key()).dump() + ": ";
        dump(it.value(), indent + 1, out);
      }
      out += "\n" + pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += inner;
        dump(v[i], indent + 1, out);
      }
      out += "\n" + pad + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? fmt("%.6f", d) : "null";
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string canonical_json(const nlohmann::json& value) {
  std::string out;
  dump(value, 0, out);
  out += '\n';
  return out;
}

nlohmann::json meta_to_json(const MetaResult& m) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [id, w] : m.weights) weights[id] = w;
  return {{"model", to_string(m.model)},
          {"pooled", m.pooled},
          {"se", m.se},
          {"ci95", {m.ci95.first, m.ci95.second}},
          {"z", m.z},
          {"p", m.p},
          {"q", m.q},
          {"df", m.df},
          {"tau2", m.tau2},
          {"i2", m.i2},
          {"weights", weights},
          {"converged", m.converged},
          {"iterations", m.iterations}};
}

nlohmann::json effect_to_json(const StudyEffect& e) {
  nlohmann::json j{{"study_id", e.study_id},
                   {"slope", e.slope},
                   {"intercept", e.intercept},
                   {"se", e.se},
                   {"n_conditions", e.n_conditions},
                   {"included", e.included}};
  j["exclusion_reason"] = e.exclusion_reason ? nlohmann::json(to_string(*e.exclusion_reason))
                                             : nlohmann::json(nullptr);
  return j;
}

std::string results_json(const PipelineOutputs& outputs) {
  nlohmann::json doc;
  doc["dataset_digest"] = outputs.dataset_digest;
  doc["config"] = outputs.config.is_null() ? nlohmann::json::object() : outputs.config;
  doc["effects"] = nlohmann::json::array();
  doc["exclusions"] = nlohmann::json::array();
  for (const auto& e : outputs.effects) {
    doc["effects"].push_back(effect_to_json(e));
    if (!e.included) {
      doc["exclusions"].push_back(
          {{"study_id", e.study_id},
           {"reason", to_string(e.exclusion_reason.value_or(ExclusionReason::MissingData))}});
    }
  }
  if (!outputs.metas.empty()) {
    nlohmann::json meta = nlohmann::json::object();
    for (const auto& m : outputs.metas) {
      auto j = meta_to_json(m);
      j["heterogeneity_line"] = heterogeneity_line(m);
      meta[std::string(to_string(m.model))] = std::move(j);
    }
    doc["meta"] = std::move(meta);
  }
  return canonical_json(doc);
}

nlohmann::json validation_to_json(const ValidationReport& report,
                                  const std::optional<DescriptiveStats>& descriptives) {
  nlohmann::json doc;
  doc["conditions"] = nlohmann::json::array();
  for (const auto& c : report.conditions) {
    doc["conditions"].push_back(
        {{"study_id", c.study_id}, {"condition_id", c.condition_id}, {"code", to_string(c.code)}});
  }
  doc["studies"] = nlohmann::json::array();
  for (const auto& s : report.studies) {
    doc["studies"].push_back({{"study_id", s.study_id},
                              {"code", to_string(s.code)},
                              {"usable_conditions", s.usable_conditions}});
  }
  if (descriptives) {
    const auto col = [](const ColumnStats& c) {
      nlohmann::json j{{"n", c.n}, {"mean", c.mean}};
      j["sd"] = c.sd ? nlohmann::json(*c.sd) : nlohmann::json(nullptr);
      return j;
    };
    doc["descriptives"] = {{"s_zero", col(descriptives->s_zero)},
                           {"s_half", col(descriptives->s_half)},
                           {"s_all", col(descriptives->s_all)},
                           {"sd_divisor", "n-1"},
                           {"missing_data", "available cases per column"}};
  }
  return doc;
}

}  // namespace lingame
