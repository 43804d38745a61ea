#include "planlab/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace planlab {

namespace {

const char* const kSubsets[] = {"val_easy", "val_hard"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json subset_json(const SubsetMetrics& m) {
  return {{"ade_pct", m.ade_pct},
          {"fde_pct", m.fde_pct},
          {"samples", m.samples},
          {"decode_failures", m.decode_failures},
          {"coverage", m.coverage()}};
}

nlohmann::json planning_row(const NamedPlanning& p) {
  nlohmann::json row = planning_to_json(p.metrics);
  row["model"] = p.name;
  return row;
}

const NamedPlanning* find(const std::vector<NamedPlanning>& rows, const std::string& name) {
  for (const auto& r : rows) {
    if (r.name == name) return &r;
  }
  return nullptr;
}

nlohmann::json delta_json(const PlanningMetrics& base, const PlanningMetrics& cand) {
  nlohmann::json out = nlohmann::json::object();
  for (const char* subset : kSubsets) {
    const auto b = base.find(subset);
    const auto c = cand.find(subset);
    if (b == base.end() || c == cand.end()) continue;
    out[subset] = {{"ade", format_delta(b->second.ade_pct, c->second.ade_pct)},
                   {"fde", format_delta(b->second.fde_pct, c->second.fde_pct)}};
  }
  return out;
}

std::string cell(const nlohmann::json& row, const char* subset, const char* key) {
  if (!row.contains(subset) || !row[subset].contains(key)) return "n/a";
  const auto& v = row[subset][key];
  if (v.is_string()) return v.get<std::string>();
  if (row[subset].value("samples", 0) == row[subset].value("decode_failures", 0)) return "n/a";
  return fixed(v.get<double>());
}

void planning_table(std::ostringstream& md, const nlohmann::json& rows, const std::string& label,
                    const nlohmann::json* delta_rows = nullptr) {
  md << "| " << label << " | Easy ADE | Easy FDE | Hard ADE | Hard FDE | Coverage |\n";
  md << "|---|---:|---:|---:|---:|---:|\n";
  for (const auto& row : rows) {
    std::string coverage;
    for (const char* subset : kSubsets) {
      if (!row.contains(subset)) continue;
      if (!coverage.empty()) coverage += " / ";
      coverage += fixed(100.0 * row[subset]["coverage"].get<double>(), 1) + "%";
    }
    md << "| " << row.value("model", row.value("ratio", std::string())) << " | "
       << cell(row, "val_easy", "ade_pct") << " | " << cell(row, "val_easy", "fde_pct") << " | "
       << cell(row, "val_hard", "ade_pct") << " | " << cell(row, "val_hard", "fde_pct") << " | "
       << (coverage.empty() ? "n/a" : coverage) << " |\n";
    if (delta_rows && row.contains("delta")) {
      const auto& d = row["delta"];
      md << "| &nbsp;&nbsp;Δ | " << cell(d, "val_easy", "ade") << " | "
         << cell(d, "val_easy", "fde") << " | " << cell(d, "val_hard", "ade") << " | "
         << cell(d, "val_hard", "fde") << " | |\n";
    }
  }
}

}  // namespace

std::string format_delta(double baseline, double candidate) {
  if (baseline == 0.0 || !std::isfinite(baseline) || !std::isfinite(candidate)) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * (candidate - baseline) / baseline);
  return buf;
}

nlohmann::json planning_to_json(const PlanningMetrics& m) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [tag, metrics] : m) out[tag] = subset_json(metrics);
  return out;
}

PlanningMetrics planning_from_json(const nlohmann::json& j) {
  PlanningMetrics out;
  for (const auto& [tag, v] : j.items()) {
    if (!v.is_object() || !v.contains("ade_pct")) continue;
    SubsetMetrics m;
    m.ade_pct = v.at("ade_pct").get<double>();
    m.fde_pct = v.at("fde_pct").get<double>();
    m.samples = v.at("samples").get<std::size_t>();
    m.decode_failures = v.at("decode_failures").get<std::size_t>();
    out[tag] = m;
  }
  return out;
}

nlohmann::json ood_to_json(const OodResult& r, bool per_scene) {
  nlohmann::json out = {{"fail_rate", r.metrics.fail_rate},
                        {"collision_count", r.metrics.collision_count},
                        {"penetration", r.metrics.penetration},
                        {"scenes", r.scenes},
                        {"boxes", r.boxes},
                        {"decode_failures", r.decode_failures}};
  if (per_scene) {
    auto& rows = out["per_scene"] = nlohmann::json::array();
    for (const auto& s : r.per_scene) {
      rows.push_back({{"id", s.id},
                      {"boxes_hit", s.boxes_hit},
                      {"penetration", s.penetration},
                      {"decode_failed", s.decode_failed}});
    }
  }
  return out;
}

OodResult ood_from_json(const nlohmann::json& j) {
  OodResult r;
  r.metrics = {j.at("fail_rate").get<double>(), j.at("collision_count").get<double>(),
               j.at("penetration").get<double>()};
  r.scenes = j.at("scenes").get<std::size_t>();
  r.boxes = j.value("boxes", std::size_t{0});
  r.decode_failures = j.value("decode_failures", std::size_t{0});
  if (j.contains("per_scene")) {
    for (const auto& s : j.at("per_scene")) {
      r.per_scene.push_back({s.at("id").get<std::string>(), s.at("boxes_hit").get<int>(),
                             s.at("penetration").get<double>(),
                             s.at("decode_failed").get<bool>()});
    }
  }
  return r;
}

nlohmann::json build_report(const ReportInputs& in) {
  nlohmann::json doc;
  const NamedPlanning* baseline = nullptr;
  if (in.delta) baseline = find(in.planning, in.delta->first);

  auto& planning = doc["planning"] = nlohmann::json::array();
  for (const auto& p : in.planning) {
    auto row = planning_row(p);
    if (baseline && in.delta && p.name == in.delta->second) {
      row["delta"] = delta_json(baseline->metrics, p.metrics);
      row["delta_vs"] = baseline->name;
    }
    planning.push_back(std::move(row));
  }

  auto& ood = doc["ood"] = nlohmann::json::array();
  for (const auto& o : in.ood) {
    auto row = ood_to_json(o.result);
    row["model"] = o.name;
    ood.push_back(std::move(row));
  }

  if (in.ood.size() >= 2) {
    std::vector<SafetyMetrics> metrics;
    for (const auto& o : in.ood) metrics.push_back(o.result.metrics);
    const auto scores = safety_scores(metrics, in.schemes);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < in.ood.size(); ++i) {
      nlohmann::json s = nlohmann::json::object();
      for (std::size_t k = 0; k < in.schemes.size(); ++k) s[in.schemes[k].name] = scores[i][k];
      rows.push_back({{"model", in.ood[i].name}, {"scores", std::move(s)}});
    }
    nlohmann::json schemes = nlohmann::json::array();
    for (const auto& w : in.schemes) {
      schemes.push_back({{"name", w.name},
                         {"w_fail", w.w_fail},
                         {"w_collision", w.w_collision},
                         {"w_penetration", w.w_penetration}});
    }
    doc["safety_scores"] = {{"schemes", std::move(schemes)}, {"rows", std::move(rows)}};
  } else {
    doc["safety_scores"] = nullptr;
  }

  auto& ratios = doc["ratio_ablation"] = nlohmann::json::array();
  for (const auto& p : in.ratio_ablation) {
    auto row = planning_to_json(p.metrics);
    row["ratio"] = p.name;
    if (baseline) {
      row["delta"] = delta_json(baseline->metrics, p.metrics);
      row["delta_vs"] = baseline->name;
    }
    ratios.push_back(std::move(row));
  }

  auto& reasoning = doc["reasoning_ablation"] = nlohmann::json::array();
  for (const auto& p : in.reasoning_ablation) reasoning.push_back(planning_row(p));

  doc["gaps"] = in.gaps;
  return doc;
}

std::string render_markdown(const nlohmann::json& doc) {
  std::ostringstream md;
  md << "# Planning report\n\n";
  md << "ADE and FDE are percentages of the image size (x by width, y by height). "
        "Coverage is the share of responses that parsed.\n\n";

  md << "## In-domain planning\n\n";
  if (doc["planning"].empty()) {
    md << "_No planning results._\n\n";
  } else {
    planning_table(md, doc["planning"], "Model", &doc["planning"]);
    md << '\n';
  }

  md << "## Out-of-distribution safety\n\n";
  if (doc["ood"].empty()) {
    md << "_No OOD scenes evaluated._\n\n";
  } else {
    md << "| Model | Fail rate | Collisions / traj | Penetration px / traj | Scenes | Decode "
          "failures |\n";
    md << "|---|---:|---:|---:|---:|---:|\n";
    for (const auto& row : doc["ood"]) {
      md << "| " << row["model"].get<std::string>() << " | "
         << fixed(row["fail_rate"].get<double>(), 3) << " | "
         << fixed(row["collision_count"].get<double>(), 3) << " | "
         << fixed(row["penetration"].get<double>(), 2) << " | " << row["scenes"].get<std::size_t>()
         << " | " << row["decode_failures"].get<std::size_t>() << " |\n";
    }
    md << '\n';
    if (doc["safety_scores"].is_null()) {
      md << "_Safety scores need at least two models._\n\n";
    } else {
      const auto& ss = doc["safety_scores"];
      md << "| Model |";
      for (const auto& w : ss["schemes"]) md << ' ' << w["name"].get<std::string>() << " |";
      md << "\n|---|";
      for (std::size_t k = 0; k < ss["schemes"].size(); ++k) md << "---:|";
      md << '\n';
      for (const auto& row : ss["rows"]) {
        md << "| " << row["model"].get<std::string>() << " |";
        for (const auto& w : ss["schemes"]) {
          md << ' ' << fixed(row["scores"][w["name"].get<std::string>()].get<double>(), 3)
             << " |";
        }
        md << '\n';
      }
      md << '\n';
    }
  }

  if (!doc["ratio_ablation"].empty()) {
    md << "## Easy:hard ratio of the RFT data\n\n";
    planning_table(md, doc["ratio_ablation"], "Ratio", &doc["ratio_ablation"]);
    md << '\n';
  }
  if (!doc["reasoning_ablation"].empty()) {
    md << "## Reasoning ablation\n\n";
    planning_table(md, doc["reasoning_ablation"], "Configuration");
    md << '\n';
  }
  if (!doc["gaps"].empty()) {
    md << "## Missing inputs\n\n";
    for (const auto& g : doc["gaps"]) md << "- " << g.get<std::string>() << '\n';
    md << '\n';
  }
  return md.str();
}

}  // namespace planlab
