#include "glassbox/explanation.hpp"

#include <cmath>

#include "glassbox/error.hpp"

namespace glassbox {

nlohmann::json to_json(const Explanation& e, LatencyField latency) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : e.active_groups) groups.push_back({{"name", g.name}, {"score", g.score}});
  nlohmann::json j;
  j["method"] = e.method;
  j["feature_attributions"] = e.attributions;
  j["active_groups"] = groups;
  j["latency_ms"] = latency == LatencyField::kInclude ? nlohmann::json(e.latency_ms) : nullptr;
  j["seed"] = e.seed ? nlohmann::json(*e.seed) : nullptr;
  j["checkpoint_id"] = e.checkpoint_id;
  j["target_class"] = e.target_class ? nlohmann::json(*e.target_class) : nullptr;
  j["instance_id"] = e.instance_id ? nlohmann::json(*e.instance_id) : nullptr;
  return j;
}

Explanation explanation_from_json(const nlohmann::json& j) {
  Explanation e;
  e.method = j.at("method").get<std::string>();
  e.attributions = j.at("feature_attributions").get<std::vector<double>>();
  for (const auto& g : j.value("active_groups", nlohmann::json::array())) {
    e.active_groups.push_back({g.at("name").get<std::string>(), g.at("score").get<double>()});
  }
  if (j.contains("latency_ms") && !j["latency_ms"].is_null()) e.latency_ms = j["latency_ms"];
  if (j.contains("seed") && !j["seed"].is_null()) e.seed = j["seed"].get<std::uint64_t>();
  e.checkpoint_id = j.value("checkpoint_id", std::string());
  if (j.contains("target_class") && !j["target_class"].is_null()) {
    e.target_class = j["target_class"].get<std::size_t>();
  }
  if (j.contains("instance_id") && !j["instance_id"].is_null()) {
    e.instance_id = j["instance_id"].get<std::size_t>();
  }
  validate(e);
  return e;
}

void validate(const Explanation& e) {
  for (double a : e.attributions) {
    if (!std::isfinite(a)) throw ValidationError("explanation '" + e.method + "' has a non-finite attribution");
  }
  if (!(e.latency_ms >= 0.0)) throw ValidationError("explanation latency must be non-negative");
}

}  // namespace glassbox
