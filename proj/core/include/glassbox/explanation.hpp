#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace glassbox {

struct GroupActivation {
  std::string name;
  double score = 0.0;

  bool operator==(const GroupActivation&) const = default;
};

// Per-feature attribution vector shared by every explainer and metric.
struct Explanation {
  std::string method;
  std::vector<double> attributions;
  std::optional<std::size_t> target_class;  // empty for global explanations
  double latency_ms = 0.0;
  std::optional<std::uint64_t> seed;
  std::vector<GroupActivation> active_groups;  // intrinsic explanations only
  std::string checkpoint_id;
  std::optional<std::size_t> instance_id;  // empty for global explanations

  std::size_t num_features() const { return attributions.size(); }
};

enum class LatencyField {
  kInclude,
  // "latency_ms": null. The remaining fields are a pure function of the
  // model, the input and the seed, so the serialized bytes are reproducible.
  kOmit,
};

nlohmann::json to_json(const Explanation& e, LatencyField latency = LatencyField::kInclude);
Explanation explanation_from_json(const nlohmann::json& j);

// Throws ValidationError if attributions are non-finite.
void validate(const Explanation& e);

}  // namespace glassbox
