#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace glassbox {

struct FeatureGroup {
  std::string name;
  std::vector<std::size_t> indices;

  bool operator==(const FeatureGroup&) const = default;
};

// Named, human-specified cover of the input features: the unit of routing
// and of explanation. Groups may overlap; together they must cover every
// feature. Construction validates all invariants.
class FeatureGroupSpec {
 public:
  FeatureGroupSpec() = default;
  FeatureGroupSpec(std::size_t num_features, std::vector<FeatureGroup> groups);

  // Contiguous, near-equal blocks named "g0", "g1", ...
  static FeatureGroupSpec contiguous(std::size_t num_features, std::size_t num_groups);
  // One group per feature, named after `feature_names` when given.
  static FeatureGroupSpec singletons(std::size_t num_features,
                                     const std::vector<std::string>& feature_names = {});

  // {"num_features": n, "groups": [{"name": ..., "indices": [...]}, ...]}.
  // Errors are reported as "<source>:<line>: <problem>".
  static FeatureGroupSpec parse(std::string_view text, const std::string& source = "<string>");
  static FeatureGroupSpec load(const std::filesystem::path& path);

  nlohmann::json to_json() const;
  static FeatureGroupSpec from_json(const nlohmann::json& j);

  std::size_t num_features() const { return num_features_; }
  std::size_t num_groups() const { return groups_.size(); }
  const std::vector<FeatureGroup>& groups() const { return groups_; }
  const FeatureGroup& group(std::size_t g) const { return groups_.at(g); }
  std::optional<std::size_t> find(std::string_view name) const;

  bool operator==(const FeatureGroupSpec&) const = default;

 private:
  std::size_t num_features_ = 0;
  std::vector<FeatureGroup> groups_;
};

// Source of a grouping for a dataset. Only human-specified groupings are
// provided; automated discovery would plug in here.
class GroupingStrategy {
 public:
  virtual ~GroupingStrategy() = default;
  virtual FeatureGroupSpec propose(std::size_t num_features) const = 0;
};

class HumanSpecifiedGrouping : public GroupingStrategy {
 public:
  explicit HumanSpecifiedGrouping(FeatureGroupSpec spec) : spec_(std::move(spec)) {}
  FeatureGroupSpec propose(std::size_t num_features) const override;

 private:
  FeatureGroupSpec spec_;
};

}  // namespace glassbox
