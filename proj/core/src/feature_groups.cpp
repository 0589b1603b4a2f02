#include "glassbox/feature_groups.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "glassbox/error.hpp"
#include "glassbox/json_locate.hpp"

namespace glassbox {
namespace {

// Validation failure with an optional JSON pointer naming the offending value.
struct Violation {
  std::string pointer;
  std::string message;
};

std::optional<Violation> check(std::size_t num_features, const std::vector<FeatureGroup>& groups) {
  if (num_features == 0) return Violation{"/num_features", "num_features must be positive"};
  if (groups.empty()) return Violation{"/groups", "at least one group is required"};
  std::set<std::string> names;
  std::vector<bool> covered(num_features, false);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::string at = "/groups/" + std::to_string(g);
    const auto& group = groups[g];
    if (group.name.empty()) return Violation{at + "/name", "group name must be non-empty"};
    if (!names.insert(group.name).second) {
      return Violation{at + "/name", "duplicate group name '" + group.name + "'"};
    }
    if (group.indices.empty()) {
      return Violation{at + "/indices", "group '" + group.name + "' has no features"};
    }
    std::set<std::size_t> seen;
    for (std::size_t k = 0; k < group.indices.size(); ++k) {
      const std::size_t idx = group.indices[k];
      if (idx >= num_features) {
        return Violation{at + "/indices/" + std::to_string(k),
                         "group '" + group.name + "' index " + std::to_string(idx) +
                             " out of range [0, " + std::to_string(num_features) + ")"};
      }
      if (!seen.insert(idx).second) {
        return Violation{at + "/indices/" + std::to_string(k),
                         "group '" + group.name + "' repeats index " + std::to_string(idx)};
      }
      covered[idx] = true;
    }
  }
  for (std::size_t f = 0; f < num_features; ++f) {
    if (!covered[f]) {
      return Violation{"/groups", "feature " + std::to_string(f) + " is not covered by any group"};
    }
  }
  return std::nullopt;
}

}  // namespace

FeatureGroupSpec::FeatureGroupSpec(std::size_t num_features, std::vector<FeatureGroup> groups)
    : num_features_(num_features), groups_(std::move(groups)) {
  if (auto v = check(num_features_, groups_)) throw ValidationError(v->message);
}

FeatureGroupSpec FeatureGroupSpec::contiguous(std::size_t num_features, std::size_t num_groups) {
  if (num_groups == 0 || num_groups > num_features) {
    throw ParameterError("contiguous grouping needs 1 <= groups <= features");
  }
  std::vector<FeatureGroup> groups;
  std::size_t start = 0;
  for (std::size_t g = 0; g < num_groups; ++g) {
    const std::size_t size = num_features / num_groups + (g < num_features % num_groups ? 1 : 0);
    FeatureGroup group{"g" + std::to_string(g), {}};
    for (std::size_t i = 0; i < size; ++i) group.indices.push_back(start + i);
    start += size;
    groups.push_back(std::move(group));
  }
  return FeatureGroupSpec(num_features, std::move(groups));
}

FeatureGroupSpec FeatureGroupSpec::singletons(std::size_t num_features,
                                              const std::vector<std::string>& feature_names) {
  std::vector<FeatureGroup> groups;
  for (std::size_t f = 0; f < num_features; ++f) {
    std::string name = f < feature_names.size() ? feature_names[f] : "x" + std::to_string(f);
    groups.push_back({std::move(name), {f}});
  }
  return FeatureGroupSpec(num_features, std::move(groups));
}

FeatureGroupSpec FeatureGroupSpec::parse(std::string_view text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // nlohmann's message already carries "line L, column C".
    throw ValidationError(source + ": " + e.what());
  }
  const auto lines = locate_json_lines(text);
  auto fail = [&](const std::string& pointer, const std::string& message) -> ValidationError {
    std::string p = pointer;
    while (!lines.contains(p) && !p.empty()) p = p.substr(0, p.rfind('/'));
    const int line = lines.contains(p) ? lines.at(p) : 1;
    return ValidationError(source + ":" + std::to_string(line) + ": " + message);
  };

  if (!j.is_object()) throw fail("", "expected a JSON object");
  if (!j.contains("num_features") || !j["num_features"].is_number_unsigned()) {
    throw fail("/num_features", "\"num_features\" must be a non-negative integer");
  }
  if (!j.contains("groups") || !j["groups"].is_array()) {
    throw fail("/groups", "\"groups\" must be an array");
  }
  std::vector<FeatureGroup> groups;
  for (std::size_t g = 0; g < j["groups"].size(); ++g) {
    const auto& entry = j["groups"][g];
    const std::string at = "/groups/" + std::to_string(g);
    if (!entry.is_object()) throw fail(at, "group entry must be an object");
    if (!entry.contains("name") || !entry["name"].is_string()) {
      throw fail(at, "group needs a string \"name\"");
    }
    if (!entry.contains("indices") || !entry["indices"].is_array()) {
      throw fail(at, "group needs an \"indices\" array");
    }
    FeatureGroup group{entry["name"].get<std::string>(), {}};
    for (std::size_t k = 0; k < entry["indices"].size(); ++k) {
      const auto& idx = entry["indices"][k];
      if (!idx.is_number_unsigned()) {
        throw fail(at + "/indices/" + std::to_string(k), "index must be a non-negative integer");
      }
      group.indices.push_back(idx.get<std::size_t>());
    }
    groups.push_back(std::move(group));
  }
  const auto num_features = j["num_features"].get<std::size_t>();
  if (auto v = check(num_features, groups)) throw fail(v->pointer, v->message);
  return FeatureGroupSpec(num_features, std::move(groups));
}

FeatureGroupSpec FeatureGroupSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature-group file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

nlohmann::json FeatureGroupSpec::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : groups_) groups.push_back({{"name", g.name}, {"indices", g.indices}});
  return {{"num_features", num_features_}, {"groups", groups}};
}

FeatureGroupSpec FeatureGroupSpec::from_json(const nlohmann::json& j) {
  return parse(j.dump(), "<embedded>");
}

std::optional<std::size_t> FeatureGroupSpec::find(std::string_view name) const {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].name == name) return g;
  }
  return std::nullopt;
}

FeatureGroupSpec HumanSpecifiedGrouping::propose(std::size_t num_features) const {
  if (spec_.num_features() != num_features) {
    throw DimensionError("feature grouping covers " + std::to_string(spec_.num_features()) +
                         " features, dataset has " + std::to_string(num_features));
  }
  return spec_;
}

}  // namespace glassbox
