#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glassbox/model.hpp"
#include "json.hpp"

namespace glassbox {

// Serialized model snapshot. On disk:
//   "GLSBXCKP" | u32 version | u64 step
//   | u32 len | architecture JSON | u32 len | fingerprint JSON
//   | u32 tensor count | per tensor: u32 ndim, u64 dims..., f64 values...
// All integers and floats little-endian. The id is the SHA-256 of those bytes.
struct Checkpoint {
  std::string id;
  std::uint64_t step = 0;
  nlohmann::json architecture;
  nlohmann::json fingerprint;  // run configuration, tool version, standardization
  std::vector<Shape> shapes;
  std::vector<std::vector<double>> parameters;
};

constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint);
// Parses bytes and assigns the content id. Throws ValidationError on
// malformed input.
Checkpoint deserialize(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

Checkpoint make_checkpoint(const Model& model, std::uint64_t step,
                           nlohmann::json fingerprint = nlohmann::json::object());
std::unique_ptr<Model> restore(const Checkpoint& checkpoint);

Checkpoint read_checkpoint_file(const std::filesystem::path& path);
void write_checkpoint_file(const Checkpoint& checkpoint, const std::filesystem::path& path);

struct CheckpointIndexEntry {
  std::uint64_t step = 0;
  std::string id;
  bool operator==(const CheckpointIndexEntry&) const = default;
};

// Content-addressed checkpoint directory: <root>/<id>.ckpt plus
// <root>/index.json listing (step, id). Single writer, any number of readers.
class CheckpointStore {
 public:
  explicit CheckpointStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  // Persists and indexes; idempotent for identical content.
  Checkpoint snapshot(const Model& model, std::uint64_t step,
                      const nlohmann::json& fingerprint = nlohmann::json::object());
  void put(const Checkpoint& checkpoint);
  Checkpoint load(const std::string& id) const;
  std::filesystem::path path_for(const std::string& id) const;
  std::vector<CheckpointIndexEntry> index() const;

 private:
  void write_index(const std::vector<CheckpointIndexEntry>& entries) const;

  std::filesystem::path root_;
};

}  // namespace glassbox
