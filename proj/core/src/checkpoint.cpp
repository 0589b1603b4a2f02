#include "glassbox/checkpoint.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "glassbox/error.hpp"

namespace glassbox {
namespace {

constexpr char kMagic[8] = {'G', 'L', 'S', 'B', 'X', 'C', 'K', 'P'};

class Writer {
 public:
  void u32(std::uint32_t v) { little_endian(v, 4); }
  void u64(std::uint64_t v) { little_endian(v, 8); }
  void f64(double v) { little_endian(std::bit_cast<std::uint64_t>(v), 8); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void raw(const char* data, std::size_t n) { bytes_.insert(bytes_.end(), data, data + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void little_endian(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(4)); }
  std::uint64_t u64() { return little_endian(8); }
  double f64() { return std::bit_cast<double>(little_endian(8)); }
  std::string text() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data(), kMagic, sizeof(kMagic)) != 0) {
      throw ValidationError("not a glassbox checkpoint (bad magic)");
    }
    pos_ += sizeof(kMagic);
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw ValidationError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t little_endian(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path.string() + ": " + ec.message());
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::vector<std::uint8_t> serialize(const Checkpoint& checkpoint) {
  if (checkpoint.shapes.size() != checkpoint.parameters.size()) {
    throw ContractError("checkpoint shapes and parameters disagree");
  }
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kCheckpointVersion);
  w.u64(checkpoint.step);
  w.text(checkpoint.architecture.dump());
  w.text(checkpoint.fingerprint.dump());
  w.u32(static_cast<std::uint32_t>(checkpoint.parameters.size()));
  for (std::size_t p = 0; p < checkpoint.parameters.size(); ++p) {
    const Shape& shape = checkpoint.shapes[p];
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.u64(d);
    if (shape_numel(shape) != checkpoint.parameters[p].size()) {
      throw ContractError("checkpoint parameter " + std::to_string(p) + " does not match its shape");
    }
    for (double v : checkpoint.parameters[p]) w.f64(v);
  }
  return w.take();
}

Checkpoint deserialize(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic();
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.step = r.u64();
  try {
    c.architecture = nlohmann::json::parse(r.text());
    c.fingerprint = nlohmann::json::parse(r.text());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  for (std::uint32_t p = 0; p < count; ++p) {
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = r.f64();
    c.shapes.push_back(std::move(shape));
    c.parameters.push_back(std::move(values));
  }
  if (!r.at_end()) throw ValidationError("checkpoint has trailing bytes");
  c.id = sha256_hex(bytes);
  return c;
}

Checkpoint make_checkpoint(const Model& model, std::uint64_t step, nlohmann::json fingerprint) {
  Checkpoint c;
  c.step = step;
  c.architecture = model.architecture();
  c.fingerprint = std::move(fingerprint);
  for (const auto& p : model.parameters()) {
    c.shapes.push_back(p.shape());
    c.parameters.emplace_back(p.values().begin(), p.values().end());
  }
  c.id = sha256_hex(serialize(c));
  return c;
}

std::unique_ptr<Model> restore(const Checkpoint& checkpoint) {
  Rng scratch(0);
  auto model = build_model(checkpoint.architecture, scratch);
  load_parameters(*model, checkpoint.parameters);
  return model;
}

Checkpoint read_checkpoint_file(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  try {
    return deserialize(bytes);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_checkpoint_file(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  write_bytes(path, serialize(checkpoint));
}

CheckpointStore::CheckpointStore(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create checkpoint store " + root_.string() + ": " + ec.message());
}

std::filesystem::path CheckpointStore::path_for(const std::string& id) const {
  return root_ / (id + ".ckpt");
}

Checkpoint CheckpointStore::snapshot(const Model& model, std::uint64_t step,
                                     const nlohmann::json& fingerprint) {
  Checkpoint c = make_checkpoint(model, step, fingerprint);
  put(c);
  return c;
}

void CheckpointStore::put(const Checkpoint& checkpoint) {
  const auto bytes = serialize(checkpoint);
  const std::string id = sha256_hex(bytes);
  if (!std::filesystem::exists(path_for(id))) write_bytes(path_for(id), bytes);
  auto entries = index();
  const CheckpointIndexEntry entry{checkpoint.step, id};
  if (std::find(entries.begin(), entries.end(), entry) == entries.end()) {
    entries.push_back(entry);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
      return a.step != b.step ? a.step < b.step : a.id < b.id;
    });
    write_index(entries);
  }
}

Checkpoint CheckpointStore::load(const std::string& id) const {
  Checkpoint c = read_checkpoint_file(path_for(id));
  if (c.id != id) {
    throw ValidationError("checkpoint " + path_for(id).string() + " content hash " + c.id +
                          " does not match its name");
  }
  return c;
}

std::vector<CheckpointIndexEntry> CheckpointStore::index() const {
  const auto path = root_ / "index.json";
  std::vector<CheckpointIndexEntry> entries;
  if (!std::filesystem::exists(path)) return entries;
  std::ifstream in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  for (const auto& e : j.at("checkpoints")) {
    entries.push_back({e.at("step").get<std::uint64_t>(), e.at("id").get<std::string>()});
  }
  return entries;
}

void CheckpointStore::write_index(const std::vector<CheckpointIndexEntry>& entries) const {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries) list.push_back({{"step", e.step}, {"id", e.id}});
  const std::string text = nlohmann::json{{"checkpoints", list}}.dump(2) + "\n";
  write_bytes(root_ / "index.json",
              std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace glassbox
