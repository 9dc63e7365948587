#include "camel/cli/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "camel/cli/config.hpp"

namespace camel::cli {

namespace {

constexpr char kMagic[4] = {'C', 'A', 'M', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string bytes(std::size_t n) {
    need(n);
    auto s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw std::runtime_error("checkpoint is truncated at byte " + std::to_string(pos_));
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

void put_entry(std::string& out, const std::string& name, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (double v : t.data()) put_f64(out, v);
}

}  // namespace

std::uint32_t config_hash(const EncoderConfig& cfg) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : cfg.shape_signature()) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.params.size() + 1));
  put_entry(out, kConfigHashEntry, Tensor::scalar(static_cast<double>(ckpt.config_hash)));
  for (const auto& [name, t] : ckpt.params.entries()) put_entry(out, name, t);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.bytes(4) != std::string(kMagic, 4)) throw std::runtime_error("not a checkpoint (bad magic)");
  if (auto v = r.u32(); v != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(v));
  }
  const auto count = r.u32();
  Checkpoint ckpt;
  bool have_hash = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = r.bytes(r.u32());
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = r.f64();
    if (name == kConfigHashEntry) {
      if (values.size() != 1) throw std::runtime_error("checkpoint config hash entry is malformed");
      ckpt.config_hash = static_cast<std::uint32_t>(values[0]);
      have_hash = true;
    } else {
      ckpt.params.add(name, Tensor(shape, std::move(values)));
    }
  }
  if (!r.done()) throw std::runtime_error("checkpoint has trailing bytes");
  if (!have_hash) throw std::runtime_error("checkpoint has no config hash entry");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  const auto bytes = encode_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_checkpoint(ss.str());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

ParamVector load_params_for(const std::filesystem::path& path, const EncoderConfig& cfg) {
  auto ckpt = load_checkpoint(path);
  Rng rng(0);
  const ParamVector expected = init_params(cfg, rng);
  if (auto diff = expected.incompatibility(ckpt.params); !diff.empty()) {
    throw ConfigError("checkpoint " + path.string() + " does not match the configured model: " + diff);
  }
  if (ckpt.config_hash != config_hash(cfg)) {
    throw ConfigError("checkpoint " + path.string() + " was written for a different model config (hash " +
                      std::to_string(ckpt.config_hash) + ", expected " + std::to_string(config_hash(cfg)) + ")");
  }
  return std::move(ckpt.params);
}

}  // namespace camel::cli
