#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "camel/model.hpp"
#include "camel/param_vector.hpp"

namespace camel::cli {

inline constexpr std::uint32_t kCheckpointVersion = 1;
/// Reserved entry carrying the config hash alongside the parameters.
inline constexpr const char* kConfigHashEntry = "__config_hash";

struct Checkpoint {
  ParamVector params;
  std::uint32_t config_hash = 0;
};

/// FNV-1a over the encoder's shape signature.
std::uint32_t config_hash(const EncoderConfig& cfg);

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and checks against `cfg`; a mismatch names the offending shapes.
ParamVector load_params_for(const std::filesystem::path& path, const EncoderConfig& cfg);

}  // namespace camel::cli
