#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "re2re/separator.hpp"

namespace re2re {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;
  std::uint64_t steps = 0;

  bool operator==(const AdamMoments&) const = default;
};

/// Model snapshot on disk: "RE2RECKP", u32 version, u64 header length, JSON
/// header (config, RNG state, label, sizes), then little-endian IEEE doubles
/// for the parameters and, when present, the optimizer moments.
struct Checkpoint {
  ParamVector params;
  std::string rng_state;
  std::string label;
  std::optional<AdamMoments> optimizer;

  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace re2re
