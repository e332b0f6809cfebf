#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "re2re/rng.hpp"
#include "re2re/signal.hpp"

namespace re2re {

/// Row permutation of a batch: output row b takes input row map[b].
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> map, std::uint64_t stream = 0);

  static Permutation identity(std::size_t size);

  std::size_t size() const { return map_.size(); }
  std::size_t operator[](std::size_t b) const { return map_[b]; }
  const std::vector<std::size_t>& map() const { return map_; }
  std::uint64_t stream() const { return stream_; }

  bool operator==(const Permutation& other) const { return map_ == other.map_; }

 private:
  std::vector<std::size_t> map_;
  std::uint64_t stream_ = 0;
};

/// How the second permutation Q is drawn relative to P.
enum class PairStrategy {
  Discordant,   // Q[b] != P[b] for every row
  Independent,  // Q drawn like P, no constraint
};

std::string_view strategy_name(PairStrategy s);
PairStrategy strategy_from_name(std::string_view name);

struct PermutationPair {
  Permutation p;
  Permutation q;

  bool discordant() const;
};

/// Uniform over all B! permutations (Fisher-Yates).
Permutation sample_permutation(std::size_t batch, Rng& rng);

/// Uniform over permutations that disagree with `p` on every row, by rejection.
Permutation sample_discordant(const Permutation& p, Rng& rng);

PermutationPair sample_pair(std::size_t batch, Rng& rng, PairStrategy strategy = PairStrategy::Discordant);

SignalBatch apply(const Permutation& perm, const SignalBatch& batch);

/// x~ = s~ + P n~
SignalBatch bootstrap(const SignalBatch& teacher_speech, const SignalBatch& teacher_noise, const Permutation& perm);

/// (x~, x-) = (s~ + P n~, s~ + Q n~)
std::pair<SignalBatch, SignalBatch> bootstrap_pair(const SignalBatch& teacher_speech,
                                                   const SignalBatch& teacher_noise, const PermutationPair& pair);

}  // namespace re2re
