#include "re2re/remixer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "re2re/error.hpp"

namespace re2re {

Permutation::Permutation(std::vector<std::size_t> map, std::uint64_t stream) : map_(std::move(map)), stream_(stream) {
  require(!map_.empty(), "permutation must cover at least one row");
  std::vector<bool> seen(map_.size(), false);
  for (std::size_t v : map_) {
    require(v < map_.size() && !seen[v], "permutation map is not a bijection");
    seen[v] = true;
  }
}

Permutation Permutation::identity(std::size_t size) {
  std::vector<std::size_t> map(size);
  std::iota(map.begin(), map.end(), std::size_t{0});
  return Permutation(std::move(map));
}

std::string_view strategy_name(PairStrategy s) {
  return s == PairStrategy::Discordant ? "discordant" : "independent";
}

PairStrategy strategy_from_name(std::string_view name) {
  if (name == "discordant") return PairStrategy::Discordant;
  if (name == "independent") return PairStrategy::Independent;
  throw ValidationError("unknown permutation strategy '" + std::string(name) + "'");
}

bool PermutationPair::discordant() const {
  if (p.size() != q.size()) return false;
  for (std::size_t b = 0; b < p.size(); ++b)
    if (p[b] == q[b]) return false;
  return true;
}

Permutation sample_permutation(std::size_t batch, Rng& rng) {
  require(batch >= 1, "sample_permutation: batch size must be at least 1");
  const std::uint64_t stream = rng();
  std::vector<std::size_t> map(batch);
  std::iota(map.begin(), map.end(), std::size_t{0});
  for (std::size_t i = batch; i-- > 1;) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(map[i], map[pick(rng)]);
  }
  return Permutation(std::move(map), stream);
}

Permutation sample_discordant(const Permutation& p, Rng& rng) {
  require(p.size() >= 2, "sample_discordant: no discordant permutation exists for fewer than 2 rows");
  for (;;) {
    Permutation q = sample_permutation(p.size(), rng);
    bool ok = true;
    for (std::size_t b = 0; b < p.size() && ok; ++b) ok = q[b] != p[b];
    if (ok) return q;
  }
}

PermutationPair sample_pair(std::size_t batch, Rng& rng, PairStrategy strategy) {
  require(batch >= 2, "sample_pair: remixing needs at least 2 rows");
  Permutation p = sample_permutation(batch, rng);
  Permutation q = strategy == PairStrategy::Discordant ? sample_discordant(p, rng) : sample_permutation(batch, rng);
  return {std::move(p), std::move(q)};
}

SignalBatch apply(const Permutation& perm, const SignalBatch& batch) {
  require(perm.size() == batch.rows(), "apply: permutation length " + std::to_string(perm.size()) +
                                           " does not match batch of " + std::to_string(batch.rows()));
  SignalBatch out(batch.rows(), batch.length(), batch.role(), batch.sample_rate());
  for (std::size_t b = 0; b < batch.rows(); ++b) {
    const auto src = batch.row(perm[b]);
    std::copy(src.begin(), src.end(), out.row(b).begin());
  }
  return out;
}

SignalBatch bootstrap(const SignalBatch& teacher_speech, const SignalBatch& teacher_noise, const Permutation& perm) {
  require(teacher_speech.same_shape(teacher_noise), "bootstrap: teacher speech and noise shapes differ");
  return add(teacher_speech, apply(perm, teacher_noise), Role::BootstrapFirst);
}

std::pair<SignalBatch, SignalBatch> bootstrap_pair(const SignalBatch& teacher_speech,
                                                   const SignalBatch& teacher_noise, const PermutationPair& pair) {
  require(teacher_speech.rows() >= 2, "bootstrap_pair: remixing needs at least 2 rows");
  SignalBatch first = bootstrap(teacher_speech, teacher_noise, pair.p);
  SignalBatch second = add(teacher_speech, apply(pair.q, teacher_noise), Role::BootstrapSecond);
  return {std::move(first), std::move(second)};
}

}  // namespace re2re
