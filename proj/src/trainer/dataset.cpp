#include <algorithm>
#include <exception>

#include "re2re/error.hpp"
#include "re2re/trainer.hpp"
#include "re2re/wav.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace re2re {

bool Dataset::labeled() const {
  return !items.empty() &&
         std::all_of(items.begin(), items.end(), [](const Utterance& u) { return u.speech && u.noise; });
}

Dataset load_dataset(const Manifest& manifest, Split split, bool require_labels, std::size_t workers) {
  std::vector<ManifestRecord> records = manifest.split(split);
  require(!records.empty(), "manifest has no '" + std::string(split_name(split)) + "' records");
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& r : records) {
    validate_record(r);
    if (require_labels && !r.labeled())
      throw ValidationError("record '" + r.id + "' has no speech/noise components; labeled data required");
  }

  Dataset data;
  data.items.resize(records.size());
  std::vector<std::uint32_t> rates(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  const int threads = static_cast<int>(std::max<std::size_t>(workers, 1));
  // Each worker fills its own slot; the output order is fixed by the sort above.
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::int64_t job = 0; job < static_cast<std::int64_t>(records.size()); ++job) {
    const auto i = static_cast<std::size_t>(job);
    try {
      const ManifestRecord& r = records[i];
      Utterance& u = data.items[i];
      u.id = r.id;
      u.noise_kind = r.noise_kind;
      u.snr_db = r.snr_db;
      WavData mix = read_wav(manifest.root / r.mixture);
      rates[i] = mix.sample_rate;
      u.mixture = std::move(mix.samples);
      if (r.labeled()) {
        WavData s = read_wav(manifest.root / *r.speech);
        WavData n = read_wav(manifest.root / *r.noise);
        if (s.samples.size() != u.mixture.size() || n.samples.size() != u.mixture.size())
          throw ValidationError("record '" + r.id + "': component lengths differ from the mixture");
        u.speech = std::move(s.samples);
        u.noise = std::move(n.samples);
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  data.sample_rate = rates.front();
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    require(rates[i] == rates.front(), "record '" + data.items[i].id + "' has a different sample rate");
    require(data.items[i].mixture.size() == data.length(),
            "record '" + data.items[i].id + "' has a different chunk length");
  }
  return data;
}

SignalBatch gather(const Dataset& data, const std::vector<std::size_t>& indices, Role role) {
  require(!indices.empty(), "gather: empty batch");
  const std::size_t len = data.length();
  std::vector<double> samples;
  samples.reserve(indices.size() * len);
  for (std::size_t i : indices) {
    const Utterance& u = data.items.at(i);
    const std::vector<double>* src = &u.mixture;
    if (role == Role::Speech) src = u.speech ? &*u.speech : nullptr;
    if (role == Role::Noise) src = u.noise ? &*u.noise : nullptr;
    require(src != nullptr, "gather: utterance '" + u.id + "' has no " + std::string(role_name(role)));
    samples.insert(samples.end(), src->begin(), src->end());
  }
  return SignalBatch(indices.size(), len, std::move(samples), role, data.sample_rate);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size,
                                                    std::size_t min_batch, Rng& rng) {
  require(count >= 1 && batch_size >= 1, "epoch_batches: empty dataset or batch");
  const Permutation order = sample_permutation(count, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    if (end - start < min_batch) break;
    batches.emplace_back(order.map().begin() + static_cast<std::ptrdiff_t>(start),
                         order.map().begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace re2re
