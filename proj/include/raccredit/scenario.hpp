#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/rng.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

struct SamplingOptions {
  // Above this many thermal flags the batch regenerates draws from the
  // keyed streams on demand instead of storing them.
  std::uint64_t materialize_limit = 1'000'000'000ULL;
};

/// n sampled availability realizations A[g][t] per scenario. Thermal units are
/// independent per-hour Bernoulli draws; profile units replicate their profile;
/// perfect units are 1 everywhere. Immutable after construction.
class ScenarioBatch {
public:
  std::size_t size() const { return n_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t generator_count() const { return ids_.size(); }
  std::size_t thermal_count() const { return thermal_gens_.size(); }
  const RngPolicy& rng_policy() const { return policy_; }
  const std::vector<std::string>& resource_ids() const { return ids_; }
  bool materialized() const { return !flags_.empty() || thermal_gens_.empty() || n_ == 0; }

  /// True when the batch is an enumeration of states with exact probabilities
  /// rather than a Monte Carlo sample.
  bool exact_weights() const { return !weights_.empty(); }
  const std::vector<double>& weights() const { return weights_; }

  /// Availability fraction of generator g (system order) in hour t of scenario i.
  double availability(std::size_t i, std::size_t g, std::size_t t) const {
    switch (kinds_[g]) {
      case GeneratorKind::perfect: return 1.0;
      case GeneratorKind::profile: return profile_values_[g][t];
      case GeneratorKind::thermal: return thermal_flag(i, thermal_slot_[g], t) ? 1.0 : 0.0;
    }
    return 0.0;
  }

  /// Bernoulli availability flag for the k-th thermal unit.
  std::uint8_t thermal_flag(std::size_t i, std::size_t k, std::size_t t) const {
    if (!flags_.empty()) return flags_[(i * thermal_gens_.size() + k) * horizon_ + t];
    return draw_flag(i, k, t);
  }

  /// All hours of thermal unit k in scenario i. Only valid for materialized batches.
  std::span<const std::uint8_t> thermal_row(std::size_t i, std::size_t k) const {
    return {flags_.data() + (i * thermal_gens_.size() + k) * horizon_, horizon_};
  }

  std::size_t thermal_slot(std::size_t g) const { return thermal_slot_[g]; }
  GeneratorKind kind(std::size_t g) const { return kinds_[g]; }
  const std::vector<double>& profile_values(std::size_t g) const { return profile_values_[g]; }
  const std::vector<std::size_t>& thermal_generators() const { return thermal_gens_; }

  /// Throws unless the batch was drawn for a fleet with the same generators
  /// (ids, kinds, outage rates, profiles) and horizon. Load and capacities
  /// may differ.
  void check_compatible(const SystemSpec& system) const {
    if (system.horizon_hours != horizon_ || system.generators.size() != ids_.size())
      throw Error("batch/system mismatch: fleet or horizon differs");
    for (std::size_t g = 0; g < ids_.size(); ++g) {
      const auto& gen = system.generators[g];
      if (gen.id != ids_[g] || gen.kind != kinds_[g])
        throw Error("batch/system mismatch at generator '" + gen.id + "'");
      if (gen.kind == GeneratorKind::thermal && gen.for_rate.value_or(0.0) != for_rates_[g])
        throw Error("batch/system mismatch: outage rate of '" + gen.id + "' differs");
      if (gen.kind == GeneratorKind::profile) {
        const auto* p = system.find_profile(*gen.profile_id);
        if (!p || p->values != profile_values_[g])
          throw Error("batch/system mismatch: profile of '" + gen.id + "' differs");
      }
    }
  }

  /// Builds a batch from explicit thermal flags laid out [scenario][thermal][hour].
  /// Non-empty `weights` (summing to one) mark an exact-weight pseudo-batch.
  static ScenarioBatch from_flags(const SystemSpec& system, std::size_t n, std::vector<std::uint8_t> flags,
                                  std::vector<double> weights = {}) {
    ScenarioBatch b = skeleton(system, n, RngPolicy{});
    if (flags.size() != n * b.thermal_gens_.size() * b.horizon_)
      throw Error("from_flags: flag array has wrong size");
    if (!weights.empty() && weights.size() != n) throw Error("from_flags: weight count must equal n");
    b.flags_ = std::move(flags);
    b.weights_ = std::move(weights);
    return b;
  }

  friend ScenarioBatch sample_batch(const SystemSpec&, std::size_t, const RngPolicy&, const SamplingOptions&);

private:
  static ScenarioBatch skeleton(const SystemSpec& system, std::size_t n, const RngPolicy& policy) {
    ScenarioBatch b;
    b.n_ = n;
    b.horizon_ = system.horizon_hours;
    b.policy_ = policy;
    const auto G = system.generators.size();
    b.ids_.resize(G);
    b.kinds_.resize(G);
    b.thermal_slot_.assign(G, 0);
    b.profile_values_.resize(G);
    b.for_rates_.assign(G, 0.0);
    for (std::size_t g = 0; g < G; ++g) {
      const auto& gen = system.generators[g];
      b.ids_[g] = gen.id;
      b.kinds_[g] = gen.kind;
      if (gen.kind == GeneratorKind::thermal) {
        b.thermal_slot_[g] = b.thermal_gens_.size();
        b.thermal_gens_.push_back(g);
        b.for_rates_[g] = gen.for_rate.value_or(0.0);
      } else if (gen.kind == GeneratorKind::profile) {
        b.profile_values_[g] = system.find_profile(*gen.profile_id)->values;
      }
    }
    return b;
  }

  std::uint8_t draw_flag(std::size_t i, std::size_t k, std::size_t t) const {
    const auto g = thermal_gens_[k];
    const auto stream = derive_stream(policy_, i, ids_[g]);
    return stream.uniform_at(t) >= for_rates_[g] ? 1 : 0;
  }

  std::size_t n_ = 0;
  std::size_t horizon_ = 0;
  RngPolicy policy_;
  std::vector<std::string> ids_;
  std::vector<GeneratorKind> kinds_;
  std::vector<std::size_t> thermal_slot_;
  std::vector<std::size_t> thermal_gens_;
  std::vector<double> for_rates_;
  std::vector<std::vector<double>> profile_values_;
  std::vector<std::uint8_t> flags_;
  std::vector<double> weights_;
};

inline ScenarioBatch sample_batch(const SystemSpec& system, std::size_t n, const RngPolicy& policy,
                                  const SamplingOptions& options = {}) {
  if (n == 0) throw SpecError("samples", "scenario count must be at least 1");
  system.validate();
  ScenarioBatch b = ScenarioBatch::skeleton(system, n, policy);
  const std::size_t K = b.thermal_gens_.size();
  const std::size_t T = b.horizon_;
  const std::uint64_t entries = static_cast<std::uint64_t>(n) * K * T;
  if (K == 0 || entries > options.materialize_limit) return b;

  b.flags_.resize(entries);
  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t k = 0; k < K; ++k) {
        const auto g = b.thermal_gens_[k];
        const auto stream = derive_stream(policy, i, b.ids_[g]);
        const double q = b.for_rates_[g];
        std::uint8_t* row = b.flags_.data() + (i * K + k) * T;
        for (std::size_t t = 0; t < T; ++t) row[t] = stream.uniform_at(t) >= q ? 1 : 0;
      }
    }
  });
  return b;
}

// Thermal-flag dump. Little-endian layout:
//   8 bytes  magic "RAFLAGS1"
//   u64      scenario count n
//   u32      thermal unit count K
//   u32      horizon T
//   u64      master seed
//   K times: u16 id length, id bytes
//   n*K*T bytes of 0/1 flags, ordered [scenario][thermal unit][hour]
struct ThermalDump {
  std::uint64_t n = 0;
  std::uint64_t master_seed = 0;
  std::uint32_t horizon = 0;
  std::vector<std::string> ids;
  std::vector<std::uint8_t> flags;
};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  for (std::size_t b = 0; b < sizeof(T); ++b) out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * b)) & 0xff));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint64_t v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    const int c = in.get();
    if (c == EOF) throw Error("truncated batch dump");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return static_cast<T>(v);
}

}  // namespace detail

inline void write_thermal_dump(const ScenarioBatch& batch, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out.write("RAFLAGS1", 8);
  detail::put_le<std::uint64_t>(out, batch.size());
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.thermal_count()));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.horizon()));
  detail::put_le<std::uint64_t>(out, batch.rng_policy().master_seed);
  for (auto g : batch.thermal_generators()) {
    const auto& id = batch.resource_ids()[g];
    detail::put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  std::vector<char> row(batch.horizon());
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k < batch.thermal_count(); ++k) {
      for (std::size_t t = 0; t < batch.horizon(); ++t) row[t] = static_cast<char>(batch.thermal_flag(i, k, t));
      out.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

inline ThermalDump read_thermal_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "RAFLAGS1", 8) != 0) throw Error("not a thermal flag dump");
  ThermalDump d;
  d.n = detail::get_le<std::uint64_t>(in);
  const auto K = detail::get_le<std::uint32_t>(in);
  d.horizon = detail::get_le<std::uint32_t>(in);
  d.master_seed = detail::get_le<std::uint64_t>(in);
  for (std::uint32_t k = 0; k < K; ++k) {
    const auto len = detail::get_le<std::uint16_t>(in);
    std::string id(len, '\0');
    in.read(id.data(), len);
    d.ids.push_back(std::move(id));
  }
  d.flags.resize(d.n * K * d.horizon);
  in.read(reinterpret_cast<char*>(d.flags.data()), static_cast<std::streamsize>(d.flags.size()));
  if (!in) throw Error("truncated batch dump");
  return d;
}

}  // namespace raccredit
