#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace raccredit {

// Counter-based keyed streams: a draw is a pure function of
// (master_seed, scenario_index, resource_id, counter). No generator state is
// shared between resources, so a resource's draws never depend on which other
// resources exist or on the order in which scenarios are processed.

inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Maps 64 random bits to a double in [0, 1) with 53-bit resolution.
inline constexpr double to_unit_interval(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

struct RngPolicy {
  std::uint64_t master_seed = 0;
  std::string rule = "splitmix64-keyed-v1";

  bool operator==(const RngPolicy&) const = default;
};

/// Deterministic substream for one (scenario, resource) pair.
class Substream {
public:
  Substream(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const { return key_; }

  /// Random bits at an explicit position (the hour, for availability draws).
  std::uint64_t bits_at(std::uint64_t counter) const {
    return splitmix64(key_ ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
  }

  double uniform_at(std::uint64_t counter) const { return to_unit_interval(bits_at(counter)); }

  double next() { return uniform_at(position_++); }
  std::uint64_t next_bits() { return bits_at(position_++); }

private:
  std::uint64_t key_;
  std::uint64_t position_ = 0;
};

inline Substream derive_stream(const RngPolicy& policy, std::uint64_t scenario_index, std::string_view resource_id) {
  std::uint64_t k = splitmix64(policy.master_seed);
  k = splitmix64(k ^ (scenario_index * 0xd1b54a32d192ed03ULL));
  k = splitmix64(k ^ fnv1a64(resource_id));
  return Substream{k};
}

}  // namespace raccredit
