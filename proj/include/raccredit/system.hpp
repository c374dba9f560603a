#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "raccredit/core.hpp"

namespace raccredit {

enum class GeneratorKind { thermal, profile, perfect };

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::thermal: return "thermal";
    case GeneratorKind::profile: return "profile";
    case GeneratorKind::perfect: return "perfect";
  }
  return "?";
}

struct GeneratorSpec {
  std::string id;
  Mw nameplate_mw = 0.0;
  GeneratorKind kind = GeneratorKind::perfect;
  std::optional<double> for_rate;          // thermal only
  std::optional<std::string> profile_id;   // profile only

  bool operator==(const GeneratorSpec&) const = default;
};

struct AvailabilityProfile {
  std::string id;
  std::vector<double> values;  // per-hour fraction in [0, 1]

  bool operator==(const AvailabilityProfile&) const = default;
};

struct StorageSpec {
  std::string id;
  Mw power_mw = 0.0;
  Mwh energy_mwh = 0.0;
  double efficiency_charge = 1.0;
  double efficiency_discharge = 1.0;
  double initial_soc_fraction = 1.0;
  // Energy-to-power ratio used when the unit is perturbed. Only needed when
  // power_mw is zero (a candidate storage); otherwise energy/power is used.
  std::optional<double> duration_hours;

  double duration() const {
    if (power_mw > 0.0) return energy_mwh / power_mw;
    return duration_hours.value_or(0.0);
  }

  bool operator==(const StorageSpec&) const = default;
};

struct LoadTrajectory {
  std::vector<Mw> values;

  bool operator==(const LoadTrajectory&) const = default;
};

/// Baseline system: fleet, load and study horizon. Immutable once validated.
struct SystemSpec {
  std::vector<GeneratorSpec> generators;
  std::vector<StorageSpec> storages;
  std::vector<AvailabilityProfile> profiles;
  LoadTrajectory load;
  std::size_t horizon_hours = 0;
  std::size_t hours_per_day = 24;

  bool operator==(const SystemSpec&) const = default;

  std::optional<std::size_t> find_generator(const std::string& id) const {
    for (std::size_t g = 0; g < generators.size(); ++g)
      if (generators[g].id == id) return g;
    return std::nullopt;
  }

  std::optional<std::size_t> find_storage(const std::string& id) const {
    for (std::size_t s = 0; s < storages.size(); ++s)
      if (storages[s].id == id) return s;
    return std::nullopt;
  }

  const AvailabilityProfile* find_profile(const std::string& id) const {
    for (const auto& p : profiles)
      if (p.id == id) return &p;
    return nullptr;
  }

  std::size_t thermal_count() const {
    std::size_t k = 0;
    for (const auto& g : generators) k += g.kind == GeneratorKind::thermal;
    return k;
  }

  std::size_t day_count() const { return hours_per_day == 0 ? 0 : horizon_hours / hours_per_day; }

  /// Checks every invariant; throws SpecError naming the offending field.
  void validate() const;
};

namespace detail {

inline std::string indexed(const char* field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

inline bool is_fraction(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace detail

inline void SystemSpec::validate() const {
  using detail::indexed;
  using detail::is_fraction;
  if (horizon_hours == 0) throw SpecError("horizon_hours", "must be at least one hour");
  if (hours_per_day == 0) throw SpecError("hours_per_day", "must be positive");
  if (horizon_hours % hours_per_day != 0)
    throw SpecError("hours_per_day", "horizon_hours must be divisible by hours_per_day");
  if (load.values.size() != horizon_hours)
    throw SpecError("load", "length " + std::to_string(load.values.size()) +
                                " does not match horizon " + std::to_string(horizon_hours));
  for (std::size_t t = 0; t < load.values.size(); ++t)
    if (!std::isfinite(load.values[t]) || load.values[t] < 0.0)
      throw SpecError(indexed("load", t), "must be finite and nonnegative");

  std::set<std::string> profile_ids;
  for (std::size_t p = 0; p < profiles.size(); ++p) {
    const auto path = indexed("profiles", p);
    if (profiles[p].id.empty()) throw SpecError(path + ".id", "must not be empty");
    if (!profile_ids.insert(profiles[p].id).second)
      throw SpecError(path + ".id", "duplicate profile id '" + profiles[p].id + "'");
    if (profiles[p].values.size() != horizon_hours)
      throw SpecError(path + ".values", "length does not match horizon");
    for (std::size_t t = 0; t < profiles[p].values.size(); ++t)
      if (!is_fraction(profiles[p].values[t]))
        throw SpecError(path + indexed(".values", t), "must lie in [0, 1]");
  }

  std::set<std::string> resource_ids;
  for (std::size_t g = 0; g < generators.size(); ++g) {
    const auto& gen = generators[g];
    const auto path = indexed("generators", g);
    if (gen.id.empty()) throw SpecError(path + ".id", "must not be empty");
    if (!resource_ids.insert(gen.id).second)
      throw SpecError(path + ".id", "duplicate resource id '" + gen.id + "'");
    if (!std::isfinite(gen.nameplate_mw) || gen.nameplate_mw < 0.0)
      throw SpecError(path + ".nameplate_mw", "must be finite and nonnegative");
    switch (gen.kind) {
      case GeneratorKind::thermal:
        if (!gen.for_rate) throw SpecError(path + ".for_rate", "required for thermal units");
        if (!is_fraction(*gen.for_rate)) throw SpecError(path + ".for_rate", "must lie in [0, 1]");
        if (gen.profile_id) throw SpecError(path + ".profile_id", "not allowed for thermal units");
        break;
      case GeneratorKind::profile:
        if (!gen.profile_id) throw SpecError(path + ".profile_id", "required for profile units");
        if (gen.for_rate) throw SpecError(path + ".for_rate", "not allowed for profile units");
        if (!find_profile(*gen.profile_id))
          throw SpecError(path + ".profile_id", "unresolved profile '" + *gen.profile_id + "'");
        break;
      case GeneratorKind::perfect:
        if (gen.for_rate) throw SpecError(path + ".for_rate", "not allowed for perfect units");
        if (gen.profile_id) throw SpecError(path + ".profile_id", "not allowed for perfect units");
        break;
    }
  }

  for (std::size_t s = 0; s < storages.size(); ++s) {
    const auto& st = storages[s];
    const auto path = indexed("storages", s);
    if (st.id.empty()) throw SpecError(path + ".id", "must not be empty");
    if (!resource_ids.insert(st.id).second)
      throw SpecError(path + ".id", "duplicate resource id '" + st.id + "'");
    if (!std::isfinite(st.power_mw) || st.power_mw < 0.0)
      throw SpecError(path + ".power_mw", "must be finite and nonnegative");
    if (!std::isfinite(st.energy_mwh) || st.energy_mwh < 0.0)
      throw SpecError(path + ".energy_mwh", "must be finite and nonnegative");
    if (!(st.efficiency_charge > 0.0 && st.efficiency_charge <= 1.0))
      throw SpecError(path + ".efficiency_charge", "must lie in (0, 1]");
    if (!(st.efficiency_discharge > 0.0 && st.efficiency_discharge <= 1.0))
      throw SpecError(path + ".efficiency_discharge", "must lie in (0, 1]");
    if (!is_fraction(st.initial_soc_fraction))
      throw SpecError(path + ".initial_soc_fraction", "must lie in [0, 1]");
    if (st.duration_hours && (!std::isfinite(*st.duration_hours) || *st.duration_hours < 0.0))
      throw SpecError(path + ".duration_hours", "must be finite and nonnegative");
    if (!std::isfinite(st.duration())) throw SpecError(path, "duration must be finite");
  }
}

/// Returns a copy with every hourly load multiplied by `multiplier`.
inline SystemSpec scale_load(const SystemSpec& system, double multiplier) {
  if (!(multiplier > 0.0) || !std::isfinite(multiplier))
    throw SpecError("multiplier", "load multiplier must be positive and finite");
  SystemSpec scaled = system;
  for (auto& v : scaled.load.values) v *= multiplier;
  return scaled;
}

/// Returns a copy with `generator` appended to the fleet (typically a
/// zero-capacity candidate that later receives a perturbation).
inline SystemSpec with_generator(const SystemSpec& system, GeneratorSpec generator) {
  SystemSpec out = system;
  out.generators.push_back(std::move(generator));
  out.validate();
  return out;
}

inline SystemSpec with_storage(const SystemSpec& system, StorageSpec storage) {
  SystemSpec out = system;
  out.storages.push_back(std::move(storage));
  out.validate();
  return out;
}

struct PortfolioMember;

/// Capacity-availability direction v along which the baseline is perturbed.
struct PerturbationDirection {
  enum class Tag { resource, perfect, profile_vector, portfolio, storage_policy };

  Tag tag = Tag::perfect;
  std::string id;                      // resource / storage_policy
  std::vector<double> values;          // profile_vector
  std::vector<PortfolioMember> members;  // portfolio

  static PerturbationDirection resource(std::string id);
  static PerturbationDirection perfect();
  static PerturbationDirection profile_vector(std::vector<double> values);
  static PerturbationDirection portfolio(std::vector<PortfolioMember> members);
  static PerturbationDirection storage_policy(std::string storage_id);

  std::string label() const;
};

/// One portfolio component; `scale` is MW of this member per MW of perturbation.
struct PortfolioMember {
  PerturbationDirection direction;
  double scale = 1.0;
};

inline PerturbationDirection PerturbationDirection::resource(std::string id) {
  PerturbationDirection d;
  d.tag = Tag::resource;
  d.id = std::move(id);
  return d;
}

inline PerturbationDirection PerturbationDirection::perfect() { return {}; }

inline PerturbationDirection PerturbationDirection::profile_vector(std::vector<double> values) {
  PerturbationDirection d;
  d.tag = Tag::profile_vector;
  d.values = std::move(values);
  return d;
}

inline PerturbationDirection PerturbationDirection::portfolio(std::vector<PortfolioMember> members) {
  PerturbationDirection d;
  d.tag = Tag::portfolio;
  d.members = std::move(members);
  return d;
}

inline PerturbationDirection PerturbationDirection::storage_policy(std::string storage_id) {
  PerturbationDirection d;
  d.tag = Tag::storage_policy;
  d.id = std::move(storage_id);
  return d;
}

inline std::string PerturbationDirection::label() const {
  switch (tag) {
    case Tag::resource: return id;
    case Tag::perfect: return "perfect";
    case Tag::profile_vector: return "profile_vector";
    case Tag::storage_policy: return id;
    case Tag::portfolio: {
      std::string s;
      for (const auto& m : members) s += (s.empty() ? "" : "+") + m.direction.label();
      return s;
    }
  }
  return "?";
}

/// Validates a direction against a system and normalizes it: a resource id
/// naming a storage becomes storage_policy, a resource id naming a perfect
/// generator becomes the perfect direction.
inline PerturbationDirection resolve_direction(const SystemSpec& system, const PerturbationDirection& d) {
  using Tag = PerturbationDirection::Tag;
  switch (d.tag) {
    case Tag::perfect: return d;
    case Tag::resource: {
      if (auto g = system.find_generator(d.id)) {
        if (system.generators[*g].kind == GeneratorKind::perfect) return PerturbationDirection::perfect();
        return d;
      }
      if (system.find_storage(d.id)) return PerturbationDirection::storage_policy(d.id);
      throw SpecError("direction", "unknown resource '" + d.id + "'");
    }
    case Tag::storage_policy:
      if (!system.find_storage(d.id)) throw SpecError("direction", "unknown storage '" + d.id + "'");
      return d;
    case Tag::profile_vector:
      if (d.values.size() != system.horizon_hours)
        throw SpecError("direction.values", "length does not match horizon");
      for (double v : d.values)
        if (!detail::is_fraction(v)) throw SpecError("direction.values", "entries must lie in [0, 1]");
      return d;
    case Tag::portfolio: {
      if (d.members.empty()) throw SpecError("direction.members", "portfolio must not be empty");
      std::vector<PortfolioMember> resolved;
      std::set<std::string> seen;
      for (const auto& m : d.members) {
        if (m.direction.tag == Tag::portfolio)
          throw SpecError("direction.members", "nested portfolios are not supported");
        if (!std::isfinite(m.scale) || m.scale < 0.0)
          throw SpecError("direction.members", "member scale must be finite and nonnegative");
        auto r = resolve_direction(system, m.direction);
        if ((r.tag == Tag::resource || r.tag == Tag::storage_policy || r.tag == Tag::perfect) &&
            !seen.insert(r.label()).second)
          throw SpecError("direction.members", "duplicate portfolio member '" + r.label() + "'");
        resolved.push_back({std::move(r), m.scale});
      }
      return PerturbationDirection::portfolio(std::move(resolved));
    }
  }
  return d;
}

inline bool involves_storage(const PerturbationDirection& d) {
  if (d.tag == PerturbationDirection::Tag::storage_policy) return true;
  for (const auto& m : d.members)
    if (involves_storage(m.direction)) return true;
  return false;
}

}  // namespace raccredit
