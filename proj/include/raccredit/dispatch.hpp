#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/scenario.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

/// Capacity and load changes applied on top of a baseline system when it is
/// evaluated. Every perturbation (finite differences, ELCC iterates,
/// portfolio additions) is expressed as one of these so that all variants
/// are evaluated on the same scenario batch.
struct Adjustment {
  Mw firm_mw = 0.0;                 // perfectly firm capacity added in every hour
  Mw load_mw = 0.0;                 // constant load added in every hour
  std::vector<Mw> generator_mw;     // per-generator nameplate change (empty = none)
  std::vector<Mw> hourly_mw;        // per-hour capacity from explicit profile directions
  std::vector<Mw> storage_power_mw;
  std::vector<Mwh> storage_energy_mwh;
};

namespace detail {

inline void grow(std::vector<double>& v, std::size_t n) {
  if (v.size() < n) v.resize(n, 0.0);
}

}  // namespace detail

/// Adds `mw` of capacity along a resolved direction.
inline void add_direction(Adjustment& adj, const SystemSpec& system, const PerturbationDirection& d, double mw) {
  using Tag = PerturbationDirection::Tag;
  switch (d.tag) {
    case Tag::perfect: adj.firm_mw += mw; break;
    case Tag::resource: {
      const auto g = system.find_generator(d.id);
      if (!g) throw SpecError("direction", "unknown generator '" + d.id + "'");
      detail::grow(adj.generator_mw, system.generators.size());
      adj.generator_mw[*g] += mw;
      break;
    }
    case Tag::profile_vector:
      detail::grow(adj.hourly_mw, system.horizon_hours);
      for (std::size_t t = 0; t < d.values.size(); ++t) adj.hourly_mw[t] += mw * d.values[t];
      break;
    case Tag::storage_policy: {
      const auto s = system.find_storage(d.id);
      if (!s) throw SpecError("direction", "unknown storage '" + d.id + "'");
      // power and energy scale together so the duration is preserved
      detail::grow(adj.storage_power_mw, system.storages.size());
      detail::grow(adj.storage_energy_mwh, system.storages.size());
      adj.storage_power_mw[*s] += mw;
      adj.storage_energy_mwh[*s] += mw * system.storages[*s].duration();
      break;
    }
    case Tag::portfolio:
      for (const auto& m : d.members) add_direction(adj, system, m.direction, mw * m.scale);
      break;
  }
}

inline Adjustment direction_adjustment(const SystemSpec& system, const PerturbationDirection& d, double mw) {
  Adjustment adj;
  add_direction(adj, system, d, mw);
  return adj;
}

/// True if the adjustment drives any generator or storage rating below zero.
inline bool has_negative_capacity(const SystemSpec& system, const Adjustment& adj) {
  for (std::size_t g = 0; g < adj.generator_mw.size(); ++g)
    if (system.generators[g].nameplate_mw + adj.generator_mw[g] < 0.0) return true;
  for (std::size_t s = 0; s < adj.storage_power_mw.size(); ++s)
    if (system.storages[s].power_mw + adj.storage_power_mw[s] < 0.0) return true;
  for (std::size_t s = 0; s < adj.storage_energy_mwh.size(); ++s)
    if (system.storages[s].energy_mwh + adj.storage_energy_mwh[s] < 0.0) return true;
  return false;
}

struct DispatchPolicy {
  enum class Kind { greedy_shortfall };
  Kind kind = Kind::greedy_shortfall;
};

struct StorageUnit {
  double power = 0.0;
  double energy = 0.0;
  double eta_charge = 1.0;
  double eta_discharge = 1.0;
  double soc0 = 0.0;
};

/// Effective per-hour quantities for one (system, adjustment) pair.
///
/// Available capacity in hour t is accumulated in a fixed order:
///   fixed[t] = sum over non-thermal g (in fleet order) of cap_g * A_gt,
///              then + hourly_mw[t], then + firm_mw
///   supply   = fixed[t] + sum over thermal k (in fleet order) of cap_k * A_kt
/// Every evaluation path uses this order so results are bit-identical.
class CapacityModel {
public:
  CapacityModel(const SystemSpec& system, const Adjustment& adj) : horizon_(system.horizon_hours) {
    const auto G = system.generators.size();
    caps_.resize(G);
    for (std::size_t g = 0; g < G; ++g)
      caps_[g] = system.generators[g].nameplate_mw + (g < adj.generator_mw.size() ? adj.generator_mw[g] : 0.0);

    fixed_.assign(horizon_, 0.0);
    for (std::size_t t = 0; t < horizon_; ++t) {
      double x = 0.0;
      for (std::size_t g = 0; g < G; ++g) {
        const auto& gen = system.generators[g];
        if (gen.kind == GeneratorKind::perfect) x += caps_[g];
        else if (gen.kind == GeneratorKind::profile) x += caps_[g] * system.find_profile(*gen.profile_id)->values[t];
      }
      if (t < adj.hourly_mw.size()) x += adj.hourly_mw[t];
      x += adj.firm_mw;
      fixed_[t] = x;
    }

    for (std::size_t g = 0; g < G; ++g)
      if (system.generators[g].kind == GeneratorKind::thermal) {
        thermal_gens_.push_back(g);
        thermal_caps_.push_back(caps_[g]);
      }

    load_.resize(horizon_);
    for (std::size_t t = 0; t < horizon_; ++t) load_[t] = system.load.values[t] + adj.load_mw;

    for (std::size_t s = 0; s < system.storages.size(); ++s) {
      const auto& st = system.storages[s];
      StorageUnit u;
      u.power = st.power_mw + (s < adj.storage_power_mw.size() ? adj.storage_power_mw[s] : 0.0);
      u.energy = st.energy_mwh + (s < adj.storage_energy_mwh.size() ? adj.storage_energy_mwh[s] : 0.0);
      u.power = std::max(0.0, u.power);
      u.energy = std::max(0.0, u.energy);
      u.eta_charge = st.efficiency_charge;
      u.eta_discharge = st.efficiency_discharge;
      u.soc0 = st.initial_soc_fraction * u.energy;
      storages_.push_back(u);
    }
  }

  std::size_t horizon() const { return horizon_; }
  const std::vector<double>& fixed_supply() const { return fixed_; }
  const std::vector<double>& load() const { return load_; }
  const std::vector<double>& thermal_caps() const { return thermal_caps_; }
  const std::vector<std::size_t>& thermal_generators() const { return thermal_gens_; }
  const std::vector<double>& generator_caps() const { return caps_; }
  const std::vector<StorageUnit>& storages() const { return storages_; }
  bool has_storage() const { return !storages_.empty(); }

private:
  std::size_t horizon_;
  std::vector<double> caps_;
  std::vector<double> fixed_;
  std::vector<double> load_;
  std::vector<std::size_t> thermal_gens_;
  std::vector<double> thermal_caps_;
  std::vector<StorageUnit> storages_;
};

/// Turns per-hour available capacity into shortfall, running the greedy
/// chronological storage policy. `supply` is consumed as scratch.
/// soc_trace (optional, length T) receives the total state of charge after each hour.
inline void settle_hours(std::span<const double> load, std::span<const double> supply,
                         const std::vector<StorageUnit>& units, std::span<double> shortfall,
                         std::span<double> soc_trace = {}) {
  const std::size_t T = load.size();
  if (units.empty()) {
    for (std::size_t t = 0; t < T; ++t) {
      const double deficit = load[t] - supply[t];
      shortfall[t] = deficit > 0.0 ? deficit : 0.0;
    }
    return;
  }
  // small fixed-capacity buffer avoids allocation for the common case
  double soc_small[8];
  std::vector<double> soc_big;
  double* soc = soc_small;
  if (units.size() > 8) {
    soc_big.resize(units.size());
    soc = soc_big.data();
  }
  for (std::size_t s = 0; s < units.size(); ++s) soc[s] = units[s].soc0;

  for (std::size_t t = 0; t < T; ++t) {
    double deficit = load[t] - supply[t];
    if (deficit > 0.0) {
      for (std::size_t s = 0; s < units.size() && deficit > 0.0; ++s) {
        const auto& u = units[s];
        const double out = std::min({u.power, soc[s] * u.eta_discharge, deficit});
        if (out > 0.0) {
          soc[s] = std::max(0.0, soc[s] - out / u.eta_discharge);
          deficit -= out;
        }
      }
      shortfall[t] = deficit > 0.0 ? deficit : 0.0;
    } else {
      double surplus = -deficit;
      for (std::size_t s = 0; s < units.size() && surplus > 0.0; ++s) {
        const auto& u = units[s];
        const double in = std::min({u.power, surplus, (u.energy - soc[s]) / u.eta_charge});
        if (in > 0.0) {
          soc[s] = std::min(u.energy, soc[s] + in * u.eta_charge);
          surplus -= in;
        }
      }
      shortfall[t] = 0.0;
    }
    if (!soc_trace.empty()) {
      double total = 0.0;
      for (std::size_t s = 0; s < units.size(); ++s) total += soc[s];
      soc_trace[t] = total;
    }
  }
}

/// Availability of every generator (rows, fleet order) in every hour (columns).
struct AvailabilityMatrix {
  std::size_t generators = 0;
  std::size_t horizon = 0;
  std::vector<double> values;  // [g * horizon + t]

  AvailabilityMatrix() = default;
  AvailabilityMatrix(std::size_t g, std::size_t t, double fill = 1.0) : generators(g), horizon(t), values(g * t, fill) {}

  double& at(std::size_t g, std::size_t t) { return values[g * horizon + t]; }
  double at(std::size_t g, std::size_t t) const { return values[g * horizon + t]; }

  static AvailabilityMatrix from_batch(const ScenarioBatch& batch, std::size_t i) {
    AvailabilityMatrix m(batch.generator_count(), batch.horizon());
    for (std::size_t g = 0; g < m.generators; ++g)
      for (std::size_t t = 0; t < m.horizon; ++t) m.at(g, t) = batch.availability(i, g, t);
    return m;
  }
};

struct ScenarioDispatch {
  std::vector<Mwh> shortfall;
  std::vector<Mwh> soc_trace;  // empty without storage
};

/// Dispatches one scenario: shortfall (L - x)+ per hour with greedy storage.
inline ScenarioDispatch dispatch_scenario(const SystemSpec& system, const AvailabilityMatrix& availability,
                                          const DispatchPolicy& = {}, const Adjustment& adj = {}) {
  if (availability.generators != system.generators.size() || availability.horizon != system.horizon_hours ||
      availability.values.size() != availability.generators * availability.horizon)
    throw Error("dispatch_scenario: availability dimensions do not match the system");
  const CapacityModel model(system, adj);
  const std::size_t T = system.horizon_hours;
  std::vector<double> supply = model.fixed_supply();
  const auto& tg = model.thermal_generators();
  for (std::size_t k = 0; k < tg.size(); ++k)
    for (std::size_t t = 0; t < T; ++t) supply[t] += model.thermal_caps()[k] * availability.at(tg[k], t);
  ScenarioDispatch out;
  out.shortfall.resize(T);
  if (model.has_storage()) out.soc_trace.resize(T);
  settle_hours(model.load(), supply, model.storages(), out.shortfall, out.soc_trace);
  return out;
}

namespace detail {

/// Per-scenario available capacity for a batch row, in canonical order.
inline void batch_supply(const CapacityModel& model, const ScenarioBatch& batch, std::size_t i,
                         std::span<double> supply) {
  const std::size_t T = model.horizon();
  std::copy(model.fixed_supply().begin(), model.fixed_supply().end(), supply.begin());
  const auto& caps = model.thermal_caps();
  if (batch.materialized()) {
    for (std::size_t k = 0; k < caps.size(); ++k) {
      const auto row = batch.thermal_row(i, k);
      const double c = caps[k];
      for (std::size_t t = 0; t < T; ++t) supply[t] += c * (row[t] ? 1.0 : 0.0);
    }
  } else {
    for (std::size_t k = 0; k < caps.size(); ++k)
      for (std::size_t t = 0; t < T; ++t) supply[t] += caps[k] * (batch.thermal_flag(i, k, t) ? 1.0 : 0.0);
  }
}

}  // namespace detail

/// Post-dispatch shortfall for every scenario of a batch.
struct ShortfallSurface {
  std::size_t n = 0;
  std::size_t horizon = 0;
  std::size_t hours_per_day = 24;
  std::vector<Mwh> shortfall;                  // [i * horizon + t]
  std::vector<std::uint8_t> shortage_indicator;  // S = 1 iff shortfall > 0
  std::vector<Mwh> soc_trace;                  // total SoC, empty without storage
  std::vector<std::string> generator_ids;
  std::vector<std::string> storage_ids;
  std::vector<double> weights;                 // copied from an exact-weight batch

  std::span<const double> row(std::size_t i) const { return {shortfall.data() + i * horizon, horizon}; }
  std::span<const std::uint8_t> indicators(std::size_t i) const {
    return {shortage_indicator.data() + i * horizon, horizon};
  }
};

inline ShortfallSurface shortfall_surface(const SystemSpec& system, const ScenarioBatch& batch,
                                          const DispatchPolicy& = {}, const Adjustment& adj = {}) {
  batch.check_compatible(system);
  const CapacityModel model(system, adj);
  const std::size_t n = batch.size();
  const std::size_t T = system.horizon_hours;
  ShortfallSurface s;
  s.n = n;
  s.horizon = T;
  s.hours_per_day = system.hours_per_day;
  s.shortfall.resize(n * T);
  s.shortage_indicator.resize(n * T);
  if (model.has_storage()) s.soc_trace.resize(n * T);
  for (const auto& g : system.generators) s.generator_ids.push_back(g.id);
  for (const auto& st : system.storages) s.storage_ids.push_back(st.id);
  s.weights = batch.weights();

  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> supply(T);
    for (std::size_t i = begin; i < end; ++i) {
      detail::batch_supply(model, batch, i, supply);
      std::span<double> out(s.shortfall.data() + i * T, T);
      std::span<double> soc = model.has_storage() ? std::span<double>(s.soc_trace.data() + i * T, T)
                                                  : std::span<double>{};
      settle_hours(model.load(), supply, model.storages(), out, soc);
      for (std::size_t t = 0; t < T; ++t) s.shortage_indicator[i * T + t] = out[t] > 0.0 ? 1 : 0;
    }
  });
  return s;
}

}  // namespace raccredit
