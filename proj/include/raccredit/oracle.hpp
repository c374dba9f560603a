#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/dispatch.hpp"
#include "raccredit/metrics.hpp"
#include "raccredit/scenario.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

// Ground truth by full enumeration of thermal outage states. Thermal draws
// are independent across hours and profile/perfect units are deterministic,
// so every hour's expectation only needs the 2^K single-hour states, and
// hours with the same margin share one pass over the state table.

inline constexpr std::size_t oracle_max_thermal = 20;
inline constexpr double kink_tolerance_mw = 1e-9;

struct OracleState {
  double probability = 0.0;
  std::uint32_t up_mask = 0;   // bit k set: k-th thermal unit available
  Mw thermal_capacity = 0.0;   // baseline available thermal capacity
};

struct ExactAssessment {
  Mwh eue = 0.0;
  double lolh = 0.0;
  double lold = 0.0;
  std::vector<double> lolp_per_hour;
  std::vector<Mwh> eue_per_hour;
  std::vector<OracleState> state_table;
};

namespace detail {

class Enumeration {
public:
  explicit Enumeration(const SystemSpec& system) : system_(system) {
    system.validate();
    if (!system.storages.empty()) throw OracleUnsupported("storage present");
    for (std::size_t g = 0; g < system.generators.size(); ++g)
      if (system.generators[g].kind == GeneratorKind::thermal) thermal_.push_back(g);
    if (thermal_.size() > oracle_max_thermal)
      throw OracleUnsupported("more than " + std::to_string(oracle_max_thermal) + " thermal units");
    const std::size_t K = thermal_.size();
    probability_.assign(std::size_t{1} << K, 1.0);
    for (std::uint32_t mask = 0; mask < probability_.size(); ++mask)
      for (std::size_t k = 0; k < K; ++k) {
        const double q = *system.generators[thermal_[k]].for_rate;
        probability_[mask] *= (mask >> k) & 1u ? 1.0 - q : q;
      }
  }

  std::size_t states() const { return probability_.size(); }
  double probability(std::uint32_t mask) const { return probability_[mask]; }
  const std::vector<std::size_t>& thermal() const { return thermal_; }

  double capacity(std::size_t g, const Adjustment& adj) const {
    return system_.generators[g].nameplate_mw + (g < adj.generator_mw.size() ? adj.generator_mw[g] : 0.0);
  }

  std::vector<double> thermal_capacity(const Adjustment& adj) const {
    std::vector<double> cap(states(), 0.0);
    for (std::uint32_t mask = 0; mask < cap.size(); ++mask)
      for (std::size_t k = 0; k < thermal_.size(); ++k)
        if ((mask >> k) & 1u) cap[mask] += capacity(thermal_[k], adj);
    return cap;
  }

  /// Load minus non-thermal capacity in hour t.
  double margin(std::size_t t, const Adjustment& adj) const {
    double firm = 0.0;
    for (std::size_t g = 0; g < system_.generators.size(); ++g) {
      const auto& gen = system_.generators[g];
      if (gen.kind == GeneratorKind::perfect) firm += capacity(g, adj);
      if (gen.kind == GeneratorKind::profile) firm += capacity(g, adj) * system_.find_profile(*gen.profile_id)->values[t];
    }
    if (t < adj.hourly_mw.size()) firm += adj.hourly_mw[t];
    firm += adj.firm_mw;
    return system_.load.values[t] + adj.load_mw - firm;
  }

private:
  const SystemSpec& system_;
  std::vector<std::size_t> thermal_;
  std::vector<double> probability_;
};

struct HourMoments {
  double lolp = 0.0;
  double eue = 0.0;
  bool kink = false;
};

inline HourMoments hour_moments(const Enumeration& e, const std::vector<double>& cap, double margin) {
  HourMoments h;
  for (std::uint32_t s = 0; s < cap.size(); ++s) {
    const double p = e.probability(s);
    const double d = margin - cap[s];
    if (p > 0.0 && std::abs(d) < kink_tolerance_mw) h.kink = true;
    if (d > 0.0) {
      h.lolp += p;
      h.eue += p * d;
    }
  }
  return h;
}

/// Per-hour moments with hours of equal margin evaluated once.
inline std::vector<HourMoments> all_hours(const SystemSpec& system, const Enumeration& e, const Adjustment& adj) {
  const auto cap = e.thermal_capacity(adj);
  std::map<double, HourMoments> cache;
  std::vector<HourMoments> out(system.horizon_hours);
  for (std::size_t t = 0; t < system.horizon_hours; ++t) {
    const double m = e.margin(t, adj);
    auto it = cache.find(m);
    if (it == cache.end()) it = cache.emplace(m, hour_moments(e, cap, m)).first;
    out[t] = it->second;
  }
  return out;
}

}  // namespace detail

inline ExactAssessment oracle_assess(const SystemSpec& system, const Adjustment& adj = {}) {
  const detail::Enumeration e(system);
  const auto hours = detail::all_hours(system, e, adj);
  ExactAssessment a;
  for (const auto& h : hours) {
    a.lolp_per_hour.push_back(h.lolp);
    a.eue_per_hour.push_back(h.eue);
    a.eue += h.eue;
    a.lolh += h.lolp;
  }
  // hours are independent, so a day is clean with probability prod(1 - LOLP)
  for (std::size_t d = 0; d < system.day_count(); ++d) {
    double clean = 1.0;
    for (std::size_t t = d * system.hours_per_day; t < (d + 1) * system.hours_per_day; ++t) clean *= 1.0 - hours[t].lolp;
    a.lold += 1.0 - clean;
  }
  const auto cap = e.thermal_capacity(adj);
  for (std::uint32_t s = 0; s < e.states(); ++s) a.state_table.push_back({e.probability(s), s, cap[s]});
  return a;
}

/// Exact risk measure (expectation) of the perturbed system.
inline double oracle_expected(const SystemSpec& system, Metric metric, const Adjustment& adj = {}) {
  const auto a = oracle_assess(system, adj);
  switch (metric) {
    case Metric::ue: return a.eue;
    case Metric::lolh: return a.lolh;
    case Metric::lold: return a.lold;
  }
  return 0.0;
}

/// Exact directional derivative of EUE: -sum_t E[v_t * S_t].
inline double oracle_gradient(const SystemSpec& system, const PerturbationDirection& direction) {
  using Tag = PerturbationDirection::Tag;
  const detail::Enumeration e(system);
  const auto d = resolve_direction(system, direction);
  if (involves_storage(d)) throw UnsupportedDirection("oracle gradient does not support storage directions");
  const Adjustment none;
  const auto cap = e.thermal_capacity(none);
  const auto hours = detail::all_hours(system, e, none);
  for (std::size_t t = 0; t < hours.size(); ++t)
    if (hours[t].kink)
      throw IrregularBaseline("load equals available capacity in hour " + std::to_string(t) +
                              " for a state with positive probability");

  // expected coincidence of direction value with scarcity, per hour
  std::function<double(const PerturbationDirection&, std::size_t)> coincidence =
      [&](const PerturbationDirection& dir, std::size_t t) -> double {
    switch (dir.tag) {
      case Tag::perfect: return hours[t].lolp;
      case Tag::profile_vector: return dir.values[t] * hours[t].lolp;
      case Tag::resource: {
        const auto g = *system.find_generator(dir.id);
        const auto& gen = system.generators[g];
        if (gen.kind == GeneratorKind::profile) return system.find_profile(*gen.profile_id)->values[t] * hours[t].lolp;
        std::size_t k = 0;
        while (e.thermal()[k] != g) ++k;
        const double m = e.margin(t, none);
        double acc = 0.0;
        for (std::uint32_t s = 0; s < e.states(); ++s)
          if (((s >> k) & 1u) && m - cap[s] > 0.0) acc += e.probability(s);
        return acc;
      }
      case Tag::portfolio: {
        double acc = 0.0;
        for (const auto& m : dir.members) acc += m.scale * coincidence(m.direction, t);
        return acc;
      }
      case Tag::storage_policy: break;
    }
    throw UnsupportedDirection("unsupported direction");
  };

  double grad = 0.0;
  for (std::size_t t = 0; t < system.horizon_hours; ++t) grad -= coincidence(d, t);
  return grad;
}

struct OracleElcc {
  Mw l_c = 0.0;             // firm-capacity (equivalent firm capacity) root
  Mw l_c_load_shift = 0.0;  // root of the load-shift formulation
  double alpha = 0.0;
  bool forms_agree = false;  // roots equal within tolerance
  std::size_t iterations = 0;
};

/// Exact marginal ELCC by bisection on exact EUE over [0, dx].
inline OracleElcc oracle_elcc(const SystemSpec& system, const PerturbationDirection& candidate, Mw delta_x,
                              Mw tolerance_mw = 1e-9) {
  if (!(delta_x > 0.0)) throw SpecError("delta_x", "must be positive");
  if (!(tolerance_mw > 0.0)) throw SpecError("tolerance_mw", "must be positive");
  const auto d = resolve_direction(system, candidate);
  if (involves_storage(d)) throw OracleUnsupported("storage candidate");
  const double base = oracle_expected(system, Metric::ue);
  if (!(base > 0.0)) throw AdequateBaseline("baseline EUE is zero");
  const double with_candidate = oracle_expected(system, Metric::ue, direction_adjustment(system, d, delta_x));

  // both functions are nonincreasing in c with a root in [0, dx]
  auto firm_form = [&](double c) {
    Adjustment a;
    a.firm_mw = c;
    return oracle_expected(system, Metric::ue, a) - with_candidate;
  };
  auto load_form = [&](double c) {
    Adjustment a = direction_adjustment(system, d, delta_x);
    a.load_mw = c;
    return base - oracle_expected(system, Metric::ue, a);
  };
  auto bisect = [&](auto&& phi, std::size_t& iterations) {
    double lo = 0.0, hi = delta_x;
    iterations = 0;
    if (phi(lo) <= 0.0) return lo;
    while (hi - lo > tolerance_mw) {
      const double mid = 0.5 * (lo + hi);
      (phi(mid) > 0.0 ? lo : hi) = mid;
      ++iterations;
    }
    return 0.5 * (lo + hi);
  };

  OracleElcc r;
  std::size_t unused = 0;
  r.l_c = bisect(firm_form, r.iterations);
  r.l_c_load_shift = bisect(load_form, unused);
  r.alpha = r.l_c / delta_x;
  r.forms_agree = std::abs(r.l_c - r.l_c_load_shift) <= tolerance_mw;
  return r;
}

/// Pseudo-batch with one scenario per thermal outage state, each state held
/// for the whole horizon and weighted by its exact probability. Expectations
/// of hour-additive metrics (UE, LOLH) and their gradients are exact on it.
inline ScenarioBatch exact_weight_batch(const SystemSpec& system) {
  if (!system.storages.empty()) throw OracleUnsupported("storage couples hours; pseudo-batch would be inexact");
  const detail::Enumeration e(system);
  const std::size_t K = e.thermal().size();
  if (K > 16) throw OracleUnsupported("pseudo-batch limited to 16 thermal units");
  const std::size_t n = e.states();
  const std::size_t T = system.horizon_hours;
  std::vector<std::uint8_t> flags(n * K * T);
  std::vector<double> weights(n);
  for (std::uint32_t s = 0; s < n; ++s) {
    weights[s] = e.probability(s);
    for (std::size_t k = 0; k < K; ++k)
      std::fill_n(flags.begin() + static_cast<std::ptrdiff_t>((s * K + k) * T), T, (s >> k) & 1u);
  }
  return ScenarioBatch::from_flags(system, n, std::move(flags), std::move(weights));
}

}  // namespace raccredit
