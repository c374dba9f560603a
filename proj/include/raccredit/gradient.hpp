#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/dispatch.hpp"
#include "raccredit/metrics.hpp"
#include "raccredit/scenario.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

struct GradientEstimate {
  enum class Method { ipa, central_fd, forward_fd };

  double value = 0.0;      // metric units per MW
  double std_error = 0.0;
  Method method = Method::ipa;
  Mw delta = 0.0;          // finite differences only
  std::size_t n = 0;
  bool negative_capacity = false;  // the -delta side drove a rating below zero
  std::vector<double> per_scenario;  // pathwise derivatives or difference quotients
  std::vector<double> weights;       // exact-weight batches only
};

inline const char* to_string(GradientEstimate::Method m) {
  switch (m) {
    case GradientEstimate::Method::ipa: return "ipa";
    case GradientEstimate::Method::central_fd: return "central_fd";
    case GradientEstimate::Method::forward_fd: return "forward_fd";
  }
  return "?";
}

namespace detail {

inline GradientEstimate finish_gradient(std::vector<double> samples, std::vector<double> weights,
                                        GradientEstimate::Method method, double delta) {
  GradientEstimate g;
  const auto est = aggregate(samples, weights);
  g.value = est.mean;
  g.std_error = est.std_error;
  g.n = samples.size();
  g.method = method;
  g.delta = delta;
  g.per_scenario = std::move(samples);
  g.weights = std::move(weights);
  return g;
}

/// Per-hour direction values for scenario i, resolved against a surface.
class SurfaceDirection {
public:
  SurfaceDirection(const ShortfallSurface& surface, const ScenarioBatch& batch, const PerturbationDirection& d)
      : batch_(batch), horizon_(surface.horizon) {
    add(surface, d, 1.0);
  }

  /// sum_t v_t * S_t for scenario i
  double coincidence(std::size_t i, std::span<const std::uint8_t> scarce) const {
    double acc = 0.0;
    if (perfect_weight_ != 0.0) {
      std::size_t hours = 0;
      for (auto s : scarce) hours += s;
      acc += perfect_weight_ * static_cast<double>(hours);
    }
    if (!hourly_.empty())
      for (std::size_t t = 0; t < horizon_; ++t)
        if (scarce[t]) acc += hourly_[t];
    for (const auto& [k, w] : thermal_) {
      std::size_t hits = 0;
      if (batch_.materialized()) {
        const auto row = batch_.thermal_row(i, k);
        for (std::size_t t = 0; t < horizon_; ++t) hits += row[t] & scarce[t];
      } else {
        for (std::size_t t = 0; t < horizon_; ++t) hits += batch_.thermal_flag(i, k, t) & scarce[t];
      }
      acc += w * static_cast<double>(hits);
    }
    return acc;
  }

private:
  void add(const ShortfallSurface& surface, const PerturbationDirection& d, double w) {
    using Tag = PerturbationDirection::Tag;
    switch (d.tag) {
      case Tag::perfect: perfect_weight_ += w; return;
      case Tag::profile_vector:
        if (d.values.size() != horizon_) throw SpecError("direction.values", "length does not match horizon");
        hourly_.resize(horizon_, 0.0);
        for (std::size_t t = 0; t < horizon_; ++t) hourly_[t] += w * d.values[t];
        return;
      case Tag::resource: {
        for (const auto& s : surface.storage_ids)
          if (s == d.id)
            throw UnsupportedDirection("IPA is not available for storage resource '" + d.id +
                                       "': its direction depends on the dispatch policy");
        for (std::size_t g = 0; g < surface.generator_ids.size(); ++g) {
          if (surface.generator_ids[g] != d.id) continue;
          switch (batch_.kind(g)) {
            case GeneratorKind::perfect: perfect_weight_ += w; return;
            case GeneratorKind::profile: {
              hourly_.resize(horizon_, 0.0);
              const auto& p = batch_.profile_values(g);
              for (std::size_t t = 0; t < horizon_; ++t) hourly_[t] += w * p[t];
              return;
            }
            case GeneratorKind::thermal: thermal_.emplace_back(batch_.thermal_slot(g), w); return;
          }
        }
        throw SpecError("direction", "unknown resource '" + d.id + "'");
      }
      case Tag::storage_policy:
        throw UnsupportedDirection("IPA is not available for storage direction '" + d.id + "'");
      case Tag::portfolio:
        for (const auto& m : d.members) add(surface, m.direction, w * m.scale);
        return;
    }
  }

  const ScenarioBatch& batch_;
  std::size_t horizon_;
  double perfect_weight_ = 0.0;
  std::vector<double> hourly_;
  std::vector<std::pair<std::size_t, double>> thermal_;
};

}  // namespace detail

/// Single-pass pathwise (IPA) estimate of the UE directional derivative:
/// per scenario d_i = -sum_t v_ti * S_ti on the baseline surface.
inline GradientEstimate ipa_gradient(const ShortfallSurface& surface, const ScenarioBatch& batch,
                                     const PerturbationDirection& direction) {
  if (surface.n != batch.size() || surface.horizon != batch.horizon() ||
      surface.generator_ids != batch.resource_ids())
    throw Error("ipa_gradient: surface was not derived from this batch");
  const detail::SurfaceDirection v(surface, batch, direction);
  std::vector<double> d(surface.n);
  parallel_chunks(surface.n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) d[i] = -v.coincidence(i, surface.indicators(i));
  });
  return detail::finish_gradient(std::move(d), surface.weights, GradientEstimate::Method::ipa, 0.0);
}

struct FdOptions {
  enum class NegativeSide {
    literal,         // evaluate x - delta*v as written, flag negative ratings
    forward,         // switch to (M(x + delta v) - M(x)) / delta when -delta is infeasible
    reject,          // throw NegativeCapacity
  };
  NegativeSide negative_side = NegativeSide::literal;
};

/// Central finite difference (M(x + delta v) - M(x - delta v)) / (2 delta) on a
/// shared batch (common random numbers); std_error from paired differences.
/// Storage directions cannot be evaluated with negative ratings, so under the
/// literal policy they fall back to a forward difference when -delta is infeasible.
inline GradientEstimate fd_gradient(const SystemSpec& system, const PerturbationDirection& direction, Mw delta,
                                    const ScenarioBatch& batch, Metric metric, const FdOptions& options = {}) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw SpecError("delta", "must be positive");
  const auto d = resolve_direction(system, direction);
  const auto plus = direction_adjustment(system, d, delta);
  const auto minus = direction_adjustment(system, d, -delta);
  const bool negative = has_negative_capacity(system, minus);

  bool forward = false;
  if (negative) {
    switch (options.negative_side) {
      case FdOptions::NegativeSide::reject:
        throw NegativeCapacity("central difference at -" + std::to_string(delta) + " MW gives a negative rating for '" +
                               d.label() + "'");
      case FdOptions::NegativeSide::forward: forward = true; break;
      case FdOptions::NegativeSide::literal: forward = involves_storage(d); break;
    }
  }

  const auto up = evaluate_batch(system, batch, metric, plus);
  const auto down = evaluate_batch(system, batch, metric, forward ? Adjustment{} : minus);
  const double width = forward ? delta : 2.0 * delta;
  std::vector<double> q(up.metric.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = (up.metric[i] - down.metric[i]) / width;
  auto g = detail::finish_gradient(std::move(q), up.weights,
                                   forward ? GradientEstimate::Method::forward_fd : GradientEstimate::Method::central_fd,
                                   delta);
  g.negative_capacity = negative;
  return g;
}

/// Standard error of the ratio mean(a)/mean(b) of paired per-scenario samples
/// (delta method). Zero on exact-weight batches.
inline double ratio_std_error(const std::vector<double>& a, const std::vector<double>& b, double ratio,
                              const std::vector<double>& weights) {
  if (!weights.empty() || a.size() < 2) return 0.0;
  std::vector<double> r(a.size());
  double mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    r[i] = a[i] - ratio * b[i];
    mean_b += b[i];
  }
  mean_b /= static_cast<double>(b.size());
  if (mean_b == 0.0) return 0.0;
  return aggregate_expectation(r).std_error / std::abs(mean_b);
}

}  // namespace raccredit
