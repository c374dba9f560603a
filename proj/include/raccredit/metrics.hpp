#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/dispatch.hpp"

namespace raccredit {

enum class Metric { ue, lolh, lold };

inline const char* to_string(Metric m) {
  switch (m) {
    case Metric::ue: return "ue";
    case Metric::lolh: return "lolh";
    case Metric::lold: return "lold";
  }
  return "?";
}

inline Metric parse_metric(const std::string& s) {
  if (s == "ue" || s == "eue") return Metric::ue;
  if (s == "lolh") return Metric::lolh;
  if (s == "lold") return Metric::lold;
  throw SpecError("metric", "unknown metric '" + s + "'");
}

/// Unserved energy: sum of hourly shortfall.
inline double metric_ue(std::span<const double> shortfall) {
  double total = 0.0;
  for (double v : shortfall) total += v;
  return total;
}

/// Loss-of-load hours: number of hours with strictly positive shortfall.
inline double metric_lolh(std::span<const double> shortfall) {
  std::size_t hours = 0;
  for (double v : shortfall) hours += v > 0.0;
  return static_cast<double>(hours);
}

/// Loss-of-load days: days (contiguous blocks from hour 0) with any shortage hour.
inline double metric_lold(std::span<const double> shortfall, std::size_t hours_per_day) {
  if (hours_per_day == 0 || shortfall.size() % hours_per_day != 0)
    throw SpecError("hours_per_day", "shortfall length is not a whole number of days");
  std::size_t days = 0;
  for (std::size_t d = 0; d < shortfall.size(); d += hours_per_day) {
    const auto first = shortfall.begin() + static_cast<std::ptrdiff_t>(d);
    days += std::any_of(first, first + static_cast<std::ptrdiff_t>(hours_per_day), [](double v) { return v > 0.0; });
  }
  return static_cast<double>(days);
}

inline double metric_value(Metric m, std::span<const double> shortfall, std::size_t hours_per_day) {
  switch (m) {
    case Metric::ue: return metric_ue(shortfall);
    case Metric::lolh: return metric_lolh(shortfall);
    case Metric::lold: return metric_lold(shortfall, hours_per_day);
  }
  return 0.0;
}

/// Cross-scenario estimate of a metric with CLT statistics.
struct RiskEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double rse = 0.0;          // std_error / mean; meaningful only if rse_defined
  bool rse_defined = false;  // false when mean <= 0
  double ci95_halfwidth = 0.0;
  std::size_t n = 0;
  bool exact = false;        // computed from exact state weights, no sampling error
};

namespace detail {

inline RiskEstimate finish(double mean, double std_error, std::size_t n, bool exact) {
  RiskEstimate r;
  r.mean = mean;
  r.std_error = std_error;
  r.n = n;
  r.exact = exact;
  r.ci95_halfwidth = 1.96 * std_error;
  r.rse_defined = mean > 0.0;
  r.rse = r.rse_defined ? std_error / mean : 0.0;
  return r;
}

}  // namespace detail

/// Sample mean with standard error s/sqrt(n). Summation runs in index order.
inline RiskEstimate aggregate_expectation(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) throw Error("aggregate_expectation: need at least two scenarios");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  return detail::finish(mean, s / std::sqrt(static_cast<double>(n)), n, false);
}

/// Exact expectation over enumerated states with probabilities `weights`.
inline RiskEstimate aggregate_weighted(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) throw Error("aggregate_weighted: size mismatch");
  double mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) mean += weights[i] * values[i];
  return detail::finish(mean, 0.0, values.size(), true);
}

/// Dispatches to the exact or sampled aggregate depending on the batch kind.
inline RiskEstimate aggregate(std::span<const double> values, std::span<const double> weights) {
  return weights.empty() ? aggregate_expectation(values) : aggregate_weighted(values, weights);
}

/// Upper-tail CVaR: mean of the worst ceil((1 - beta) n) scenario values.
inline RiskEstimate aggregate_cvar(std::span<const double> values, double beta) {
  if (!(beta >= 0.0 && beta < 1.0)) throw SpecError("risk", "CVaR tail level must lie in [0, 1)");
  const std::size_t n = values.size();
  const auto tail = static_cast<std::size_t>(std::ceil((1.0 - beta) * static_cast<double>(n) - 1e-9));
  if (tail == 0 || n == 0) throw Error("aggregate_cvar: empty tail");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.resize(tail);
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / static_cast<double>(tail);
  double se = 0.0;
  if (tail >= 2) {
    double ss = 0.0;
    for (double v : sorted) ss += (v - mean) * (v - mean);
    se = std::sqrt(ss / static_cast<double>(tail - 1)) / std::sqrt(static_cast<double>(tail));
  }
  return detail::finish(mean, se, tail, false);
}

struct RiskOperator {
  enum class Kind { expectation, cvar };
  Kind kind = Kind::expectation;
  double beta = 0.0;

  std::string label() const {
    return kind == Kind::expectation ? "expectation" : "cvar(" + std::to_string(beta) + ")";
  }
};

inline RiskOperator parse_risk(const std::string& s) {
  if (s == "expectation" || s == "mean") return {};
  // cvar:<beta> or cvar(<beta>)
  if (s.rfind("cvar", 0) == 0 && s.size() > 5) {
    std::string num = s.substr(5);
    if (!num.empty() && num.back() == ')') num.pop_back();
    try {
      std::size_t used = 0;
      const double beta = std::stod(num, &used);
      if (used == num.size() && beta >= 0.0 && beta < 1.0) return {RiskOperator::Kind::cvar, beta};
    } catch (const std::exception&) {
    }
  }
  throw SpecError("risk", "expected 'expectation' or 'cvar:<beta>' with beta in [0, 1), got '" + s + "'");
}

inline RiskEstimate apply_risk(const RiskOperator& op, std::span<const double> values, std::span<const double> weights) {
  if (op.kind == RiskOperator::Kind::expectation) return aggregate(values, weights);
  if (!weights.empty()) throw Error("CVaR is not defined on exact-weight pseudo-batches");
  return aggregate_cvar(values, op.beta);
}

/// Per-scenario metric values for one evaluation of a (possibly perturbed)
/// system, plus each scenario's count of shortage hours (the pathwise
/// derivative of UE along the perfect direction is minus this count).
struct BatchEvaluation {
  std::vector<double> metric;
  std::vector<double> shortage_hours;
  std::vector<double> weights;

  RiskEstimate estimate() const { return aggregate(metric, weights); }
};

inline BatchEvaluation evaluate_batch(const SystemSpec& system, const ScenarioBatch& batch, Metric metric,
                                      const Adjustment& adj = {}) {
  batch.check_compatible(system);
  const CapacityModel model(system, adj);
  const std::size_t n = batch.size();
  const std::size_t T = system.horizon_hours;
  BatchEvaluation out;
  out.metric.resize(n);
  out.shortage_hours.resize(n);
  out.weights = batch.weights();
  parallel_chunks(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    std::vector<double> supply(T);
    std::vector<double> shortfall(T);
    for (std::size_t i = begin; i < end; ++i) {
      detail::batch_supply(model, batch, i, supply);
      settle_hours(model.load(), supply, model.storages(), shortfall);
      out.metric[i] = metric_value(metric, shortfall, system.hours_per_day);
      out.shortage_hours[i] = metric_lolh(shortfall);
    }
  });
  return out;
}

/// Mean and standard error of paired per-scenario differences a_i - b_i.
inline RiskEstimate paired_difference(const BatchEvaluation& a, const BatchEvaluation& b) {
  std::vector<double> diff(a.metric.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.metric[i] - b.metric[i];
  return aggregate(diff, a.weights);
}

}  // namespace raccredit
