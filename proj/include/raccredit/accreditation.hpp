#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raccredit/core.hpp"
#include "raccredit/dispatch.hpp"
#include "raccredit/gradient.hpp"
#include "raccredit/metrics.hpp"
#include "raccredit/scenario.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

enum class Method { elcc_bisection, elcc_secant, elcc_newton_ipa, mri_fd, mri_ipa };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::elcc_bisection: return "elcc_bisection";
    case Method::elcc_secant: return "elcc_secant";
    case Method::elcc_newton_ipa: return "elcc_newton_ipa";
    case Method::mri_fd: return "mri_fd";
    case Method::mri_ipa: return "mri_ipa";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "elcc_bisection" || s == "bisection") return Method::elcc_bisection;
  if (s == "elcc_secant" || s == "secant") return Method::elcc_secant;
  if (s == "elcc_newton_ipa" || s == "newton_ipa" || s == "newton") return Method::elcc_newton_ipa;
  if (s == "mri_fd") return Method::mri_fd;
  if (s == "mri_ipa") return Method::mri_ipa;
  throw SpecError("methods", "unknown method '" + s + "'");
}

inline bool is_elcc(Method m) {
  return m == Method::elcc_bisection || m == Method::elcc_secant || m == Method::elcc_newton_ipa;
}

struct AccreditationReport {
  std::string resource_id;
  Method method = Method::mri_ipa;
  double alpha = 0.0;
  std::optional<Mw> l_c;  // ELCC methods only
  Mw delta_x = 0.0;       // perturbation size (delta for mri_fd)
  std::size_t iterations = 0;
  std::size_t simulation_runs = 0;
  double gradient_stderr = 0.0;  // standard error of alpha
  double wall_time = 0.0;        // seconds
  bool alpha_out_of_range = false;
};

struct SolverStep {
  Mw c = 0.0;
  double g = 0.0;
  double g_stderr = 0.0;
  Mw bracket_lo = 0.0;
  Mw bracket_hi = 0.0;
  std::string kind;  // endpoint, bisection, secant, newton
};

struct SolverTrace {
  std::string resource_id;
  Method method = Method::elcc_bisection;
  std::vector<SolverStep> steps;
  std::string convergence_reason;
};

/// Which form of the ELCC condition the solver drives to zero.
enum class ElccForm {
  firm_capacity,  // M(x + c*1, L) - M(x + dx*A, L)
  load_shift,     // M(x, L) - M(x + dx*A, L + c*1)
};

struct StudyOptions {
  double rse_ceiling = 0.05;       // baseline RSE gate for single-pass IPA
  std::size_t max_iterations = 200;
  double noise_multiplier = 2.0;   // |g| below this many std errors counts as zero
  FdOptions fd;
};

struct ElccResult {
  AccreditationReport report;
  SolverTrace trace;
};

struct StepSweepRow {
  Mw delta = 0.0;
  Method method = Method::mri_fd;
  double alpha = 0.0;
  double stderr_alpha = 0.0;
  std::optional<Mw> l_c;
  std::size_t iterations = 0;
  std::size_t simulation_runs = 0;
};

struct LoadSweepRow {
  double multiplier = 1.0;
  Method method = Method::mri_fd;
  bool adequate = false;
  double alpha = 0.0;
  double stderr_alpha = 0.0;
  double baseline_metric = 0.0;
};

struct PortfolioResult {
  double baseline_metric = 0.0;
  double joint_metric = 0.0;
  double joint_reduction = 0.0;               // baseline - joint
  std::vector<std::string> member_labels;
  std::vector<double> standalone_reduction;   // baseline - standalone, per member
  std::vector<double> standalone_alpha;
  double joint_alpha = 0.0;
  double additivity_gap = 0.0;                // joint - sum of standalone reductions
  double gap_std_error = 0.0;
  std::size_t simulation_runs = 0;
};

/// One accreditation study: a system, a shared scenario batch and a metric.
/// Every method evaluates perturbed systems on the same batch, caches the
/// baseline and the perfect-resource normalization, and counts the full
/// passes over the batch it performs (simulation runs).
class AccreditationStudy {
public:
  AccreditationStudy(SystemSpec system, const ScenarioBatch& batch, Metric metric = Metric::ue,
                     StudyOptions options = {})
      : system_(std::move(system)), batch_(batch), metric_(metric), options_(options) {
    system_.validate();
    batch_.check_compatible(system_);
  }

  const SystemSpec& system() const { return system_; }
  const ScenarioBatch& batch() const { return batch_; }
  Metric metric() const { return metric_; }
  std::size_t simulation_runs() const { return runs_; }

  BatchEvaluation evaluate(const Adjustment& adj) {
    ++runs_;
    return evaluate_batch(system_, batch_, metric_, adj);
  }

  const BatchEvaluation& baseline() {
    if (!baseline_) baseline_ = evaluate({});
    return *baseline_;
  }

  RiskEstimate baseline_estimate() { return baseline().estimate(); }

  void require_shortfall() {
    if (!(baseline_estimate().mean > 0.0))
      throw AdequateBaseline("baseline " + std::string(to_string(metric_)) + " is zero");
  }

  // --- MRI via single-pass IPA ---------------------------------------------

  std::vector<AccreditationReport> mri_ipa(const std::vector<std::string>& resources) {
    const auto t0 = clock::now();
    if (metric_ != Metric::ue) throw UnsupportedDirection("IPA accreditation is only defined for UE");
    std::vector<PerturbationDirection> dirs;
    for (const auto& id : resources) {
      auto d = resolve_direction(system_, PerturbationDirection::resource(id));
      if (involves_storage(d)) throw UnsupportedDirection("IPA is not available for storage resource '" + id + "'");
      dirs.push_back(std::move(d));
    }
    ++runs_;
    const auto surface = shortfall_surface(system_, batch_);
    if (!baseline_) {
      BatchEvaluation b;
      b.metric.resize(surface.n);
      b.shortage_hours.resize(surface.n);
      for (std::size_t i = 0; i < surface.n; ++i) {
        b.metric[i] = metric_ue(surface.row(i));
        b.shortage_hours[i] = metric_lolh(surface.row(i));
      }
      b.weights = surface.weights;
      baseline_ = std::move(b);
    }
    const auto base = baseline_->estimate();
    if (!(base.mean > 0.0)) throw AdequateBaseline("baseline EUE is zero");
    if (!base.exact && base.rse > options_.rse_ceiling)
      throw Error("baseline EUE relative standard error " + std::to_string(base.rse) + " exceeds ceiling " +
                  std::to_string(options_.rse_ceiling));

    const auto perfect = ipa_gradient(surface, batch_, PerturbationDirection::perfect());
    std::vector<AccreditationReport> out;
    for (std::size_t r = 0; r < dirs.size(); ++r) {
      const auto grad = dirs[r].tag == PerturbationDirection::Tag::perfect
                            ? perfect
                            : ipa_gradient(surface, batch_, dirs[r]);
      AccreditationReport rep;
      rep.resource_id = resources[r];
      rep.method = Method::mri_ipa;
      rep.alpha = grad.value / perfect.value;
      rep.gradient_stderr = ratio_std_error(grad.per_scenario, perfect.per_scenario, rep.alpha, perfect.weights);
      rep.simulation_runs = r == 0 ? 1 : 0;
      rep.alpha_out_of_range = rep.alpha < 0.0 || rep.alpha > 1.0;
      out.push_back(std::move(rep));
    }
    const double elapsed = seconds_since(t0);
    for (auto& rep : out) rep.wall_time = elapsed / static_cast<double>(out.size());
    return out;
  }

  // --- MRI via central finite differences ----------------------------------

  AccreditationReport mri_fd(const std::string& resource, Mw delta) {
    const auto t0 = clock::now();
    if (!(delta > 0.0)) throw SpecError("delta", "must be positive");
    require_shortfall();
    const auto d = resolve_direction(system_, PerturbationDirection::resource(resource));
    const auto& perfect = perfect_pair(delta);
    const GradientEstimate* numerator = &perfect;
    GradientEstimate own;
    if (d.tag != PerturbationDirection::Tag::perfect) {
      own = difference(d, delta);
      numerator = &own;
    }
    if (perfect.value == 0.0) throw AdequateBaseline("perfect-resource sensitivity is zero at delta " + std::to_string(delta));
    AccreditationReport rep;
    rep.resource_id = resource;
    rep.method = Method::mri_fd;
    rep.delta_x = delta;
    rep.alpha = numerator->value / perfect.value;
    rep.gradient_stderr = ratio_std_error(numerator->per_scenario, perfect.per_scenario, rep.alpha, perfect.weights);
    rep.simulation_runs = 3;  // shared baseline + this resource's +/- pair
    rep.alpha_out_of_range = rep.alpha < 0.0 || rep.alpha > 1.0;
    rep.wall_time = seconds_since(t0);
    return rep;
  }

  /// Perfect-direction difference at `delta`, computed once per study.
  const GradientEstimate& perfect_pair(Mw delta) {
    auto it = perfect_cache_.find(delta);
    if (it == perfect_cache_.end())
      it = perfect_cache_.emplace(delta, difference(PerturbationDirection::perfect(), delta)).first;
    return it->second;
  }

  // --- ELCC root finding ---------------------------------------------------

  ElccResult elcc(const std::string& resource, Mw delta_x, Method method, Mw tolerance_mw,
                  ElccForm form = ElccForm::firm_capacity) {
    return elcc(resource, PerturbationDirection::resource(resource), delta_x, method, tolerance_mw, form);
  }

  ElccResult elcc(const std::string& label, const PerturbationDirection& candidate, Mw delta_x, Method method,
                  Mw tolerance_mw, ElccForm form = ElccForm::firm_capacity) {
    const auto t0 = clock::now();
    if (!is_elcc(method)) throw SpecError("method", "not an ELCC method");
    if (!(delta_x > 0.0)) throw SpecError("delta_x", "must be positive");
    if (!(tolerance_mw > 0.0)) throw SpecError("tolerance_mw", "must be positive");
    if (method == Method::elcc_newton_ipa && metric_ != Metric::ue)
      throw UnsupportedDirection("Newton-IPA needs the UE pathwise derivative");
    require_shortfall();
    const auto d = resolve_direction(system_, candidate);
    const std::size_t runs_before = runs_;

    const auto& base = baseline();
    const auto cand_adj = direction_adjustment(system_, d, delta_x);
    const auto with_candidate = evaluate(cand_adj);

    // phi(c) is nonincreasing with phi(0) >= 0 >= phi(dx)
    struct Point {
      double c, g, se, slope;  // slope: pathwise estimate of phi'(c) (UE only)
    };
    auto phi = [&](double c, const BatchEvaluation* reuse) -> Point {
      if (form == ElccForm::firm_capacity) {
        BatchEvaluation owned;
        if (!reuse) {
          Adjustment a;
          a.firm_mw = c;
          owned = evaluate(a);
          reuse = &owned;
        }
        const auto diff = paired_difference(*reuse, with_candidate);
        return {c, diff.mean, diff.std_error, -mean_of(reuse->shortage_hours, reuse->weights)};
      }
      BatchEvaluation owned;
      if (!reuse) {
        Adjustment a = cand_adj;
        a.load_mw = c;
        owned = evaluate(a);
        reuse = &owned;
      }
      const auto diff = paired_difference(base, *reuse);
      return {c, diff.mean, diff.std_error, -mean_of(reuse->shortage_hours, reuse->weights)};
    };

    ElccResult result;
    auto& trace = result.trace;
    trace.resource_id = label;
    trace.method = method;

    double lo = 0.0, hi = delta_x;
    const Point p0 = phi(0.0, form == ElccForm::firm_capacity ? &base : &with_candidate);
    const Point p1 = phi(delta_x, nullptr);
    trace.steps.push_back({p0.c, p0.g, p0.se, lo, hi, "endpoint"});
    trace.steps.push_back({p1.c, p1.g, p1.se, lo, hi, "endpoint"});
    if (p0.g < 0.0)
      throw NoSignChange("g(0) < 0 for '" + label + "': resource indistinguishable from a zero-value resource");
    if (p1.g > 0.0) throw NoSignChange("g(dx) > 0 for '" + label + "': root lies outside [0, dx]");

    const double noise = options_.noise_multiplier;
    // scale for the |g| convergence test: |dM/dc| estimated over the bracket
    const double slope_scale = std::abs(p0.g - p1.g) / delta_x;
    std::size_t iterations = 0;
    double root = 0.0;

    if (p0.g == 0.0) {
      root = 0.0;
      trace.convergence_reason = "null_resource";
    } else if (method == Method::elcc_bisection) {
      while (hi - lo > tolerance_mw) {
        const double mid = 0.5 * (lo + hi);
        const Point p = phi(mid, nullptr);
        ++iterations;
        (p.g > 0.0 ? lo : hi) = mid;
        trace.steps.push_back({mid, p.g, p.se, lo, hi, "bisection"});
      }
      root = 0.5 * (lo + hi);
      trace.convergence_reason = "bracket_width";
    } else if (p1.g == 0.0) {
      root = delta_x;
      trace.convergence_reason = "residual";
    } else {
      Point prev = p0, cur = p1;
      if (method == Method::elcc_newton_ipa) {
        prev = p1;
        cur = p0;
      }
      root = cur.c;
      for (;;) {
        if (hi - lo <= tolerance_mw) {
          root = 0.5 * (lo + hi);
          trace.convergence_reason = "bracket_width";
          break;
        }
        if (iterations >= options_.max_iterations) {
          trace.convergence_reason = "max_iterations";
          break;
        }
        double next = std::numeric_limits<double>::quiet_NaN();
        std::string kind;
        if (method == Method::elcc_secant) {
          const double denom = cur.g - prev.g;
          if (denom != 0.0 && std::abs(denom) > std::numeric_limits<double>::min())
            next = cur.c - cur.g * (cur.c - prev.c) / denom;
          kind = "secant";
        } else {
          if (cur.slope != 0.0) next = cur.c - cur.g / cur.slope;
          kind = "newton";
        }
        if (!std::isfinite(next) || next <= lo || next >= hi) {
          next = 0.5 * (lo + hi);
          kind = "bisection";
        }
        const Point p = phi(next, nullptr);
        ++iterations;
        if (p.g > 0.0) lo = next;
        else if (p.g < 0.0) hi = next;
        else lo = hi = next;
        trace.steps.push_back({p.c, p.g, p.se, lo, hi, kind});
        prev = cur;
        cur = p;
        root = p.c;
        if (std::abs(p.g) <= tolerance_mw * slope_scale) {
          trace.convergence_reason = "residual";
          break;
        }
        if (p.se > 0.0 && std::abs(p.g) < noise * p.se) {
          trace.convergence_reason = "statistical_zero";
          break;
        }
      }
    }

    auto& rep = result.report;
    rep.resource_id = label;
    rep.method = method;
    rep.delta_x = delta_x;
    rep.l_c = root;
    rep.alpha = root / delta_x;
    rep.iterations = iterations;
    rep.simulation_runs = runs_ - runs_before;
    // linearized: se(L_c) = se(phi(L_c)) / |phi'|
    const double final_se = trace.steps.back().g_stderr;
    rep.gradient_stderr = slope_scale > 0.0 ? final_se / slope_scale / delta_x : 0.0;
    rep.alpha_out_of_range = rep.alpha < 0.0 || rep.alpha > 1.0;
    rep.wall_time = seconds_since(t0);
    return result;
  }

  // --- Step-size sweep -----------------------------------------------------

  std::vector<StepSweepRow> sweep_step_size(const std::string& resource, const std::vector<Mw>& deltas,
                                            const std::vector<Method>& methods, Mw tolerance_mw) {
    if (deltas.empty()) throw SpecError("deltas", "sweep list is empty");
    if (methods.empty()) throw SpecError("methods", "method list is empty");
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      if (!(deltas[k] > 0.0)) throw SpecError("deltas", "step sizes must be positive");
      if (k > 0 && !(deltas[k] > deltas[k - 1])) throw SpecError("deltas", "step sizes must be ascending");
    }
    std::vector<StepSweepRow> rows;
    for (Mw delta : deltas)
      for (Method m : methods) {
        StepSweepRow row;
        row.delta = delta;
        row.method = m;
        if (m == Method::mri_fd) {
          const auto rep = mri_fd(resource, delta);
          row.alpha = rep.alpha;
          row.stderr_alpha = rep.gradient_stderr;
          row.simulation_runs = rep.simulation_runs;
        } else if (m == Method::mri_ipa) {
          const auto rep = mri_ipa({resource}).front();
          row.alpha = rep.alpha;
          row.stderr_alpha = rep.gradient_stderr;
          row.simulation_runs = rep.simulation_runs;
        } else {
          const auto res = elcc(resource, delta, m, tolerance_mw);
          row.alpha = res.report.alpha;
          row.stderr_alpha = res.report.gradient_stderr;
          row.l_c = res.report.l_c;
          row.iterations = res.report.iterations;
          row.simulation_runs = res.report.simulation_runs;
        }
        rows.push_back(row);
      }
    return rows;
  }

  // --- Portfolio perturbation ----------------------------------------------

  /// Forward perturbation of a portfolio jointly and of each member alone.
  PortfolioResult portfolio_perturb(const PerturbationDirection& portfolio, Mw delta) {
    if (!(delta > 0.0)) throw SpecError("delta", "must be positive");
    if (portfolio.tag != PerturbationDirection::Tag::portfolio || portfolio.members.empty())
      throw SpecError("directions", "portfolio must contain at least one member");
    const auto p = resolve_direction(system_, portfolio);
    const std::size_t runs_before = runs_;
    const auto& base = baseline();

    PortfolioResult out;
    out.baseline_metric = base.estimate().mean;
    const auto joint = evaluate(direction_adjustment(system_, p, delta));
    out.joint_metric = joint.estimate().mean;
    out.joint_reduction = out.baseline_metric - out.joint_metric;

    double total_mw = 0.0;
    std::vector<double> gap(joint.metric.size());
    for (std::size_t i = 0; i < gap.size(); ++i) gap[i] = base.metric[i] - joint.metric[i];
    double standalone_sum = 0.0;
    for (const auto& m : p.members) {
      const double mw = delta * m.scale;
      total_mw += mw;
      const auto alone = evaluate(direction_adjustment(system_, m.direction, mw));
      const double reduction = out.baseline_metric - alone.estimate().mean;
      for (std::size_t i = 0; i < gap.size(); ++i) gap[i] -= base.metric[i] - alone.metric[i];
      out.member_labels.push_back(m.direction.label());
      out.standalone_reduction.push_back(reduction);
      standalone_sum += reduction;
      const double perfect = out.baseline_metric - firm_metric(mw);
      out.standalone_alpha.push_back(perfect > 0.0 ? reduction / perfect : 0.0);
    }
    const double perfect_total = out.baseline_metric - firm_metric(total_mw);
    out.joint_alpha = perfect_total > 0.0 ? out.joint_reduction / perfect_total : 0.0;
    out.additivity_gap = out.joint_reduction - standalone_sum;
    out.gap_std_error = aggregate(gap, base.weights).std_error;
    out.simulation_runs = runs_ - runs_before;
    return out;
  }

private:
  using clock = std::chrono::steady_clock;

  static double seconds_since(clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
  }

  static double mean_of(const std::vector<double>& v, const std::vector<double>& w) {
    double acc = 0.0;
    if (!w.empty()) {
      for (std::size_t i = 0; i < v.size(); ++i) acc += w[i] * v[i];
      return acc;
    }
    for (double x : v) acc += x;
    return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
  }

  double firm_metric(Mw mw) {
    auto it = firm_cache_.find(mw);
    if (it == firm_cache_.end()) {
      Adjustment a;
      a.firm_mw = mw;
      it = firm_cache_.emplace(mw, evaluate(a).estimate().mean).first;
    }
    return it->second;
  }

  GradientEstimate difference(const PerturbationDirection& d, Mw delta) {
    runs_ += 2;
    return fd_gradient(system_, d, delta, batch_, metric_, options_.fd);
  }

  SystemSpec system_;
  const ScenarioBatch& batch_;
  Metric metric_;
  StudyOptions options_;
  std::size_t runs_ = 0;
  std::optional<BatchEvaluation> baseline_;
  std::map<double, GradientEstimate> perfect_cache_;
  std::map<double, double> firm_cache_;
};

// Free-function entry points.

inline std::vector<AccreditationReport> accredit_mri_ipa(const SystemSpec& system, const ScenarioBatch& batch,
                                                         const std::vector<std::string>& resources,
                                                         const StudyOptions& options = {}) {
  AccreditationStudy study(system, batch, Metric::ue, options);
  return study.mri_ipa(resources);
}

inline AccreditationReport accredit_mri_fd(const SystemSpec& system, const ScenarioBatch& batch,
                                           const std::string& resource, Mw delta, Metric metric = Metric::ue,
                                           const StudyOptions& options = {}) {
  AccreditationStudy study(system, batch, metric, options);
  return study.mri_fd(resource, delta);
}

inline ElccResult elcc_solve(const SystemSpec& system, const ScenarioBatch& batch, const std::string& resource,
                             Mw delta_x, Method method, Mw tolerance_mw, Metric metric = Metric::ue,
                             ElccForm form = ElccForm::firm_capacity, const StudyOptions& options = {}) {
  AccreditationStudy study(system, batch, metric, options);
  return study.elcc(resource, delta_x, method, tolerance_mw, form);
}

inline std::vector<StepSweepRow> sweep_step_size(const SystemSpec& system, const ScenarioBatch& batch,
                                                 const std::string& resource, const std::vector<Mw>& deltas,
                                                 const std::vector<Method>& methods, Mw tolerance_mw,
                                                 Metric metric = Metric::ue) {
  AccreditationStudy study(system, batch, metric);
  return study.sweep_step_size(resource, deltas, methods, tolerance_mw);
}

struct LoadSweepParams {
  Mw delta = 0.5;         // mri_fd
  Mw delta_x = 10.0;      // elcc_*
  Mw tolerance_mw = 0.01;
  Metric metric = Metric::ue;
};

/// Accreditation factor at each load multiplier, all on the same batch.
/// Multipliers at which the baseline has no shortfall yield "adequate" rows.
inline std::vector<LoadSweepRow> sweep_load_scale(const SystemSpec& system, const ScenarioBatch& batch,
                                                  const std::vector<double>& multipliers, const std::string& resource,
                                                  Method method, const LoadSweepParams& params = {}) {
  if (multipliers.empty()) throw SpecError("multipliers", "sweep list is empty");
  for (double m : multipliers)
    if (!(m > 0.0)) throw SpecError("multipliers", "load multipliers must be positive");
  std::vector<LoadSweepRow> rows;
  for (double m : multipliers) {
    AccreditationStudy study(scale_load(system, m), batch, params.metric);
    LoadSweepRow row;
    row.multiplier = m;
    row.method = method;
    row.baseline_metric = study.baseline_estimate().mean;
    if (!(row.baseline_metric > 0.0)) {
      row.adequate = true;
      rows.push_back(row);
      continue;
    }
    if (method == Method::mri_ipa) {
      const auto rep = study.mri_ipa({resource}).front();
      row.alpha = rep.alpha;
      row.stderr_alpha = rep.gradient_stderr;
    } else if (method == Method::mri_fd) {
      const auto rep = study.mri_fd(resource, params.delta);
      row.alpha = rep.alpha;
      row.stderr_alpha = rep.gradient_stderr;
    } else {
      const auto res = study.elcc(resource, params.delta_x, method, params.tolerance_mw);
      row.alpha = res.report.alpha;
      row.stderr_alpha = res.report.gradient_stderr;
    }
    rows.push_back(row);
  }
  return rows;
}

inline PortfolioResult portfolio_perturb(const SystemSpec& system, const ScenarioBatch& batch,
                                         const PerturbationDirection& portfolio, Mw delta,
                                         Metric metric = Metric::ue) {
  AccreditationStudy study(system, batch, metric);
  return study.portfolio_perturb(portfolio, delta);
}

}  // namespace raccredit
