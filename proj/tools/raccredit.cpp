#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "raccredit/raccredit.hpp"

namespace fs = std::filesystem;
using namespace raccredit;

namespace {

struct Config {
  std::string system_path;
  std::size_t samples = 10000;
  std::uint64_t seed = 1;
  std::string metric = "ue";
  std::string risk = "expectation";
  std::vector<std::string> methods;
  std::vector<std::string> resources;
  std::optional<double> delta;
  std::optional<double> delta_x;
  double tolerance_mw = 0.01;
  std::vector<double> deltas;
  std::vector<double> multipliers;
  std::string out;
  unsigned threads = 0;
  bool exact = false;
  bool trace = false;
  bool timing = false;
  std::string dump_batch;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

class CsvOut {
public:
  CsvOut(const Config& cfg, const std::string& name) {
    if (cfg.out == "-") {
      os_ = &std::cout;
    } else {
      fs::path dir = cfg.out;
      if (dir.empty()) {
        const char* env = std::getenv("RACCREDIT_OUT_DIR");
        dir = env && *env ? env : ".";
      }
      fs::create_directories(dir);
      path_ = dir / name;
      file_ = std::make_unique<std::ofstream>(path_, std::ios::binary);
      if (!*file_) throw Error("cannot write '" + path_.string() + "'");
      os_ = file_.get();
    }
    *os_ << "# seed=" << cfg.seed << " engine=" << engine_version;
    if (cfg.exact) *os_ << " batch=exact";
    else *os_ << " samples=" << cfg.samples;
    *os_ << "\n";
  }

  std::ostream& operator*() { return *os_; }

private:
  fs::path path_;
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

SystemSpec load_system(const Config& cfg) {
  if (cfg.system_path.empty()) throw SpecError("system", "no system file given");
  return load_system_spec(cfg.system_path);
}

ScenarioBatch make_batch(const Config& cfg, const SystemSpec& sys) {
  ScenarioBatch batch = [&] {
    if (cfg.exact) return exact_weight_batch(sys);
    if (cfg.samples < 2) throw SpecError("samples", "at least two samples are needed for standard errors");
    return sample_batch(sys, cfg.samples, RngPolicy{cfg.seed});
  }();
  if (!cfg.dump_batch.empty()) write_thermal_dump(batch, cfg.dump_batch);
  return batch;
}

std::vector<std::string> default_resources(const SystemSpec& sys, bool include_storage) {
  std::vector<std::string> ids;
  for (const auto& g : sys.generators) ids.push_back(g.id);
  if (include_storage)
    for (const auto& s : sys.storages) ids.push_back(s.id);
  return ids;
}

// 1% of nameplate; 1% of peak load for zero-rated candidates.
double default_step(const SystemSpec& sys, const std::string& resource) {
  double rating = 0.0;
  if (auto g = sys.find_generator(resource)) rating = sys.generators[*g].nameplate_mw;
  if (auto s = sys.find_storage(resource)) rating = sys.storages[*s].power_mw;
  if (rating <= 0.0)
    for (double l : sys.load.values) rating = std::max(rating, l);
  return 0.01 * rating;
}

std::vector<Method> parse_methods(const std::vector<std::string>& names, std::vector<Method> fallback) {
  if (names.empty()) return fallback;
  std::vector<Method> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

void require_expectation(const Config& cfg) {
  if (parse_risk(cfg.risk).kind != RiskOperator::Kind::expectation)
    throw SpecError("risk", "accreditation supports the expectation operator only");
}

int cmd_assess(const Config& cfg) {
  const auto sys = load_system(cfg);
  const auto risk = parse_risk(cfg.risk);
  parse_metric(cfg.metric);
  const auto batch = make_batch(cfg, sys);
  CsvOut out(cfg, "assess.csv");
  *out << "metric,risk,value,std_error,rse,ci95_halfwidth\n";
  for (Metric m : {Metric::ue, Metric::lolh, Metric::lold}) {
    const auto eval = evaluate_batch(sys, batch, m);
    const auto est = apply_risk(risk, eval.metric, eval.weights);
    *out << (m == Metric::ue ? "eue" : to_string(m)) << ',' << risk.label() << ',' << fmt(est.mean) << ','
         << fmt(est.std_error) << ',' << (est.rse_defined ? fmt(est.rse) : "undefined") << ','
         << fmt(est.ci95_halfwidth) << '\n';
  }
  return 0;
}

int cmd_accredit(const Config& cfg) {
  const auto sys = load_system(cfg);
  require_expectation(cfg);
  const auto metric = parse_metric(cfg.metric);
  const auto methods = parse_methods(cfg.methods, {Method::mri_ipa, Method::mri_fd, Method::elcc_bisection,
                                                   Method::elcc_secant});
  const auto resources = cfg.resources.empty() ? default_resources(sys, true) : cfg.resources;
  const auto batch = make_batch(cfg, sys);
  AccreditationStudy study(sys, batch, metric);

  std::vector<AccreditationReport> ipa;
  for (Method m : methods)
    if (m == Method::mri_ipa) {
      ipa = study.mri_ipa(resources);
      break;
    }

  std::vector<AccreditationReport> reports;
  std::vector<SolverTrace> traces;
  for (std::size_t r = 0; r < resources.size(); ++r)
    for (Method m : methods) {
      const auto& id = resources[r];
      if (m == Method::mri_ipa) {
        reports.push_back(ipa[r]);
      } else if (m == Method::mri_fd) {
        reports.push_back(study.mri_fd(id, cfg.delta.value_or(default_step(sys, id))));
      } else {
        auto res = study.elcc(id, cfg.delta_x.value_or(default_step(sys, id)), m, cfg.tolerance_mw);
        reports.push_back(res.report);
        traces.push_back(std::move(res.trace));
      }
    }

  CsvOut out(cfg, "accredit.csv");
  *out << "resource_id,method,alpha,l_c_mw,delta_x_mw,iterations,simulation_runs,stderr,wall_time_s,flags\n";
  for (const auto& rep : reports) {
    *out << rep.resource_id << ',' << to_string(rep.method) << ',' << fmt(rep.alpha) << ','
         << (rep.l_c ? fmt(*rep.l_c) : "") << ',' << fmt(rep.delta_x) << ',' << rep.iterations << ','
         << rep.simulation_runs << ',' << fmt(rep.gradient_stderr) << ',' << (cfg.timing ? fmt(rep.wall_time) : "")
         << ',' << (rep.alpha_out_of_range ? "alpha_out_of_range" : "") << '\n';
  }
  if (cfg.trace) {
    CsvOut t(cfg, "accredit_trace.csv");
    *t << "resource_id,method,step,c_mw,g,g_stderr,bracket_lo_mw,bracket_hi_mw,kind,convergence\n";
    for (const auto& tr : traces)
      for (std::size_t k = 0; k < tr.steps.size(); ++k) {
        const auto& s = tr.steps[k];
        *t << tr.resource_id << ',' << to_string(tr.method) << ',' << k << ',' << fmt(s.c) << ',' << fmt(s.g) << ','
           << fmt(s.g_stderr) << ',' << fmt(s.bracket_lo) << ',' << fmt(s.bracket_hi) << ',' << s.kind << ','
           << (k + 1 == tr.steps.size() ? tr.convergence_reason : "") << '\n';
      }
  }
  return 0;
}

std::string single_resource(const Config& cfg) {
  if (cfg.resources.size() != 1) throw SpecError("resources", "sweeps take exactly one resource");
  return cfg.resources.front();
}

int cmd_sweep_step(const Config& cfg) {
  const auto sys = load_system(cfg);
  require_expectation(cfg);
  if (cfg.deltas.empty()) throw SpecError("deltas", "sweep list is empty");
  const auto resource = single_resource(cfg);
  const auto methods = parse_methods(cfg.methods, {Method::mri_fd});
  const auto batch = make_batch(cfg, sys);
  const auto rows = sweep_step_size(sys, batch, resource, cfg.deltas, methods, cfg.tolerance_mw,
                                    parse_metric(cfg.metric));
  CsvOut out(cfg, "sweep_step.csv");
  *out << "resource_id,delta_mw,method,alpha,stderr,l_c_mw,iterations,simulation_runs\n";
  for (const auto& r : rows)
    *out << resource << ',' << fmt(r.delta) << ',' << to_string(r.method) << ',' << fmt(r.alpha) << ','
         << fmt(r.stderr_alpha) << ',' << (r.l_c ? fmt(*r.l_c) : "") << ',' << r.iterations << ','
         << r.simulation_runs << '\n';
  return 0;
}

int cmd_sweep_load(const Config& cfg) {
  const auto sys = load_system(cfg);
  require_expectation(cfg);
  if (cfg.multipliers.empty()) throw SpecError("multipliers", "sweep list is empty");
  const auto resource = single_resource(cfg);
  const auto methods = parse_methods(cfg.methods, {Method::mri_fd});
  const auto batch = make_batch(cfg, sys);
  LoadSweepParams params;
  params.metric = parse_metric(cfg.metric);
  params.delta = cfg.delta.value_or(default_step(sys, resource));
  params.delta_x = cfg.delta_x.value_or(default_step(sys, resource));
  params.tolerance_mw = cfg.tolerance_mw;
  CsvOut out(cfg, "sweep_load.csv");
  *out << "resource_id,multiplier,method,alpha,stderr,baseline_metric,flag\n";
  for (Method m : methods)
    for (const auto& r : sweep_load_scale(sys, batch, cfg.multipliers, resource, m, params))
      *out << resource << ',' << fmt(r.multiplier) << ',' << to_string(r.method) << ','
           << (r.adequate ? "" : fmt(r.alpha)) << ',' << (r.adequate ? "" : fmt(r.stderr_alpha)) << ','
           << fmt(r.baseline_metric) << ',' << (r.adequate ? "adequate" : "") << '\n';
  return 0;
}

int cmd_oracle_check(const Config& cfg) {
  const auto sys = load_system(cfg);
  const auto exact = oracle_assess(sys);
  std::vector<std::string> resources = cfg.resources;
  if (resources.empty())
    for (const auto& g : sys.generators) resources.push_back(g.id);
  std::vector<std::pair<std::string, double>> exact_grads;
  exact_grads.emplace_back("perfect", oracle_gradient(sys, PerturbationDirection::perfect()));
  for (const auto& id : resources)
    exact_grads.emplace_back(id, oracle_gradient(sys, PerturbationDirection::resource(id)));

  if (cfg.exact) throw SpecError("exact", "oracle-check compares against a sampled batch");
  if (cfg.samples < 2) throw SpecError("samples", "at least two samples are needed for standard errors");
  const auto batch = sample_batch(sys, cfg.samples, RngPolicy{cfg.seed});
  const auto surface = shortfall_surface(sys, batch);

  CsvOut out(cfg, "oracle_check.csv");
  *out << "quantity,exact,mc,std_error,z,status\n";
  bool all_pass = true;
  auto row = [&](const std::string& name, double truth, const RiskEstimate& est) {
    const double err = std::abs(est.mean - truth);
    const bool pass = est.std_error > 0.0 ? err <= 4.0 * est.std_error : err <= 1e-9 * std::max(1.0, std::abs(truth));
    all_pass = all_pass && pass;
    *out << name << ',' << fmt(truth) << ',' << fmt(est.mean) << ',' << fmt(est.std_error) << ','
         << (est.std_error > 0.0 ? fmt((est.mean - truth) / est.std_error) : "") << ',' << (pass ? "PASS" : "FAIL")
         << '\n';
  };
  row("eue", exact.eue, evaluate_batch(sys, batch, Metric::ue).estimate());
  row("lolh", exact.lolh, evaluate_batch(sys, batch, Metric::lolh).estimate());
  row("lold", exact.lold, evaluate_batch(sys, batch, Metric::lold).estimate());
  for (const auto& [id, truth] : exact_grads) {
    const auto dir = id == "perfect" && !sys.find_generator(id) ? PerturbationDirection::perfect()
                                                                : PerturbationDirection::resource(id);
    const auto g = ipa_gradient(surface, batch, resolve_direction(sys, dir));
    RiskEstimate est;
    est.mean = g.value;
    est.std_error = g.std_error;
    row("gradient:" + id, truth, est);
  }
  *out << "# overall," << (all_pass ? "PASS" : "FAIL") << '\n';
  std::cerr << (all_pass ? "PASS" : "FAIL") << '\n';
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Resource adequacy capacity accreditation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI study configuration");
  app.set_version_flag("--version", engine_version);

  Config cfg;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--system", cfg.system_path, "System description (JSON)")->required();
    sub->add_option("--samples", cfg.samples, "Monte Carlo scenarios");
    sub->add_option("--seed", cfg.seed, "Master seed");
    sub->add_option("--metric", cfg.metric, "ue | lolh | lold");
    sub->add_option("--risk", cfg.risk, "expectation | cvar:<beta>");
    sub->add_option("--out", cfg.out, "Output directory ('-' for stdout)");
    sub->add_option("--threads", cfg.threads, "Worker thread cap (0 = all cores)");
    sub->add_option("--resources", cfg.resources, "Resource ids")->delimiter(',');
    sub->add_flag("--exact", cfg.exact, "Use the exact-weight outage-state batch instead of sampling");
    sub->add_option("--dump-batch", cfg.dump_batch, "Write thermal availability flags to this file");
  };
  auto accreditation = [&](CLI::App* sub) {
    sub->add_option("--methods", cfg.methods, "mri_ipa, mri_fd, elcc_bisection, elcc_secant, elcc_newton_ipa")
        ->delimiter(',');
    sub->add_option("--delta", cfg.delta, "Finite-difference step (MW)");
    sub->add_option("--delta-x", cfg.delta_x, "ELCC perturbation size (MW)");
    sub->add_option("--tolerance-mw", cfg.tolerance_mw, "ELCC bracket tolerance (MW)");
  };

  auto* assess = app.add_subcommand("assess", "Adequacy metrics with standard errors");
  common(assess);
  auto* accredit = app.add_subcommand("accredit", "Accreditation factors per resource and method");
  common(accredit);
  accreditation(accredit);
  accredit->add_flag("--trace", cfg.trace, "Also write the ELCC solver trace");
  accredit->add_flag("--timing", cfg.timing, "Record wall time (makes output nondeterministic)");
  auto* sweep_step = app.add_subcommand("sweep-step", "Accreditation factor against step size");
  common(sweep_step);
  accreditation(sweep_step);
  sweep_step->add_option("--deltas", cfg.deltas, "Ascending step sizes (MW)")->delimiter(',');
  auto* sweep_load = app.add_subcommand("sweep-load", "Accreditation factor against load multiplier");
  common(sweep_load);
  accreditation(sweep_load);
  sweep_load->add_option("--multipliers", cfg.multipliers, "Load multipliers")->delimiter(',');
  auto* oracle = app.add_subcommand("oracle-check", "Sampled estimates against exact enumeration");
  common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  set_thread_limit(cfg.threads);
  try {
    if (assess->parsed()) return cmd_assess(cfg);
    if (accredit->parsed()) return cmd_accredit(cfg);
    if (sweep_step->parsed()) return cmd_sweep_step(cfg);
    if (sweep_load->parsed()) return cmd_sweep_load(cfg);
    if (oracle->parsed()) return cmd_oracle_check(cfg);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
