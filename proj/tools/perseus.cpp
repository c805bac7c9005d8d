#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "perseus/baselines.hpp"
#include "perseus/http.hpp"
#include "perseus/oracle.hpp"
#include "perseus/serde.hpp"
#include "perseus/service.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOpts {
  std::int64_t quantum_us = perseus::kDefaultQuantumUs;
  double blocking_watts = perseus::kDefaultBlockingWatts;
};

std::string default_workdir() {
  const char* env = std::getenv("PERSEUS_WORKDIR");
  return env && *env ? env : "perseus-work";
}

int run_partition(const std::string& layers_file, int stages) {
  const auto layers = perseus::load_layer_latencies(layers_file);
  const auto result = perseus::min_imbalance_partition(layers, stages);
  std::cout << perseus::partition_json(result).dump(2) << "\n";
  return 0;
}

int run_optimize(const GlobalOpts& g, const std::string& dag_spec,
                 const std::string& profiles_file, std::int64_t tau_us,
                 const std::string& out_dir) {
  if (tau_us <= 0 || tau_us % g.quantum_us != 0)
    throw std::invalid_argument("tau-us must be a positive multiple of quantum-us");
  // Read each input once so pipes and process substitutions work, then reuse
  // the captured text for the self-contained copies in the output directory.
  std::string dag_text;
  const bool dag_from_file = dag_spec.rfind("file:", 0) == 0;
  const perseus::NodeDag dag =
      dag_from_file ? (dag_text = perseus::detail::read_text(dag_spec.substr(5)),
                       perseus::custom_dag_from_json(
                           perseus::detail::parse_json(dag_text, dag_spec.substr(5))))
                    : perseus::parse_dag_spec(dag_spec);
  const std::string profiles_text = perseus::detail::read_text(profiles_file);
  const perseus::ProfileSet set = perseus::profile_set_from_json(
      perseus::detail::parse_json(profiles_text, profiles_file), g.quantum_us, g.blocking_watts);
  const perseus::CostModel model = perseus::CostModel::build(set, g.quantum_us);
  perseus::all_max_assignment(dag, model);  // reject missing classes before optimizing

  const perseus::Frontier frontier =
      perseus::discover_frontier(dag, model, tau_us / g.quantum_us);

  const fs::path out(out_dir);
  std::string recorded_spec = dag_spec;
  if (dag_from_file) {
    perseus::detail::write_text(out / "dag.json", dag_text);
    recorded_spec = "file:dag.json";
  }
  perseus::OptimizeManifest manifest;
  manifest.dag_spec = recorded_spec;
  manifest.tau_us = tau_us;
  manifest.quantum_us = g.quantum_us;
  manifest.p_blocking_watts = model.blocking.watts;
  perseus::write_frontier_artifacts(out, frontier, manifest);
  perseus::detail::write_text(out / "profiles.json", profiles_text);

  std::cout << "T_min_us=" << frontier.t_min * g.quantum_us
            << " T_star_us=" << frontier.t_star * g.quantum_us << " steps=" << frontier.steps
            << "\n";
  return 0;
}

int run_emulate(const std::string& schedule_path, double factor, int pipelines,
                const std::string& out_dir) {
  if (factor < 1.0) throw std::invalid_argument("straggler-factor must be >= 1");
  if (pipelines < 1) throw std::invalid_argument("pipelines must be >= 1");
  fs::path dir(schedule_path);
  if (fs::is_regular_file(dir)) dir = dir.parent_path();
  const perseus::OptimizeManifest manifest = perseus::load_manifest(dir);
  const auto quantum = manifest.quantum_us;
  const perseus::ProfileSet set =
      perseus::load_profile_set(dir / "profiles.json", quantum, manifest.p_blocking_watts);
  const perseus::CostModel model = perseus::CostModel::build(set, quantum);
  const perseus::NodeDag dag = perseus::parse_dag_spec(manifest.dag_spec, dir);
  const perseus::Frontier frontier = perseus::load_frontier_artifacts(dir, manifest);

  perseus::ClusterScenario scenario;
  scenario.pipelines = pipelines;
  scenario.factor = factor;
  std::vector<double> factors;
  const double limit = std::max(1.5, factor);
  for (int i = 0; 1.0 + 0.05 * i <= limit + 1e-9; ++i) factors.push_back(1.0 + 0.05 * i);
  if (std::none_of(factors.begin(), factors.end(),
                   [&](double f) { return std::abs(f - factor) < 1e-9; })) {
    factors.push_back(factor);
    std::sort(factors.begin(), factors.end());
  }
  const auto rows = perseus::straggler_savings(frontier, dag, model, scenario, factors);

  const fs::path out = out_dir.empty() ? dir : fs::path(out_dir);
  perseus::detail::write_text(out / "savings.csv", perseus::savings_csv(rows));

  const perseus::Quanta t_prime =
      std::llround(factor * static_cast<double>(frontier.t_min));
  const perseus::EnergySchedule& sched = perseus::lookup(frontier, t_prime);
  const perseus::Timeline tl = perseus::simulate(dag, sched.realized_t);
  perseus::detail::write_text(out / "timeline.csv",
                              perseus::timeline_csv(dag, tl, sched.freq_mhz, quantum));
  perseus::detail::write_text(out / "timeline.svg",
                              perseus::timeline_svg(dag, tl, sched.freq_mhz));

  double at_factor = 0, intrinsic = 0;
  for (const auto& r : rows) {
    if (std::abs(r.factor - factor) < 1e-9) at_factor = r.savings_mj;
    if (std::abs(r.factor - 1.0) < 1e-9) intrinsic = r.savings_mj;
  }
  std::cout << "factor=" << perseus::detail::fixed3(factor)
            << " T_prime_us=" << t_prime * quantum
            << " schedule_id=" << sched.schedule_id
            << " savings_mj=" << perseus::detail::fixed3(at_factor)
            << " intrinsic_mj=" << perseus::detail::fixed3(intrinsic)
            << " extrinsic_mj=" << perseus::detail::fixed3(at_factor - intrinsic) << "\n";
  return 0;
}

int run_serve(const GlobalOpts& g, int port, const std::string& workdir, int workers) {
  if (workers < 0) throw std::invalid_argument("workers must be non-negative");
  perseus::JobManager::Options opt;
  opt.workdir = workdir;
  opt.workers = workers;
  opt.quantum_us = g.quantum_us;
  opt.p_blocking_watts = g.blocking_watts;
  perseus::JobManager manager(std::move(opt));

  httplib::Server server;
  perseus::attach_routes(server, manager);
  int bound = port;
  if (port == 0) {
    bound = server.bind_to_any_port("0.0.0.0");
    if (bound < 0) throw std::runtime_error("cannot bind a port");
  } else if (!server.bind_to_port("0.0.0.0", port)) {
    throw std::runtime_error("cannot bind port " + std::to_string(port));
  }
  std::cout << "listening on " << bound << std::endl;
  server.listen_after_bind();
  return 0;
}

int run_oracle(const GlobalOpts& g, const std::string& dag_spec,
               const std::string& profiles_file, double budget) {
  const perseus::NodeDag dag = perseus::parse_dag_spec(dag_spec);
  const perseus::ProfileSet set =
      perseus::load_profile_set(profiles_file, g.quantum_us, g.blocking_watts);
  const perseus::CostModel model = perseus::CostModel::build(set, g.quantum_us);
  const auto exact = perseus::brute_force_frontier(dag, model, budget);
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& p : exact.points) {
    nlohmann::ordered_json pj;
    pj["time_us"] = p.time * g.quantum_us;
    pj["eff_energy_mj"] = perseus::detail::round3(p.eff_energy_mj);
    pj["freq_mhz"] = p.freq_mhz;
    out.push_back(std::move(pj));
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-energy frontier characterization for pipeline-parallel training DAGs"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--quantum-us", g.quantum_us, "duration quantum in microseconds")
      ->capture_default_str();
  app.add_option("--p-blocking-watts", g.blocking_watts,
                 "blocking power used when a profile set omits it")
      ->capture_default_str();

  std::string layers_file;
  int stages = 0;
  auto* partition = app.add_subcommand("partition", "balance layers into pipeline stages");
  partition->add_option("--layers", layers_file, "JSON array of per-layer latencies")->required();
  partition->add_option("--stages", stages, "number of pipeline stages")->required();

  std::string dag_spec, profiles_file, out_dir;
  std::int64_t tau_us = perseus::kDefaultTauUs;
  auto* optimize = app.add_subcommand("optimize", "characterize the time-energy frontier");
  optimize->add_option("--dag", dag_spec, "1f1b:<N>x<M>, gpipe:<N>x<M>, or file:<path>")
      ->required();
  optimize->add_option("--profiles", profiles_file, "profile set JSON")->required();
  optimize->add_option("--tau-us", tau_us, "frontier step in microseconds")
      ->capture_default_str();
  optimize->add_option("--out", out_dir, "artifact output directory")->required();

  std::string schedule_path, emu_out;
  double factor = 1.2;
  int pipelines = 2;
  auto* emulate = app.add_subcommand("emulate", "replay a frontier against straggler scenarios");
  emulate->add_option("--schedule", schedule_path, "optimize output directory (or its manifest)")
      ->required();
  emulate->add_option("--straggler-factor", factor, "straggler slowdown, >= 1")
      ->capture_default_str();
  emulate->add_option("--pipelines", pipelines, "pipelines sharing the iteration boundary")
      ->capture_default_str();
  emulate->add_option("--out", emu_out, "output directory (defaults to the schedule directory)");

  int port = 8080, workers = 2;
  std::string workdir = default_workdir();
  auto* serve = app.add_subcommand("serve", "run the schedule lookup service");
  serve->add_option("--port", port, "listen port (0 picks an ephemeral port)")
      ->capture_default_str();
  serve->add_option("--workdir", workdir, "job state directory (env PERSEUS_WORKDIR)")
      ->capture_default_str();
  serve->add_option("--workers", workers, "concurrent characterization workers")
      ->capture_default_str();

  std::string oracle_dag, oracle_profiles;
  double oracle_budget = 1e7;
  auto* oracle = app.add_subcommand("oracle", "brute-force exact frontier (tiny instances)");
  oracle->group("");  // debugging aid; hidden from help
  oracle->add_option("--dag", oracle_dag)->required();
  oracle->add_option("--profiles", oracle_profiles)->required();
  oracle->add_option("--budget", oracle_budget);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (g.quantum_us < 1) throw std::invalid_argument("quantum-us must be positive");
    if (g.blocking_watts <= 0) throw std::invalid_argument("p-blocking-watts must be positive");
    if (*partition) return run_partition(layers_file, stages);
    if (*optimize) return run_optimize(g, dag_spec, profiles_file, tau_us, out_dir);
    if (*emulate) return run_emulate(schedule_path, factor, pipelines, emu_out);
    if (*serve) return run_serve(g, port, workdir, workers);
    if (*oracle) return run_oracle(g, oracle_dag, oracle_profiles, oracle_budget);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
