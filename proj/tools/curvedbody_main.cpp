#include "curvedbody/cli.hpp"

#include "CLI11.hpp"

#include <spdlog/spdlog.h>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
  using namespace cb;
  cli::configure_logging();

  CLI::App app{"Dynamics, action-angle spectra and bracket verification for bodies on curved manifolds"};
  app.require_subcommand(1);

  std::string config;
  cli::RunOptions options;
  std::string out;
  options.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", config, "Scenario configuration file");
    if (config_required) c->required();
    sub->add_option("--out", out, "Output directory (overrides [outputs] directory)");
    sub->add_option("--seed", options.seed, "Seed for sampling-based checks");
    sub->add_option("--threads", options.threads, "Worker threads for parallel sweeps")->check(CLI::PositiveNumber);
  };

  auto* simulate = app.add_subcommand("simulate", "Integrate a scenario and write the trajectory and run report");
  add_common(simulate, true);

  auto* actions = app.add_subcommand("actions", "Action variables, frequencies and degeneracy of a separable scenario");
  add_common(actions, true);
  actions->add_flag("--allow-unbounded", options.allow_unbounded, "Accept separable potentials without confinement");

  auto* verify = app.add_subcommand("verify", "Run the geometry, Poisson-bracket and SU(2) verification suites");
  add_common(verify, false);
  verify->add_option("--suite", options.suite, "geometry | poisson | su2 | all");
  verify->add_option("--chart", options.chart, "sphere2 | pseudosphere2 | torus2 | sphere3 | flat2 | flat3 | torsion");
  verify->add_option("--samples", options.samples, "Sampled states per chart");

  auto* bertrand = app.add_subcommand("bertrand", "Orbit-closure test for Bertrand potentials");
  add_common(bertrand, false);
  bertrand->add_option("--chart", options.chart, "sphere2 | pseudosphere2");
  bertrand->add_option("--potential", options.potential, "Potential kind (default: all for the chart)");
  bertrand->add_option("--samples", options.samples, "Sampled bound orbits per potential");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::ExitCode::ParseFailure;
  }
  if (!out.empty()) options.out_dir = out;

  try {
    std::optional<cli::ScenarioSpec> spec;
    if (!config.empty()) spec = cli::parse_config(config);
    cli::RunResult result;
    if (simulate->parsed())
      result = cli::run_simulate(*spec, options);
    else if (actions->parsed())
      result = cli::run_actions(*spec, options);
    else if (verify->parsed())
      result = cli::run_verify(spec, options);
    else
      result = cli::run_bertrand(spec, options);
    std::cout << result.text;
    for (const auto& f : result.files) spdlog::info("wrote {}", f.string());
    return result.exit_code;
  } catch (const cli::ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << config << (d.line > 0 ? ":" : ": ") << d.format() << "\n";
    return cli::exit_code_for(e.kind());
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::ExitCode::RuntimeFailure;
  }
}
