#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>

#include "pmvol/pmvol.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Options& o, bool config_required = true) {
  auto* c = cmd->add_option("--config", o.config, "Run config (INI)");
  if (config_required) c->required();
  cmd->add_option("--out", o.out, "Output directory (overrides the config)");
  cmd->add_option("--seed", o.seed, "Seed (overrides the config)");
}

pmvol::RunConfig load(const Options& o) {
  auto cfg = pmvol::load_run_config(o.config);
  if (!o.out.empty()) cfg.output = o.out;
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

void run_stage(const Options& o, pmvol::Stage stage) {
  auto cfg = load(o);
  pmvol::Pipeline p(cfg);
  p.run(stage, {stage});
  std::cout << pmvol::stage_name(stage) << " artifacts written to " << cfg.output.string() << '\n';
}

void simulate(const Options& o) {
  auto cfg = pmvol::load_synthetic_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  const std::filesystem::path dir = o.out.empty() ? "synthetic" : o.out;
  const auto data = pmvol::simulate_panel(cfg);
  (void)pmvol::write_raw_data(data.raw, dir);
  pmvol::persist_panel(data.panel, (dir / "panel.csv").string());
  {
    std::ofstream t(dir / "truth.csv", std::ios::binary);
    t << "date";
    for (const auto& a : cfg.assets) t << ',' << a << ".noiseless," << a << ".noise";
    t << '\n';
    for (std::size_t r = 0; r < data.panel.rows(); ++r) {
      t << data.panel.dates()[r].iso();
      for (const auto& a : cfg.assets)
        t << ',' << pmvol::csv::format(data.truth.noiseless.at(a)[r]) << ','
          << pmvol::csv::format(data.truth.noise.at(a)[r]);
      t << '\n';
    }
  }
  pmvol::write_manifest(dir);
  std::cout << "simulated " << data.panel.rows() << " days for " << cfg.assets.size() << " assets into "
            << dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prediction-market repricing signals and crypto volatility forecasts"};
  app.require_subcommand(1);
  Options o;

  struct StageCmd {
    const char* name;
    const char* help;
    pmvol::Stage stage;
  };
  const StageCmd stages[] = {
      {"ingest", "Validate and load input records", pmvol::Stage::kIngest},
      {"signals", "Build the aligned panel, signals and targets", pmvol::Stage::kSignals},
      {"estimate", "Fit the nested HAR model ladder", pmvol::Stage::kEstimate},
      {"grid", "Signal x asset grid with FDR control", pmvol::Stage::kGrid},
      {"oos", "Expanding-window out-of-sample evaluation", pmvol::Stage::kOos},
      {"robustness", "Bootstrap, placebo and specification checks", pmvol::Stage::kRobustness},
  };
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, o);
    const auto stage = s.stage;
    cmd->callback([&o, stage] { run_stage(o, stage); });
  }

  auto* sim = app.add_subcommand("simulate", "Write a synthetic data set from a synthetic config");
  add_common(sim, o);
  sim->callback([&o] { simulate(o); });

  auto* rep = app.add_subcommand("report", "Summarise an artifact directory");
  rep->add_option("--out", o.out, "Artifact directory")->required();
  rep->callback([&o] { std::cout << pmvol::report(o.out); });

  auto* run = app.add_subcommand("run", "All stages, then the report");
  add_common(run, o);
  run->callback([&o] {
    const auto cfg = load(o);
    pmvol::run_all(cfg);
    std::cout << "artifacts written to " << cfg.output.string() << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const pmvol::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
