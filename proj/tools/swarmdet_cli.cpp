// Command-line front end: every experiment is a config file plus a handful
// of overrides, so runs are reproducible from the config echo alone.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "swarmdet/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  int trials_override = -1;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config_path, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_option("--out", args->out_override, "override the output directory");
  cmd->add_option("--seed", args->seed_override, "override the base seed")
      ->each([args](const std::string&) { args->has_seed = true; });
  cmd->add_option("--trials", args->trials_override, "override the trial count");
}

swarmdet::ExperimentConfig resolve(const CommonArgs& args, const std::string& problem) {
  swarmdet::ExperimentConfig config = swarmdet::load_config(args.config_path);
  if (config.problem != problem)
    throw std::invalid_argument("config problem is \"" + config.problem + "\", expected \"" +
                                problem + "\"");
  if (!args.out_override.empty()) config.out_dir = args.out_override;
  if (args.has_seed) config.seed = args.seed_override;
  if (args.trials_override >= 0) config.trials = args.trials_override;
  config.validate();
  return config;
}

void print_files(const swarmdet::ReportBundle& bundle, const std::string& out_dir) {
  std::printf("wrote %zu files under %s\n", bundle.files.size(), out_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hierarchical swarm simulation and cluster-head detection"};
  app.require_subcommand(1);

  CommonArgs p1_args, p2_args, meta_args, purity_args;
  std::string heatmap_dir;

  CLI::App* p1 = app.add_subcommand("p1", "single-cluster detection grid");
  add_common(p1, &p1_args);
  CLI::App* p2 = app.add_subcommand("p2", "multi-cluster detection grid");
  add_common(p2, &p2_args);
  CLI::App* meta = app.add_subcommand("meta", "train the meta encoder");
  add_common(meta, &meta_args);
  CLI::App* purity = app.add_subcommand("purity", "encoded vs raw clustering purity");
  add_common(purity, &purity_args);
  CLI::App* heatmap = app.add_subcommand("heatmap", "attention artifacts to matrix CSVs");
  heatmap->add_option("--run", heatmap_dir, "directory of a finished p1 run")
      ->required()
      ->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (p1->parsed()) {
      const swarmdet::ExperimentConfig config = resolve(p1_args, "p1");
      const swarmdet::ReportBundle bundle = swarmdet::run_p1_suite(config);
      for (const swarmdet::P1Cell& cell : bundle.p1_cells)
        std::printf("%s m=%d detection_rate=%.4f (%d trials)\n", cell.ifs.c_str(), cell.m,
                    cell.detection_rate, cell.trials);
      print_files(bundle, config.out_dir);
    } else if (p2->parsed()) {
      const swarmdet::ExperimentConfig config = resolve(p2_args, "p2");
      const swarmdet::ReportBundle bundle = swarmdet::run_p2_suite(config);
      for (const swarmdet::P2Scenario& s : bundle.p2_scenarios)
        std::printf("%s scenario=%d success=%.2f mean_rounds=%.2f mean_redundancy=%.4f\n",
                    s.ifs.c_str(), s.scenario, s.success_rate, s.mean_rounds,
                    s.mean_redundancy);
      print_files(bundle, config.out_dir);
    } else if (meta->parsed()) {
      const swarmdet::ExperimentConfig config = resolve(meta_args, "meta");
      const swarmdet::ReportBundle bundle = swarmdet::run_meta(config);
      print_files(bundle, config.out_dir);
    } else if (purity->parsed()) {
      const swarmdet::ExperimentConfig config = resolve(purity_args, "purity");
      const swarmdet::ReportBundle bundle = swarmdet::compare_purity_baselines(config);
      for (const swarmdet::PurityCell& cell : bundle.purity_cells)
        std::printf("%s purity: encoded=%.4f raw=%.4f (%d trials)\n", cell.ifs.c_str(),
                    cell.mean_gru, cell.mean_raw, cell.trials);
      print_files(bundle, config.out_dir);
    } else if (heatmap->parsed()) {
      const std::vector<std::string> written = swarmdet::emit_attention_heatmap(heatmap_dir);
      std::printf("wrote %zu heatmap CSVs under %s\n", written.size(), heatmap_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
