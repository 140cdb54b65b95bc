#include <cstdio>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "pbrl/harness.hpp"

namespace {

using pbrl::ExperimentConfig;

void add_common_flags(CLI::App* cmd, ExperimentConfig& cfg, std::string& algo,
                      std::string& seeds, bool& paper_defaults, bool& exact) {
  cmd->add_option("--algo", algo, "pbrl_value | pbrl_bellman | pbrl_ni | independent_pg");
  cmd->add_option("--lambda", cfg.lambda, "penalty constant");
  cmd->add_option("--alpha", cfg.alpha, "step size");
  cmd->add_option("--tau", cfg.tau, "regularization weight");
  cmd->add_option("--gamma", cfg.gamma, "discount factor");
  cmd->add_option("--outer-iters", cfg.outer_iters, "outer iterations K");
  cmd->add_option("--inner-iters", cfg.inner_iters, "inner oracle iterations T");
  cmd->add_option("--oracle-eta", cfg.oracle_eta, "inner oracle step size");
  cmd->add_option("--traj-len", cfg.traj_len, "Monte-Carlo trajectory length");
  cmd->add_option("--batch", cfg.batch, "Monte-Carlo batch size");
  cmd->add_option("--env-size", cfg.env_size, "number of states");
  cmd->add_option("--actions1", cfg.n_actions1, "leader / player-1 action count");
  cmd->add_option("--actions2", cfg.n_actions2, "follower / player-2 action count");
  cmd->add_option("--sparsity", cfg.sparsity, "reward sparsity threshold");
  cmd->add_option("--n-pairs", cfg.n_pairs, "preference pairs to collect");
  cmd->add_option("--segment-len", cfg.segment_len, "preference segment length");
  cmd->add_option("--seeds", seeds, "comma-separated seed list");
  cmd->add_option("--out", cfg.out_dir, "output directory for traces and summaries");
  cmd->add_flag("--paper-defaults", paper_defaults,
                "apply the published hyperparameters and environment sizes");
  cmd->add_flag("--exact", exact, "exact gradients instead of Monte-Carlo estimates");
  cmd->set_config("--config", "", "read options from a config file");
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::string cur;
  for (char c : text + ",") {
    if (c == ',') {
      if (!cur.empty()) seeds.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  return seeds;
}

ExperimentConfig::Algo parse_algo(const std::string& name) {
  if (name == "pbrl_value") return ExperimentConfig::Algo::PbrlValue;
  if (name == "pbrl_bellman") return ExperimentConfig::Algo::PbrlBellman;
  if (name == "pbrl_ni") return ExperimentConfig::Algo::PbrlNi;
  if (name == "independent_pg") return ExperimentConfig::Algo::IndependentPg;
  throw pbrl::ConfigError("unknown algorithm '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Penalty-based bilevel RL experiments"};
  app.require_subcommand(1);

  struct Cell {
    ExperimentConfig cfg;
    std::string algo;
    std::string seeds = "0";
    bool paper_defaults = false;
    bool exact = false;
  };
  std::map<std::string, Cell> cells;
  const std::pair<std::string, ExperimentConfig::Experiment> kinds[] = {
      {"stackelberg", ExperimentConfig::Experiment::Stackelberg},
      {"incentive", ExperimentConfig::Experiment::Incentive},
      {"shaping", ExperimentConfig::Experiment::Shaping},
      {"preference", ExperimentConfig::Experiment::Preference},
  };
  for (const auto& [name, kind] : kinds) {
    Cell& cell = cells[name];
    cell.cfg.experiment = kind;
    if (kind == ExperimentConfig::Experiment::Incentive) {
      cell.algo = "pbrl_ni";
      cell.cfg.env_size = 10;
      cell.cfg.lambda = 4.0;
      cell.cfg.batch = 24;
    } else {
      cell.algo = "pbrl_value";
    }
    if (kind == ExperimentConfig::Experiment::Shaping) cell.cfg.env_size = 6;
    if (kind == ExperimentConfig::Experiment::Preference) cell.cfg.env_size = 5;
    CLI::App* cmd = app.add_subcommand(name, name + " experiment");
    add_common_flags(cmd, cell.cfg, cell.algo, cell.seeds, cell.paper_defaults, cell.exact);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto& [name, cell] : cells) {
      CLI::App* cmd = app.get_subcommand(name);
      if (!cmd->parsed()) continue;
      ExperimentConfig& cfg = cell.cfg;
      cfg.algo = parse_algo(cell.algo);
      if (cell.paper_defaults) {
        // Apply the published values, but explicit flags win.
        ExperimentConfig paper = cfg;
        paper.apply_paper_defaults();
        auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
        if (!given("--gamma")) cfg.gamma = paper.gamma;
        if (!given("--alpha")) cfg.alpha = paper.alpha;
        if (!given("--lambda")) cfg.lambda = paper.lambda;
        if (!given("--inner-iters")) cfg.inner_iters = paper.inner_iters;
        if (!given("--traj-len")) cfg.traj_len = paper.traj_len;
        if (!given("--batch")) cfg.batch = paper.batch;
        if (!given("--env-size")) cfg.env_size = paper.env_size;
        if (!given("--actions1")) cfg.n_actions1 = paper.n_actions1;
        if (!given("--actions2")) cfg.n_actions2 = paper.n_actions2;
        if (!given("--sparsity")) cfg.sparsity = paper.sparsity;
      }
      cfg.seeds = parse_seeds(cell.seeds);
      cfg.grad_mode = cell.exact ? pbrl::GradMode::Exact : pbrl::GradMode::MonteCarlo;
      cfg.validate();

      pbrl::ExperimentResult result = pbrl::run_experiment(cfg);
      std::printf("experiment %s algo %s: %zu seeds, %d diverged, config hash %llu\n",
                  name.c_str(), cell.algo.c_str(), result.traces.size(),
                  result.diverged_count,
                  static_cast<unsigned long long>(result.config_hash));
      for (const pbrl::RunTrace& t : result.traces) {
        double final_gap = t.rows.empty() ? 0.0 : t.rows.back().follower_gap;
        double final_f = t.rows.empty() ? 0.0 : t.rows.back().f;
        std::printf("  seed %llu: final f %.6g, final gap %.6g%s\n",
                    static_cast<unsigned long long>(t.seed), final_f, final_gap,
                    t.diverged ? " (diverged)" : "");
      }
      if (result.diverged_count > 0) return 3;
    }
  } catch (const pbrl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const pbrl::ValidationError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
