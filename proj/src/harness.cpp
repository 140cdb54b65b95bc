#include "pbrl/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "pbrl/io.hpp"
#include "pbrl/rng.hpp"

namespace pbrl {

namespace {

std::string experiment_name(ExperimentConfig::Experiment e) {
  switch (e) {
    case ExperimentConfig::Experiment::Stackelberg: return "stackelberg";
    case ExperimentConfig::Experiment::Incentive: return "incentive";
    case ExperimentConfig::Experiment::Shaping: return "shaping";
    case ExperimentConfig::Experiment::Preference: return "preference";
  }
  return "unknown";
}

std::string algo_name(ExperimentConfig::Algo a) {
  switch (a) {
    case ExperimentConfig::Algo::PbrlValue: return "pbrl_value";
    case ExperimentConfig::Algo::PbrlBellman: return "pbrl_bellman";
    case ExperimentConfig::Algo::PbrlNi: return "pbrl_ni";
    case ExperimentConfig::Algo::IndependentPg: return "independent_pg";
  }
  return "unknown";
}

int worker_count(int jobs) {
  int n = int(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PBRL_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) n = v;
  }
  return std::max(1, std::min(n, jobs));
}

PBRLConfig loop_config(const ExperimentConfig& c, uint64_t seed) {
  PBRLConfig cfg;
  cfg.penalty = c.algo == ExperimentConfig::Algo::PbrlBellman ? PenaltyKind::Bellman
                : c.algo == ExperimentConfig::Algo::PbrlNi    ? PenaltyKind::NikaidoIsoda
                                                              : PenaltyKind::Value;
  cfg.lambda = c.lambda;
  cfg.alpha = c.alpha;
  cfg.outer_iters = c.outer_iters;
  cfg.oracle.kind = OracleConfig::Kind::PMD;
  cfg.oracle.eta = c.oracle_eta;
  cfg.oracle.inner_iters = c.inner_iters;
  cfg.grad_mode = c.grad_mode;
  cfg.traj_len = c.traj_len;
  cfg.batch = c.batch;
  cfg.seed = seed;
  return cfg;
}

EnvRecipe recipe_for(const ExperimentConfig& c, uint64_t seed) {
  EnvRecipe r;
  r.n_states = c.env_size;
  r.n_actions1 = c.n_actions1;
  r.n_actions2 = c.n_actions2;
  r.sparsity = c.sparsity;
  r.gamma = c.gamma;
  r.tau = c.tau;
  r.seed = seed;
  return r;
}

RunTrace run_one(const ExperimentConfig& c, uint64_t seed) {
  PBRLConfig cfg = loop_config(c, seed);
  RunTrace trace;
  try {
    switch (c.experiment) {
      case ExperimentConfig::Experiment::Stackelberg: {
        EnvRecipe recipe = recipe_for(c, seed);
        recipe.kind = EnvRecipe::Kind::RandomStackelberg;
        StackelbergGame game = gen_stackelberg(recipe);
        if (c.algo == ExperimentConfig::Algo::IndependentPg) {
          trace = independent_pg_run(game, cfg);
        } else {
          BilevelProblem problem = make_stackelberg_problem(std::move(game));
          trace = pbrl_run(problem, cfg);
        }
        trace.extra_name = "leader_value";
        for (TraceRow& row : trace.rows) row.extra = -row.f;
        break;
      }
      case ExperimentConfig::Experiment::Incentive: {
        EnvRecipe recipe = recipe_for(c, seed);
        recipe.kind = EnvRecipe::Kind::RandomIncentive;
        IncentiveInstance inst = gen_incentive(recipe);
        ZeroSumBilevelProblem problem = incentive_problem(inst.designer, std::move(inst.game));
        trace = pbrl_zs_run(problem, cfg);
        break;
      }
      case ExperimentConfig::Experiment::Shaping: {
        EnvRecipe recipe = recipe_for(c, seed);
        recipe.kind = EnvRecipe::Kind::SparseChain;
        ParamMDP original = gen_sparse_chain(recipe);
        const int dim = original.n_states * original.n_actions;

        BilevelProblem problem;
        problem.lower = original;
        problem.lower.tau = c.tau;
        problem.lower.regularizer = make_neg_entropy();
        problem.lower.reward_map = table_reward(original.n_states, original.n_actions);
        problem.upper = reward_shaping_objective(original, dim);
        problem.x0 = flatten_rows(original.reward_map.eval(Vec::Zero(0)));
        trace = pbrl_run(problem, cfg);
        break;
      }
      case ExperimentConfig::Experiment::Preference: {
        EnvRecipe recipe = recipe_for(c, seed);
        recipe.kind = EnvRecipe::Kind::RandomMDP;
        ParamMDP truth_mdp = gen_random_mdp(recipe);
        Mat truth = truth_mdp.reward_map.eval(Vec::Zero(0));

        BilevelProblem problem;
        problem.lower = truth_mdp;
        problem.lower.reward_map = table_reward(truth_mdp.n_states, truth_mdp.n_actions);
        const int dim = truth_mdp.n_states * truth_mdp.n_actions;
        Vec x0 = Vec::Constant(dim, 0.5);

        SegmentConfig seg{c.segment_len, c.n_pairs, SplitMix64::derive(seed, 0xda7a)};
        Policy explorer = Policy::uniform(truth_mdp.n_states, truth_mdp.n_actions);
        auto data = std::make_shared<const PreferenceDataset>(
            collect_and_label_segments(problem.lower, x0, truth, explorer, seg));
        problem.upper = preference_upper_objective(data, problem.lower.reward_map);
        problem.x0 = x0;

        const int A = truth_mdp.n_actions;
        cfg.extra_name = "kendall_tau";
        cfg.extra_metric = [truth, A](int, const Vec& x, const Policy&) {
          Mat learned(truth.rows(), A);
          for (int s = 0; s < truth.rows(); ++s)
            for (int a = 0; a < A; ++a) learned(s, a) = x[s * A + a];
          return kendall_tau(learned, truth);
        };
        trace = pbrl_run(problem, cfg);
        break;
      }
    }
  } catch (const DivergenceError& e) {
    trace = e.trace;
  }
  trace.experiment = experiment_name(c.experiment);
  trace.algorithm = algo_name(c.algo);
  trace.seed = seed;
  trace.config_hash = c.hash();
  return trace;
}

}  // namespace

void ExperimentConfig::apply_paper_defaults() {
  gamma = 0.9;
  alpha = 0.1;
  traj_len = 5;
  switch (experiment) {
    case Experiment::Stackelberg:
      env_size = 100;
      n_actions1 = 5;
      n_actions2 = 5;
      sparsity = 0.7;
      batch = 16;
      if (algo == Algo::PbrlBellman) {
        lambda = 7.0;
        inner_iters = 10;
      } else {
        lambda = 2.0;
        inner_iters = 1;
      }
      break;
    case Experiment::Incentive:
      env_size = 10;
      n_actions1 = 5;
      n_actions2 = 5;
      lambda = 4.0;
      batch = 24;
      inner_iters = 1;
      break;
    case Experiment::Shaping:
    case Experiment::Preference:
      break;  // no published hyperparameters for the tabular analogues
  }
}

void ExperimentConfig::validate() const {
  if (algo == Algo::PbrlNi && experiment != Experiment::Incentive)
    throw ConfigError("the NI penalty only applies to the zero-sum (incentive) experiment");
  if (experiment == Experiment::Incentive && algo != Algo::PbrlNi)
    throw ConfigError("the incentive experiment uses the NI penalty (algo pbrl_ni)");
  if (algo == Algo::IndependentPg && experiment != Experiment::Stackelberg)
    throw ConfigError("independent PG is the Stackelberg baseline");
  if (lambda < 0.0 || alpha < 0.0) throw ConfigError("lambda and alpha must be nonnegative");
  if (outer_iters < 0 || inner_iters < 1) throw ConfigError("iteration counts out of range");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (tau <= 0.0 && (algo == Algo::PbrlBellman || algo == Algo::PbrlNi))
    throw ConfigError("Bellman and NI penalties require tau > 0");
  EnvRecipe recipe;
  recipe.n_states = env_size;
  recipe.n_actions1 = n_actions1;
  recipe.n_actions2 = n_actions2;
  recipe.sparsity = sparsity;
  recipe.gamma = gamma;
  recipe.tau = tau;
  recipe.validate();
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "experiment " << experiment_name(experiment) << '\n'
     << "algo " << algo_name(algo) << '\n'
     << "lambda " << io::format_double(lambda) << '\n'
     << "alpha " << io::format_double(alpha) << '\n'
     << "tau " << io::format_double(tau) << '\n'
     << "gamma " << io::format_double(gamma) << '\n'
     << "outer_iters " << outer_iters << '\n'
     << "inner_iters " << inner_iters << '\n'
     << "oracle_eta " << io::format_double(oracle_eta) << '\n'
     << "traj_len " << traj_len << '\n'
     << "batch " << batch << '\n'
     << "grad_mode " << (grad_mode == GradMode::Exact ? "exact" : "mc") << '\n'
     << "env_size " << env_size << '\n'
     << "n_actions1 " << n_actions1 << '\n'
     << "n_actions2 " << n_actions2 << '\n'
     << "sparsity " << io::format_double(sparsity) << '\n'
     << "n_pairs " << n_pairs << '\n'
     << "segment_len " << segment_len << '\n';
  os << "seeds";
  for (uint64_t s : seeds) os << ' ' << s;
  os << '\n';
  return os.str();
}

uint64_t ExperimentConfig::hash() const { return io::fnv1a(canonical_text()); }

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config_hash = config.hash();
  result.traces.resize(config.seeds.size());

  const int workers = worker_count(int(config.seeds.size()));
  std::atomic<size_t> next{0};
  auto work = [&]() {
    while (true) {
      size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      result.traces[i] = run_one(config, config.seeds[i]);
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }

  for (const RunTrace& t : result.traces)
    if (t.diverged) ++result.diverged_count;

  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    for (const RunTrace& t : result.traces) {
      std::ostringstream name;
      name << config.out_dir << "/trace_" << t.algorithm << "_seed" << t.seed << ".txt";
      save_trace_file(name.str(), t);
    }
    std::ofstream summary(config.out_dir + "/summary_" + algo_name(config.algo) + ".txt");
    write_summary(result, summary);
  }
  return result;
}

void save_trace(std::ostream& out, const RunTrace& trace) {
  io::write_kv(out, "pbrl-trace", "v1");
  io::write_kv(out, "experiment", trace.experiment);
  io::write_kv(out, "algorithm", trace.algorithm);
  io::write_kv(out, "seed", std::to_string(trace.seed));
  io::write_kv(out, "config_hash", std::to_string(trace.config_hash));
  io::write_kv(out, "extra_name", trace.extra_name);
  io::write_kv(out, "steps_formula", trace.steps_formula);
  io::write_kv(out, "diverged", trace.diverged ? "1" : "0");
  io::write_kv(out, "rows", std::to_string(trace.rows.size()));
  io::write_kv(out, "columns",
               "k f p F_lambda grad_norm_sq exact_pg_norm_sq follower_gap oracle_gap "
               "env_steps wall_time extra");
  for (const TraceRow& r : trace.rows) {
    out << r.k;
    for (double v : {r.f, r.p, r.F, r.grad_norm_sq, r.exact_pg_norm_sq, r.follower_gap,
                     r.oracle_gap, r.env_steps, r.wall_time, r.extra})
      out << ' ' << io::format_double(v);
    out << '\n';
  }
  io::write_kv(out, "avg_grad_norm_sq", io::format_double(trace.avg_grad_norm_sq));
  io::write_kv(out, "min_follower_gap", io::format_double(trace.min_follower_gap));
}

RunTrace load_trace(std::istream& in) {
  require(io::expect_kv(in, "pbrl-trace") == "v1", "unsupported trace version");
  RunTrace t;
  t.experiment = io::expect_kv(in, "experiment");
  t.algorithm = io::expect_kv(in, "algorithm");
  t.seed = std::stoull(io::expect_kv(in, "seed"));
  t.config_hash = std::stoull(io::expect_kv(in, "config_hash"));
  t.extra_name = io::expect_kv(in, "extra_name");
  t.steps_formula = io::expect_kv(in, "steps_formula");
  t.diverged = io::expect_kv(in, "diverged") == "1";
  size_t rows = std::stoull(io::expect_kv(in, "rows"));
  io::expect_kv(in, "columns");
  t.rows.resize(rows);
  for (size_t i = 0; i < rows; ++i) {
    TraceRow& r = t.rows[i];
    std::string tok;
    in >> r.k;
    for (double* v : {&r.f, &r.p, &r.F, &r.grad_norm_sq, &r.exact_pg_norm_sq, &r.follower_gap,
                      &r.oracle_gap, &r.env_steps, &r.wall_time, &r.extra}) {
      require(bool(in >> tok), "trace rows truncated");
      *v = io::parse_double(tok);
    }
  }
  in.ignore(1, '\n');
  t.avg_grad_norm_sq = io::parse_double(io::expect_kv(in, "avg_grad_norm_sq"));
  t.min_follower_gap = io::parse_double(io::expect_kv(in, "min_follower_gap"));
  return t;
}

void save_trace_file(const std::string& path, const RunTrace& trace) {
  std::ofstream out(path);
  require(bool(out), "cannot open '" + path + "' for writing");
  save_trace(out, trace);
}

RunTrace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  require(bool(in), "cannot open '" + path + "'");
  return load_trace(in);
}

double trace_metric(const RunTrace& trace, const TraceRow& row, const std::string& metric) {
  if (metric == "k") return double(row.k);
  if (metric == "f") return row.f;
  if (metric == "p") return row.p;
  if (metric == "F_lambda") return row.F;
  if (metric == "grad_norm_sq") return row.grad_norm_sq;
  if (metric == "exact_pg_norm_sq") return row.exact_pg_norm_sq;
  if (metric == "follower_gap") return row.follower_gap;
  if (metric == "oracle_gap") return row.oracle_gap;
  if (metric == "env_steps") return row.env_steps;
  if (metric == "wall_time") return row.wall_time;
  if (metric == "extra" || metric == trace.extra_name) return row.extra;
  std::ostringstream os;
  os << "unknown metric '" << metric << "'; available:";
  for (const std::string& m : trace_metric_names(trace)) os << ' ' << m;
  throw ValidationError(os.str());
}

std::vector<std::string> trace_metric_names(const RunTrace& trace) {
  std::vector<std::string> names = {"k",          "f",           "p",
                                    "F_lambda",   "grad_norm_sq", "exact_pg_norm_sq",
                                    "follower_gap", "oracle_gap", "env_steps",
                                    "wall_time",  "extra"};
  if (trace.extra_name != "none" && !trace.extra_name.empty()) names.push_back(trace.extra_name);
  return names;
}

void emit_plot_data(const std::vector<RunTrace>& traces, const std::string& metric,
                    std::ostream& out) {
  require(!traces.empty(), "emit_plot_data needs at least one trace");
  size_t rows = traces.front().rows.size();
  for (const RunTrace& t : traces)
    require(t.rows.size() == rows, "traces have mismatched lengths");
  trace_metric(traces.front(), TraceRow{}, metric);  // validates the name

  io::write_kv(out, "pbrl-plot", "v1");
  io::write_kv(out, "metric", metric);
  std::ostringstream header;
  header << "env_steps mean std";
  for (const RunTrace& t : traces) header << " seed" << t.seed;
  io::write_kv(out, "columns", header.str());
  io::write_kv(out, "rows", std::to_string(rows));

  for (size_t i = 0; i < rows; ++i) {
    double steps = 0.0, mean = 0.0;
    for (const RunTrace& t : traces) {
      steps += t.rows[i].env_steps;
      mean += trace_metric(t, t.rows[i], metric);
    }
    steps /= double(traces.size());
    mean /= double(traces.size());
    double var = 0.0;
    for (const RunTrace& t : traces) {
      double d = trace_metric(t, t.rows[i], metric) - mean;
      var += d * d;
    }
    double std_dev = traces.size() > 1 ? std::sqrt(var / double(traces.size() - 1)) : 0.0;
    out << io::format_double(steps) << ' ' << io::format_double(mean) << ' '
        << io::format_double(std_dev);
    for (const RunTrace& t : traces)
      out << ' ' << io::format_double(trace_metric(t, t.rows[i], metric));
    out << '\n';
  }
}

void emit_plot_data_file(const std::vector<RunTrace>& traces, const std::string& metric,
                         const std::string& path) {
  std::ofstream out(path);
  require(bool(out), "cannot open '" + path + "' for writing");
  emit_plot_data(traces, metric, out);
}

void write_summary(const ExperimentResult& result, std::ostream& out) {
  io::write_kv(out, "pbrl-summary", "v1");
  io::write_kv(out, "config_hash", std::to_string(result.config_hash));
  io::write_kv(out, "n_seeds", std::to_string(result.traces.size()));
  io::write_kv(out, "diverged", std::to_string(result.diverged_count));
  if (result.traces.empty()) return;
  const std::vector<std::string> metrics = {"f", "p", "F_lambda", "grad_norm_sq",
                                            "follower_gap", "extra"};
  size_t rows = result.traces.front().rows.size();
  for (const RunTrace& t : result.traces) rows = std::min(rows, t.rows.size());
  std::ostringstream header;
  header << "k";
  for (const std::string& m : metrics) header << ' ' << m << "_mean " << m << "_std";
  io::write_kv(out, "columns", header.str());
  io::write_kv(out, "rows", std::to_string(rows));
  for (size_t i = 0; i < rows; ++i) {
    out << result.traces.front().rows[i].k;
    for (const std::string& m : metrics) {
      double mean = 0.0;
      for (const RunTrace& t : result.traces) mean += trace_metric(t, t.rows[i], m);
      mean /= double(result.traces.size());
      double var = 0.0;
      for (const RunTrace& t : result.traces) {
        double d = trace_metric(t, t.rows[i], m) - mean;
        var += d * d;
      }
      double std_dev =
          result.traces.size() > 1 ? std::sqrt(var / double(result.traces.size() - 1)) : 0.0;
      out << ' ' << io::format_double(mean) << ' ' << io::format_double(std_dev);
    }
    out << '\n';
  }
}

}  // namespace pbrl
