#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "pbrl/applications.hpp"
#include "pbrl/envgen.hpp"
#include "pbrl/harness.hpp"

namespace py = pybind11;
using namespace pbrl;

namespace {

Regularizer regularizer_from_name(const std::string& name, const Mat* reference) {
  if (name == "none") return make_none();
  if (name == "neg_entropy") return make_neg_entropy();
  if (name == "squared_l2") return make_squared_l2();
  if (name == "kl") {
    if (!reference) throw ConfigError("kl regularizer needs a reference policy");
    return make_kl(*reference);
  }
  throw ConfigError("unknown regularizer '" + name + "'");
}

ParamMDP make_tabular_mdp(const Mat& reward, const Mat& transition, double gamma, double tau,
                          const std::string& regularizer, const Vec& rho,
                          bool reward_is_parameter) {
  ParamMDP mdp;
  mdp.n_states = int(reward.rows());
  mdp.n_actions = int(reward.cols());
  mdp.gamma = gamma;
  mdp.tau = tau;
  mdp.regularizer = regularizer_from_name(regularizer, nullptr);
  mdp.reward_map = reward_is_parameter ? table_reward(mdp.n_states, mdp.n_actions)
                                       : fixed_reward(reward);
  mdp.transition_map = fixed_transition(transition);
  mdp.initial_dist = rho;
  mdp.validate(reward_is_parameter ? flatten_rows(reward) : Vec::Zero(0));
  return mdp;
}

OracleConfig oracle_config_from(const std::string& kind, double eta, int inner_iters,
                                double tol) {
  OracleConfig cfg;
  if (kind == "pmd") cfg.kind = OracleConfig::Kind::PMD;
  else if (kind == "soft_vi") cfg.kind = OracleConfig::Kind::SoftVI;
  else if (kind == "projected_pg") cfg.kind = OracleConfig::Kind::ProjectedPG;
  else if (kind == "brute_force") cfg.kind = OracleConfig::Kind::BruteForce;
  else throw ConfigError("unknown oracle kind '" + kind + "'");
  cfg.eta = eta;
  cfg.inner_iters = inner_iters;
  cfg.tol = tol;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Penalty-based bilevel RL toolkit (C++ core)";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UnsupportedStructureError>(m, "UnsupportedStructureError",
                                                    PyExc_RuntimeError);
  py::register_exception<OracleFailureError>(m, "OracleFailureError", PyExc_RuntimeError);

  py::class_<Policy>(m, "Policy")
      .def_static("direct", &Policy::direct, py::arg("rows"))
      .def_static("softmax", &Policy::softmax, py::arg("logits"))
      .def_static("uniform", &Policy::uniform, py::arg("n_states"), py::arg("n_actions"))
      .def_property_readonly("table", [](const Policy& p) { return p.table; })
      .def("distribution", &Policy::distribution);

  py::class_<ParamMDP>(m, "ParamMDP")
      .def_property_readonly("n_states", [](const ParamMDP& m_) { return m_.n_states; })
      .def_property_readonly("n_actions", [](const ParamMDP& m_) { return m_.n_actions; })
      .def_property_readonly("gamma", [](const ParamMDP& m_) { return m_.gamma; })
      .def_property_readonly("tau", [](const ParamMDP& m_) { return m_.tau; })
      .def("reward_at", [](const ParamMDP& m_, const Vec& x) { return m_.reward_map.eval(x); })
      .def("transition_at",
           [](const ParamMDP& m_, const Vec& x) { return m_.transition_map.eval(x); });

  m.def("tabular_mdp", &make_tabular_mdp, py::arg("reward"), py::arg("transition"),
        py::arg("gamma"), py::arg("tau") = 0.0, py::arg("regularizer") = "none",
        py::arg("rho") = Vec(), py::arg("reward_is_parameter") = false,
        "Tabular MDP from dense tables; transition is (S*A) x S row-stochastic");

  m.def("evaluate_value_exact", &evaluate_value_exact);
  m.def("evaluate_q_exact", &evaluate_q_exact);
  m.def("visitation_distribution", &visitation_distribution);
  m.def("policy_gradient_exact", &policy_gradient_exact);
  m.def("value_gradient_x_exact", &value_gradient_x_exact);
  m.def("mc_policy_gradient",
        [](const ParamMDP& mdp, const Vec& x, const Policy& pi, int traj_len, int batch,
           uint64_t seed) {
          return mc_policy_gradient(mdp, x, pi, McConfig{traj_len, batch, seed});
        },
        py::arg("mdp"), py::arg("x"), py::arg("pi"), py::arg("traj_len") = 5,
        py::arg("batch") = 16, py::arg("seed") = 0);

  m.def("project_simplex", &project_simplex);
  m.def("softmax_materialize", &softmax_materialize);
  m.def("softmax_chain_gradient", &softmax_chain_gradient);
  m.def("regularizer_value_and_grad",
        [](const std::string& kind, const Vec& dist, const Mat* reference) {
          Regularizer reg = regularizer_from_name(kind, reference);
          return regularizer_value_and_grad(reg, 0, dist);
        },
        py::arg("kind"), py::arg("dist"), py::arg("reference") = nullptr);

  py::class_<OracleCertificate>(m, "OracleCertificate")
      .def_property_readonly("policy", [](const OracleCertificate& c) { return c.policy_hat; })
      .def_readonly("gap_bound", &OracleCertificate::gap_bound)
      .def_readonly("gap_is_value", &OracleCertificate::gap_is_value)
      .def_readonly("iterations_used", &OracleCertificate::iterations_used)
      .def_readonly("near_tie", &OracleCertificate::near_tie);

  m.def("pmd_solve",
        [](const ParamMDP& mdp, const Vec& x, double eta, int max_iters, double tol) {
          return pmd_solve(mdp, x, PmdConfig{eta, max_iters, tol});
        },
        py::arg("mdp"), py::arg("x"), py::arg("eta") = 0.1, py::arg("max_iters") = 500,
        py::arg("tol") = 1e-10);
  m.def("soft_value_iteration", &soft_value_iteration, py::arg("mdp"), py::arg("x"),
        py::arg("tol") = 1e-10);
  m.def("projected_pg_solve",
        [](const ParamMDP& mdp, const Vec& x, double eta, int iters) {
          return projected_pg_solve(mdp, x, PgConfig{eta, iters});
        },
        py::arg("mdp"), py::arg("x"), py::arg("eta") = 0.1, py::arg("iters") = 100);
  m.def("brute_force_optimal", &brute_force_optimal);

  m.def("value_penalty_eval", &value_penalty_eval);
  m.def("value_penalty_grad",
        [](const ParamMDP& mdp, const Vec& x, const Policy& pi, const OracleCertificate& cert) {
          PenaltyGrads g = value_penalty_grad(mdp, x, pi, cert, GradStructure::reward_only());
          return py::make_tuple(g.grad_x, g.grad_y);
        });
  m.def("bellman_penalty_eval", &bellman_penalty_eval);
  m.def("bellman_penalty_grad",
        [](const ParamMDP& mdp, const Vec& x, const Policy& pi, const OracleCertificate& cert) {
          PenaltyGrads g = bellman_penalty_grad(mdp, x, pi, cert, GradStructure::reward_only());
          return py::make_tuple(g.grad_x, g.grad_y);
        });

  py::class_<StackelbergGame>(m, "StackelbergGame")
      .def_readonly("n_states", &StackelbergGame::n_states)
      .def_readonly("n_actions_leader", &StackelbergGame::n_actions_leader)
      .def_readonly("n_actions_follower", &StackelbergGame::n_actions_follower)
      .def_readonly("gamma", &StackelbergGame::gamma)
      .def_readonly("tau", &StackelbergGame::tau)
      .def_readonly("reward_leader", &StackelbergGame::reward_leader)
      .def_readonly("reward_follower", &StackelbergGame::reward_follower)
      .def_readonly("transition", &StackelbergGame::transition)
      .def_readonly("initial_dist", &StackelbergGame::initial_dist);

  py::class_<MatrixGameSolution>(m, "MatrixGameSolution")
      .def_readonly("row_strategy", &MatrixGameSolution::row_strategy)
      .def_readonly("col_strategy", &MatrixGameSolution::col_strategy)
      .def_readonly("value", &MatrixGameSolution::value)
      .def_readonly("duality_gap", &MatrixGameSolution::duality_gap);
  m.def("matrix_game_lp_oracle", &matrix_game_lp_oracle);

  py::class_<TraceRow>(m, "TraceRow")
      .def_readonly("k", &TraceRow::k)
      .def_readonly("f", &TraceRow::f)
      .def_readonly("p", &TraceRow::p)
      .def_readonly("F", &TraceRow::F)
      .def_readonly("grad_norm_sq", &TraceRow::grad_norm_sq)
      .def_readonly("exact_pg_norm_sq", &TraceRow::exact_pg_norm_sq)
      .def_readonly("follower_gap", &TraceRow::follower_gap)
      .def_readonly("oracle_gap", &TraceRow::oracle_gap)
      .def_readonly("env_steps", &TraceRow::env_steps)
      .def_readonly("wall_time", &TraceRow::wall_time)
      .def_readonly("extra", &TraceRow::extra);

  py::class_<RunTrace>(m, "RunTrace")
      .def_readonly("experiment", &RunTrace::experiment)
      .def_readonly("algorithm", &RunTrace::algorithm)
      .def_readonly("seed", &RunTrace::seed)
      .def_readonly("config_hash", &RunTrace::config_hash)
      .def_readonly("diverged", &RunTrace::diverged)
      .def_readonly("rows", &RunTrace::rows)
      .def_readonly("avg_grad_norm_sq", &RunTrace::avg_grad_norm_sq)
      .def_readonly("min_follower_gap", &RunTrace::min_follower_gap)
      .def("fingerprint", &RunTrace::fingerprint);

  py::class_<BilevelProblem>(m, "BilevelProblem");
  m.def("make_stackelberg_problem", &make_stackelberg_problem);
  m.def("stackelberg_reduce",
        [](const StackelbergGame& g) {
          return stackelberg_reduce(std::make_shared<const StackelbergGame>(g));
        });
  m.def("stackelberg_leader_value", &stackelberg_leader_value);

  m.def("pbrl_run",
        [](const BilevelProblem& problem, const std::string& penalty, double lambda,
           double alpha, int outer_iters, const std::string& oracle_kind, double oracle_eta,
           int inner_iters, bool exact, int traj_len, int batch, uint64_t seed) {
          PBRLConfig cfg;
          cfg.penalty = penalty == "bellman" ? PenaltyKind::Bellman : PenaltyKind::Value;
          cfg.lambda = lambda;
          cfg.alpha = alpha;
          cfg.outer_iters = outer_iters;
          cfg.oracle = oracle_config_from(oracle_kind, oracle_eta, inner_iters, 1e-10);
          cfg.grad_mode = exact ? GradMode::Exact : GradMode::MonteCarlo;
          cfg.traj_len = traj_len;
          cfg.batch = batch;
          cfg.seed = seed;
          return pbrl_run(problem, cfg);
        },
        py::arg("problem"), py::arg("penalty") = "value", py::arg("lambda") = 2.0,
        py::arg("alpha") = 0.1, py::arg("outer_iters") = 100, py::arg("oracle_kind") = "pmd",
        py::arg("oracle_eta") = 0.1, py::arg("inner_iters") = 1, py::arg("exact") = false,
        py::arg("traj_len") = 5, py::arg("batch") = 16, py::arg("seed") = 0);

  py::class_<EnvRecipe>(m, "EnvRecipe")
      .def(py::init([](const std::string& kind, int n_states, int n_actions1, int n_actions2,
                       double sparsity, double gamma, double tau, uint64_t seed) {
             EnvRecipe r;
             if (kind == "stackelberg") r.kind = EnvRecipe::Kind::RandomStackelberg;
             else if (kind == "incentive") r.kind = EnvRecipe::Kind::RandomIncentive;
             else if (kind == "sparse_chain") r.kind = EnvRecipe::Kind::SparseChain;
             else if (kind == "random_mdp") r.kind = EnvRecipe::Kind::RandomMDP;
             else throw ConfigError("unknown recipe kind '" + kind + "'");
             r.n_states = n_states;
             r.n_actions1 = n_actions1;
             r.n_actions2 = n_actions2;
             r.sparsity = sparsity;
             r.gamma = gamma;
             r.tau = tau;
             r.seed = seed;
             return r;
           }),
           py::arg("kind"), py::arg("n_states") = 20, py::arg("n_actions1") = 5,
           py::arg("n_actions2") = 5, py::arg("sparsity") = 0.7, py::arg("gamma") = 0.9,
           py::arg("tau") = 0.5, py::arg("seed") = 0);

  m.def("gen_stackelberg", &gen_stackelberg);
  m.def("gen_sparse_chain", &gen_sparse_chain);
  m.def("gen_random_mdp", &gen_random_mdp);

  m.def("run_experiment_cli",
        [](const std::string& experiment, const std::string& algo, double lambda, double alpha,
           double tau, double gamma, int outer_iters, int inner_iters, int env_size,
           std::vector<uint64_t> seeds, bool exact, const std::string& out_dir) {
          ExperimentConfig cfg;
          if (experiment == "stackelberg") cfg.experiment = ExperimentConfig::Experiment::Stackelberg;
          else if (experiment == "incentive") cfg.experiment = ExperimentConfig::Experiment::Incentive;
          else if (experiment == "shaping") cfg.experiment = ExperimentConfig::Experiment::Shaping;
          else if (experiment == "preference") cfg.experiment = ExperimentConfig::Experiment::Preference;
          else throw ConfigError("unknown experiment '" + experiment + "'");
          if (algo == "pbrl_value") cfg.algo = ExperimentConfig::Algo::PbrlValue;
          else if (algo == "pbrl_bellman") cfg.algo = ExperimentConfig::Algo::PbrlBellman;
          else if (algo == "pbrl_ni") cfg.algo = ExperimentConfig::Algo::PbrlNi;
          else if (algo == "independent_pg") cfg.algo = ExperimentConfig::Algo::IndependentPg;
          else throw ConfigError("unknown algo '" + algo + "'");
          cfg.lambda = lambda;
          cfg.alpha = alpha;
          cfg.tau = tau;
          cfg.gamma = gamma;
          cfg.outer_iters = outer_iters;
          cfg.inner_iters = inner_iters;
          cfg.env_size = env_size;
          cfg.seeds = std::move(seeds);
          cfg.grad_mode = exact ? GradMode::Exact : GradMode::MonteCarlo;
          cfg.out_dir = out_dir;
          ExperimentResult result = run_experiment(cfg);
          return py::make_tuple(result.traces, result.diverged_count, result.config_hash);
        },
        py::arg("experiment"), py::arg("algo"), py::arg("lambda") = 2.0, py::arg("alpha") = 0.1,
        py::arg("tau") = 0.5, py::arg("gamma") = 0.9, py::arg("outer_iters") = 50,
        py::arg("inner_iters") = 1, py::arg("env_size") = 8,
        py::arg("seeds") = std::vector<uint64_t>{0}, py::arg("exact") = false,
        py::arg("out_dir") = "");

  m.def("save_trace", [](const RunTrace& t) {
    std::ostringstream os;
    save_trace(os, t);
    return os.str();
  });
  m.def("load_trace", [](const std::string& text) {
    std::istringstream is(text);
    return load_trace(is);
  });
}
