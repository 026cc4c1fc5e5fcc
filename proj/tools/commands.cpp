#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include "ardiff/gauss.hpp"
#include "ardiff/io.hpp"
#include "ardiff/oracle.hpp"
#include "ardiff/sampler.hpp"
#include "ardiff/schedule.hpp"
#include "ardiff/scorelearn.hpp"
#include "ardiff/scorenet.hpp"
#include "ardiff/synthtasks.hpp"
#include "ardiff/trace.hpp"
#include "ardiff/verify.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace ardiff::cli {

using io::json;

fs::path Context::file(const std::string& name) {
  outputs.push_back(name);
  const fs::path p = out / name;
  fs::create_directories(p.parent_path());
  return p;
}

namespace {

// ---- shared option groups -------------------------------------------------

struct TargetOpts {
  std::string target = "causal";
  std::vector<int> dims;
};

struct SchedOpts {
  double T = 8.0;
  double eta = 0.01;
  double delta = 0.1;
  double L = 0.0;  // 0: certified from the target
  int uniform_R = 0;
};

void add_target(CLI::App* app, TargetOpts& o) {
  app->add_option("--target", o.target,
                  "Target law: a JSON file (gaussian or mixture) or a preset: causal, bimodal");
  app->add_option("--dims", o.dims, "Patch dimensions; defaults to the file's \"dims\" or one patch");
}

void add_schedule(CLI::App* app, SchedOpts& o) {
  app->add_option("--T", o.T, "Horizon");
  app->add_option("--eta", o.eta, "Step-size parameter");
  app->add_option("--delta", o.delta, "Tail width");
  app->add_option("--L", o.L, "Smoothness constant (0: certified from the target)");
  app->add_option("--uniform-R", o.uniform_R, "Use R uniform steps instead of the three-regime grid");
}

struct Target {
  GaussianMixture gm;
  PatchLayout layout;
};

Target load_target(const TargetOpts& o) {
  std::optional<GaussianMixture> gm;
  std::vector<int> dims = o.dims;
  if (o.target == "causal") {
    Matrix c(2, 2);
    c << 1, 1, 1, 2;
    gm.emplace(Gaussian(Vector::Zero(2), c));
    if (dims.empty()) dims = {1, 1};
  } else if (o.target == "bimodal") {
    Matrix c(2, 2);
    c << 0.5, 0.2, 0.2, 0.4;
    gm.emplace(Vector::Constant(2, 0.5),
               std::vector<Gaussian>{Gaussian(Eigen::Vector2d(-1.5, -1.0), c),
                                     Gaussian(Eigen::Vector2d(1.5, 1.0), c)});
    if (dims.empty()) dims = {1, 1};
  } else {
    const json j = io::read_json_file(o.target);
    gm.emplace(io::mixture_from_json(j.contains("target") ? j.at("target") : j));
    if (dims.empty() && j.contains("dims")) dims = j.at("dims").get<std::vector<int>>();
  }
  if (dims.empty()) dims = {gm->dim()};
  PatchLayout layout(dims);
  require(layout.total_dim() == gm->dim(), "patch dimensions do not add up to the target dimension");
  return {std::move(*gm), std::move(layout)};
}

double certified_L(const GaussianMixture& gm) {
  if (gm.is_single()) return gm.component(0).max_precision_eigenvalue();
  double radius = 0.0;
  for (const auto& c : gm.components())
    radius = std::max(radius, c.mean().cwiseAbs().maxCoeff() +
                                  3.0 * std::sqrt(c.cov().diagonal().maxCoeff()));
  return moment_report(gm, radius, 2000, SeedPath(0)).lipschitz_bound;
}

TimeSchedule make_schedule(const SchedOpts& o, double L) {
  if (o.uniform_R > 0) return uniform_schedule(o.T, o.uniform_R);
  return build_schedule(o.T, o.eta, o.delta, o.L > 0.0 ? o.L : L);
}

// ---- small writers --------------------------------------------------------

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + p.string());
  out << text;
}

void write_matrix_csv(const fs::path& p, const Matrix& m, const std::string& prefix) {
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + p.string());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << c + 1;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << g17(m(r, c));
    out << '\n';
  }
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), "cannot open " + p.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

// ---- subcommands ----------------------------------------------------------

Command schedule_cmd(CLI::App& app) {
  struct Opts {
    double T = 2.0, eta = 0.5, delta = 0.25, L = 1.0, m0 = 0.0, eps_score = 0.0;
    int d = 1, K = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("schedule", "Build the three-regime time grid and its bound");
  sub->add_option("--T", o->T, "Horizon");
  sub->add_option("--eta", o->eta, "Step-size parameter");
  sub->add_option("--delta", o->delta, "Tail width");
  sub->add_option("--L", o->L, "Smoothness constant");
  sub->add_option("--m0", o->m0, "Second moment of the target");
  sub->add_option("--d", o->d, "Dimension");
  sub->add_option("--K", o->K, "Number of patches");
  sub->add_option("--eps-score", o->eps_score, "Average score error");
  return {sub, [o](Context& ctx) {
            const auto s = build_schedule(o->T, o->eta, o->delta, o->L);
            std::ofstream csv(ctx.file("schedule.csv"), std::ios::binary);
            csv << "r,t_r,eta_r,regime\n";
            for (int r = 0; r < s.R; ++r)
              csv << r << ',' << g17(s.t[r]) << ',' << g17(s.eta_r[r]) << ',' << s.regime(r) << '\n';
            csv << s.R << ',' << g17(s.t[s.R]) << ",,\n";
            const auto cond = check_step_condition(s);
            json j = io::to_json(s);
            j["delta_admissible_max"] = delta_admissible_max(o->L);
            j["kl_bound"] =
                kl_bound(BoundInputs::from_schedule(s, o->L, o->m0, o->d, o->K, o->eps_score));
            j["step_condition_holds"] = cond.holds;
            j["step_condition_worst_ratio"] = cond.worst_ratio;
            io::write_json_file(ctx.file("bounds.json"), j);
            std::cout << "R = " << s.R << " (M = " << s.M << ", N = " << s.N
                      << "), delta' = " << s.delta_achieved << '\n';
          }};
}

Command sample_cmd(CLI::App& app) {
  struct Opts {
    TargetOpts target;
    SchedOpts sched;
    int n = 100;
    double eps_bias = 0.0;
    std::string perturb = "constant";
    std::string direction = "stage";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("sample", "Autoregressive sampling with oracle scores");
  add_target(sub, o->target);
  add_schedule(sub, o->sched);
  sub->add_option("--n", o->n, "Number of samples");
  sub->add_option("--eps-bias", o->eps_bias, "Injected score error magnitude");
  sub->add_option("--perturb", o->perturb, "constant or rotational")
      ->check(CLI::IsMember({"constant", "rotational"}));
  sub->add_option("--bias-direction", o->direction, "stage or step")
      ->check(CLI::IsMember({"stage", "step"}));
  return {sub, [o](Context& ctx) {
            const auto tg = load_target(o->target);
            const auto s = make_schedule(o->sched, certified_L(tg.gm));
            RunConfig cfg;
            cfg.layout = tg.layout;
            cfg.schedule = s;
            cfg.n_samples = o->n;
            cfg.seed = SeedPath(ctx.seed);
            cfg.options.threads = ctx.threads;
            const auto mode = o->perturb == "rotational" ? PerturbMode::kRotational
                                                         : PerturbMode::kConstantBias;
            const auto dir = o->direction == "step" ? BiasDirection::kPerStep : BiasDirection::kPerStage;
            std::vector<ScoreSourcePtr> sources;
            for (int k = 1; k <= tg.layout.num_patches(); ++k) {
              ScoreSourcePtr src = conditional_oracle(tg.gm, tg.layout, k);
              if (o->eps_bias != 0.0) src = perturb(src, o->eps_bias, mode, ctx.seed, dir);
              sources.push_back(src);
            }
            cfg.source_factory = [&sources](int k) { return sources[k - 1]; };
            const Matrix x = ar_sample(cfg);
            write_matrix_csv(ctx.file("samples.csv"), x, "x");
            const Vector mean = x.colwise().mean();
            const Matrix centered = x.rowwise() - mean.transpose();
            const Matrix cov = centered.transpose() * centered / std::max<Eigen::Index>(1, x.rows() - 1);
            io::write_json_file(ctx.file("stats.json"),
                                {{"n", o->n}, {"R", s.R}, {"mean", io::to_json(mean)},
                                 {"cov", io::to_json(cov)}});
          }};
}

Command pushforward_cmd(CLI::App& app) {
  struct Opts {
    TargetOpts target;
    double T = 8.0, delta = 0.1, L = 0.0, eps_bias = 0.0;
    std::vector<double> etas{0.04, 0.02, 0.01, 0.005};
    std::string gain = "double";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("pushforward", "Exact output law and KL over an eta sweep");
  add_target(sub, o->target);
  sub->add_option("--T", o->T, "Horizon");
  sub->add_option("--delta", o->delta, "Tail width");
  sub->add_option("--L", o->L, "Smoothness constant (0: certified)");
  sub->add_option("--etas", o->etas, "Step-size parameters to sweep");
  sub->add_option("--eps-bias", o->eps_bias, "Constant score bias");
  sub->add_option("--gain", o->gain, "double or half")->check(CLI::IsMember({"double", "half"}));
  return {sub, [o](Context& ctx) {
            const auto tg = load_target(o->target);
            require(tg.gm.is_single(), "pushforward needs a single-Gaussian target");
            const Gaussian& g = tg.gm.component(0);
            const double L = o->L > 0.0 ? o->L : g.max_precision_eigenvalue();
            const double m0 = g.mean().squaredNorm() + g.cov().trace();
            std::optional<BiasSpec> bias;
            if (o->eps_bias != 0.0) {
              bias.emplace();
              bias->eps = o->eps_bias;
              bias->seed = ctx.seed;
            }
            const auto gain = o->gain == "half" ? ScoreGain::kHalf : ScoreGain::kDouble;
            std::ofstream csv(ctx.file("pushforward.csv"), std::ios::binary);
            csv << "eta,R,kl,kl_bound\n";
            json laws = json::array();
            for (double eta : o->etas) {
              const auto s = build_schedule(o->T, eta, o->delta, L);
              const auto res = exact_pushforward(g, tg.layout, s, bias, gain);
              const double bound = kl_bound(BoundInputs::from_schedule(
                  s, L, m0, g.dim(), tg.layout.num_patches(), std::abs(o->eps_bias)));
              csv << g17(eta) << ',' << s.R << ',' << g17(res.kl) << ',' << g17(bound) << '\n';
              laws.push_back({{"eta", eta}, {"kl", res.kl}, {"output", io::to_json(res.output)},
                              {"chain_terms", kl_chain_terms(g, tg.layout, res)}});
              std::cout << "eta " << eta << ": KL " << res.kl << " (bound " << bound << ")\n";
            }
            io::write_json_file(ctx.file("pushforward.json"), {{"L", L}, {"runs", laws}});
          }};
}

Command train_cmd(CLI::App& app) {
  struct Opts {
    TargetOpts target;
    SchedOpts sched;
    std::vector<int> hidden{8, 8};
    int steps = 2000, batch = 64, window = 200;
    double lr = 3e-4;
    std::string sampling = "uniform";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("train", "Train a small score network by denoising score matching");
  add_target(sub, o->target);
  add_schedule(sub, o->sched);
  sub->add_option("--hidden", o->hidden, "Hidden layer widths");
  sub->add_option("--steps", o->steps, "Adam steps");
  sub->add_option("--batch", o->batch, "Batch size");
  sub->add_option("--lr", o->lr, "Learning rate");
  sub->add_option("--window", o->window, "Window for the final mean loss");
  sub->add_option("--sampling", o->sampling, "uniform or reweighted")
      ->check(CLI::IsMember({"uniform", "reweighted"}));
  return {sub, [o](Context& ctx) {
            const auto tg = load_target(o->target);
            const auto s = make_schedule(o->sched, certified_L(tg.gm));
            const auto& dims = tg.layout.dims();
            for (int d : dims) require(d == dims.front(), "train needs equal patch dimensions");
            const int cond = tg.layout.total_dim() - dims.back();
            ScoreNet net(dims.front(), cond, o->hidden, SeedPath(ctx.seed).child(1));
            TrainConfig cfg;
            cfg.steps = o->steps;
            cfg.batch = o->batch;
            cfg.lr = o->lr;
            cfg.seed = ctx.seed;
            cfg.sampling = o->sampling == "reweighted" ? TimeSampling::kReweighted : TimeSampling::kUniform;
            LossTrace tr;
            try {
              tr = train(net, mixture_sampler(tg.gm), tg.layout, s, cfg);
            } catch (const DivergenceError& e) {
              std::ofstream out(ctx.file("trace.csv"), std::ios::binary);
              write_trace_csv(out, e.trace());
              throw;
            }
            tr.model_id = "scorenet";
            std::ofstream out(ctx.file("trace.csv"), std::ios::binary);
            write_trace_csv(out, tr);
            const int w = std::min(o->window, tr.steps());
            double mean = 0.0;
            for (int i = tr.steps() - w; i < tr.steps(); ++i) mean += tr.losses[i];
            mean /= w;
            json summary{{"steps", tr.steps()}, {"final_loss", tr.losses.back()},
                         {"final_window_mean", mean}, {"window", w}, {"K", tr.K}};
            if (tg.gm.is_single())
              summary["irreducible_constant"] =
                  dsm_irreducible_constant(tg.gm.component(0), tg.layout, s, cfg.sampling);
            io::write_json_file(ctx.file("train.json"), summary);
            io::write_json_file(ctx.file("model.json"),
                                {{"y_dim", net.y_dim()}, {"cond_width", net.cond_width()},
                                 {"hidden", net.hidden()}, {"params", io::to_json(net.params())}});
            std::cout << "final window mean " << mean << '\n';
          }};
}

Command analyze_cmd(CLI::App& app) {
  struct Opts {
    std::string trace, ddpm;
    int K = 1, window = 500;
    double threshold = 1e-4;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("analyze-trace", "Estimate loss constants and compare AR with DDPM");
  sub->add_option("--trace", o->trace, "Loss trace CSV (AR model, or any single trace)")->required();
  sub->add_option("--ddpm", o->ddpm, "DDPM loss trace CSV for the comparison");
  sub->add_option("--K", o->K, "Number of patches of the AR model");
  sub->add_option("--window", o->window, "Variance window length");
  sub->add_option("--threshold", o->threshold, "Variance threshold");
  return {sub, [o](Context& ctx) {
            auto load = [](const std::string& p) {
              std::ifstream in(p);
              require(static_cast<bool>(in), "cannot open " + p);
              return read_trace_csv(in);
            };
            LossTrace ar = load(o->trace);
            const auto ca = estimate_constant(ar, o->window, o->threshold);
            json j{{"trace", {{"C_mean", ca.C_mean}, {"C_final", ca.C_final},
                              {"window_start", ca.window_start},
                              {"window_variance", ca.window_variance}}}};
            if (!o->ddpm.empty()) {
              LossTrace dd = load(o->ddpm);
              ar.K = o->K;
              dd.K = 1;
              const auto cd = estimate_constant(dd, o->window, o->threshold);
              const auto cmp = compare_losses(ar, dd, o->K, ca.C_mean, cd.C_mean);
              j["ddpm"] = {{"C_mean", cd.C_mean}, {"C_final", cd.C_final},
                           {"window_start", cd.window_start}, {"window_variance", cd.window_variance}};
              j["fraction_positive"] = cmp.fraction_positive;
              std::ofstream csv(ctx.file("delta.csv"), std::ios::binary);
              csv << "step,delta\n";
              for (std::size_t s = 0; s < cmp.delta.size(); ++s) csv << s << ',' << g17(cmp.delta[s]) << '\n';
              std::cout << "fraction of steps with delta > 0: " << cmp.fraction_positive << '\n';
            }
            io::write_json_file(ctx.file("analysis.json"), j);
          }};
}

Command counterexample_cmd(CLI::App& app) {
  struct Opts {
    double eps = 0.2, M = 1.0;
    int dx = 1, dy = 1;
    std::vector<double> probe;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("counterexample", "Closed-form Gaussian pair: small joint KL, large conditional KL");
  sub->add_option("--eps", o->eps, "Epsilon in (0, 1/2]");
  sub->add_option("--M", o->M, "Blow-up factor");
  sub->add_option("--dx", o->dx, "Dimension of x");
  sub->add_option("--dy", o->dy, "Dimension of y (<= dx)");
  sub->add_option("--probe", o->probe, "Conditioning point x (default all ones)");
  return {sub, [o](Context& ctx) {
            CounterexampleSpec spec{o->eps, o->M, o->dy, o->dx};
            Vector x = Vector::Ones(o->dx);
            if (!o->probe.empty()) x = Eigen::Map<const Vector>(o->probe.data(), o->probe.size());
            const auto rep = check_counterexample(spec, x);
            const auto ce = build_counterexample(spec);
            const json j{{"eps", o->eps}, {"M", o->M}, {"d_x", o->dx}, {"d_y", o->dy},
                         {"probe", io::to_json(x)},
                         {"kl_joint", rep.kl_joint}, {"joint_budget", rep.joint_budget},
                         {"kl_cond", rep.kl_cond}, {"kl_cond_mean_term", rep.kl_cond_mean_term},
                         {"kl_cond_cov_term", rep.kl_cond_cov_term}, {"cond_floor", rep.cond_floor},
                         {"passes_joint", rep.passes_joint}, {"passes_cond", rep.passes_cond},
                         {"mean_term_exceeds_floor", rep.mean_term_exceeds_floor},
                         {"coordinates", "x then y"},
                         {"p_star", io::to_json(ce.p_star)}, {"p_hat", io::to_json(ce.p_hat)}};
            io::write_json_file(ctx.file("counterexample.json"), j);
            std::cout << j.dump(2) << '\n';
          }};
}

Command init_bound_cmd(CLI::App& app) {
  struct Opts {
    std::string target = "causal";
    double L = 0.0;
    std::vector<double> t{0.0, 0.5, 1.0, 2.0, 4.0};
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("init-bound", "Exact KL(q_t || N(0, I)) against the initialization bound");
  sub->add_option("--target", o->target, "Single-Gaussian JSON file or preset");
  sub->add_option("--L", o->L, "Smoothness constant (0: largest precision eigenvalue)");
  sub->add_option("--t", o->t, "Times");
  return {sub, [o](Context& ctx) {
            const auto tg = load_target({o->target, {}});
            require(tg.gm.is_single(), "init-bound needs a single-Gaussian target");
            const Gaussian& g = tg.gm.component(0);
            const double L = o->L > 0.0 ? o->L : g.max_precision_eigenvalue();
            const auto rows = init_error_sweep(g, L, o->t);
            std::ofstream csv(ctx.file("init_bound.csv"), std::ios::binary);
            csv << "t,exact_kl,bound,dominated\n";
            bool all = true;
            for (const auto& r : rows) {
              csv << g17(r.t) << ',' << g17(r.exact) << ',' << g17(r.bound) << ',' << int(r.dominated) << '\n';
              all = all && r.dominated;
            }
            io::write_json_file(ctx.file("init_bound.json"), {{"L", L}, {"all_dominated", all}});
            std::cout << (all ? "bound holds at every t\n" : "bound VIOLATED\n");
          }};
}

Command ar_vs_joint_cmd(CLI::App& app) {
  struct Opts {
    TargetOpts target;
    SchedOpts sched;
    double eps_joint = 0.0, eps_ar = 0.0;
    int ar_stage = 0;
    std::vector<double> joint_direction, probe;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("ar-vs-joint", "Conditional KL of joint-path vs AR-path generation");
  add_target(sub, o->target);
  add_schedule(sub, o->sched);
  sub->add_option("--eps-joint", o->eps_joint, "Constant bias on the joint path");
  sub->add_option("--eps-ar", o->eps_ar, "Constant bias on the AR path");
  sub->add_option("--ar-stage", o->ar_stage, "Apply the AR bias to this stage only (0: all)");
  sub->add_option("--joint-direction", o->joint_direction, "Fixed joint bias direction");
  sub->add_option("--probe", o->probe, "Patch-1 value for pointwise conditional KL");
  return {sub, [o](Context& ctx) {
            const auto tg = load_target(o->target);
            require(tg.gm.is_single(), "ar-vs-joint needs a single-Gaussian target");
            const Gaussian& g = tg.gm.component(0);
            const auto s = make_schedule(o->sched, g.max_precision_eigenvalue());
            std::optional<BiasSpec> jb, ab;
            if (o->eps_joint != 0.0) {
              jb.emplace();
              jb->eps = o->eps_joint;
              jb->seed = ctx.seed;
              if (!o->joint_direction.empty()) {
                Vector u = Eigen::Map<const Vector>(o->joint_direction.data(), o->joint_direction.size());
                require(u.size() == g.dim() && u.norm() > 0.0, "joint direction must be a nonzero d-vector");
                jb->fixed_directions = {u.normalized()};
              }
            }
            if (o->eps_ar != 0.0) {
              ab.emplace();
              ab->seed = ctx.seed;
              if (o->ar_stage > 0) {
                ab->stage_eps.assign(tg.layout.num_patches(), 0.0);
                require(o->ar_stage <= tg.layout.num_patches(), "ar-stage out of range");
                ab->stage_eps[o->ar_stage - 1] = o->eps_ar;
              } else {
                ab->eps = o->eps_ar;
              }
            }
            std::optional<Vector> probe;
            if (!o->probe.empty()) probe = Eigen::Map<const Vector>(o->probe.data(), o->probe.size());
            const auto r = ar_vs_joint_conditional(g, tg.layout, s, jb, ab, probe);
            json j{{"R", s.R}, {"kl_joint_path", r.kl_joint_path}, {"kl_ar_path", r.kl_ar_path},
                   {"cond_kl_joint_path", r.cond_kl_joint_path}, {"cond_kl_ar_path", r.cond_kl_ar_path},
                   {"joint_output", io::to_json(r.joint_output)}, {"ar_output", io::to_json(r.ar_output)}};
            if (probe) {
              j["probe_cond_kl_joint_path"] = *r.probe_cond_kl_joint_path;
              j["probe_cond_kl_ar_path"] = *r.probe_cond_kl_ar_path;
            }
            io::write_json_file(ctx.file("ar_vs_joint.json"), j);
            std::cout << "joint path: KL " << r.kl_joint_path << ", conditional KL " << r.cond_kl_joint_path
                      << "\nAR path:    KL " << r.kl_ar_path << ", conditional KL " << r.cond_kl_ar_path << '\n';
          }};
}

Command synth_gen_cmd(CLI::App& app) {
  struct Opts {
    int task = 1, n = 100;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("synth-gen", "Generate synthetic raster task images");
  sub->add_option("--task", o->task, "Task id (1 or 2)")->check(CLI::IsMember({1, 2}));
  sub->add_option("--n", o->n, "Number of images");
  return {sub, [o](Context& ctx) {
            const auto samples = o->task == 1 ? synth::gen_task1(o->n, ctx.seed, {}, ctx.threads)
                                              : synth::gen_task2(o->n, ctx.seed, {}, ctx.threads);
            std::ofstream idx(ctx.file("index.csv"), std::ios::binary);
            idx << "filename,task,l1,h1,h2,l2,target_ratio\n";
            for (std::size_t i = 0; i < samples.size(); ++i) {
              char name[32];
              std::snprintf(name, sizeof name, "images/%05zu.ppm", i);
              std::ofstream img(ctx.file(name), std::ios::binary);
              synth::write_ppm(img, samples[i].image);
              const auto& t = samples[i].truth;
              idx << name << ',' << o->task << ',' << g17(t.l1) << ',' << g17(t.h1) << ',' << g17(t.h2)
                  << ',' << g17(t.l2) << ',' << g17(samples[i].target_ratio) << '\n';
            }
          }};
}

Command synth_eval_cmd(CLI::App& app) {
  struct Opts {
    std::string dir;
    int task = 0, tolerance = 0;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("synth-eval", "Extract features from images and score the constraint");
  sub->add_option("--dir", o->dir, "Directory holding index.csv and the images")->required();
  sub->add_option("--task", o->task, "Task id (0: read from the index)");
  sub->add_option("--tolerance", o->tolerance, "Per-channel color tolerance");
  return {sub, [o](Context& ctx) {
            const auto rows = read_csv(fs::path(o->dir) / "index.csv");
            require(rows.size() >= 2, "index.csv has no samples");
            int task = o->task;
            if (task == 0) task = std::stoi(rows[1].at(1));
            std::vector<std::string> names;
            std::vector<synth::Features> feats;
            for (std::size_t i = 1; i < rows.size(); ++i) {
              std::ifstream in(fs::path(o->dir) / rows[i].at(0), std::ios::binary);
              require(static_cast<bool>(in), "cannot open image " + rows[i].at(0));
              try {
                feats.push_back(synth::extract_features(synth::read_ppm(in), task, o->tolerance).features);
                names.push_back(rows[i][0]);
              } catch (const synth::ExtractionError& e) {
                std::cerr << rows[i][0] << ": " << e.what() << '\n';
              }
            }
            auto rep = synth::evaluate_features(feats, task);
            rep.n_input = static_cast<int>(rows.size() - 1);
            std::ofstream csv(ctx.file("ratios.csv"), std::ios::binary);
            csv << "filename,ratio,x,y,kept\n";
            for (std::size_t i = 0; i < feats.size(); ++i) {
              const auto& f = feats[i];
              const double r = rep.ratios[i];
              const double x = task == 1 ? f.l1 * f.h2 : f.l1;
              const double y = task == 1 ? f.l2 * f.h1 : f.l2;
              csv << names[i] << ',' << g17(r) << ',' << g17(x) << ',' << g17(y) << ','
                  << int(r >= rep.p05 && r <= rep.p95) << '\n';
            }
            const json j{{"task", task}, {"n_input", rep.n_input}, {"n_extracted", rep.n_extracted},
                         {"target_ratio", synth::target_ratio(task)}, {"slope", rep.slope}, {"r2", rep.r2},
                         {"slope_filtered", rep.slope_filtered}, {"r2_filtered", rep.r2_filtered},
                         {"p05", rep.p05}, {"p95", rep.p95},
                         {"fraction_within_10pct", rep.fraction_within_10pct}};
            io::write_json_file(ctx.file("eval.json"), j);
            std::cout << "slope " << rep.slope << ", R2 " << rep.r2 << ", within 10%: "
                      << rep.fraction_within_10pct << '\n';
          }};
}

// ---- report ---------------------------------------------------------------

std::vector<double> column(const std::vector<std::vector<std::string>>& rows, std::size_t c) {
  std::vector<double> v;
  for (std::size_t i = 1; i < rows.size(); ++i)
    v.push_back(c < rows[i].size() && !rows[i][c].empty() ? std::stod(rows[i][c]) : NAN);
  return v;
}

Command report_cmd(CLI::App& app) {
  struct Opts {
    std::vector<std::string> runs;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("report", "Render SVG plots and a summary table from run directories");
  sub->add_option("--runs", o->runs, "Run directories (each holding run.json)");
  return {sub, [o](Context& ctx) {
            std::string md = "# ardiff report\n\n| run | command | digest | key result |\n|---|---|---|---|\n";
            if (o->runs.empty()) std::cerr << "warning: no runs given, writing an empty report\n";
            int plot_id = 0;
            for (const auto& run : o->runs) {
              const fs::path dir(run);
              const json m = io::read_json_file(dir / "run.json");
              const std::string cmd = m.value("command", "");
              std::string key = "";
              auto emit = [&](const svg::Plot& p, const std::string& stem) {
                const std::string name = "report/" + std::to_string(plot_id++) + "_" + stem + ".svg";
                write_text(ctx.file(name), svg::render(p));
                return name;
              };
              if (cmd == "pushforward") {
                const auto rows = read_csv(dir / "pushforward.csv");
                svg::Plot p{"KL vs eta", "eta", "KL", true, true, {}, {}};
                p.series.push_back({column(rows, 0), column(rows, 2), "exact KL", "#1f77b4"});
                p.series.push_back({column(rows, 0), column(rows, 3), "bound", "#d62728"});
                key = emit(p, "kl_vs_eta");
              } else if (cmd == "synth-eval") {
                const auto rows = read_csv(dir / "ratios.csv");
                const json e = io::read_json_file(dir / "eval.json");
                const auto x = column(rows, 2);
                const double slope = e.at("slope").get<double>();
                double xmax = 0.0;
                for (double v : x) xmax = std::max(xmax, v);
                svg::Plot p{"ratio scatter", "x", "y", false, false, {}, {}};
                p.series.push_back({x, column(rows, 3), "samples", "#1f77b4", true});
                p.series.push_back({{0.0, xmax}, {0.0, slope * xmax}, "fit", "#d62728"});
                char note[96];
                std::snprintf(note, sizeof note, "slope %.4f, R2 %.4f", slope, e.at("r2").get<double>());
                p.notes.push_back(note);
                key = emit(p, "ratio_scatter") + " (" + note + ")";
              } else if (cmd == "analyze-trace" && fs::exists(dir / "delta.csv")) {
                const auto rows = read_csv(dir / "delta.csv");
                svg::Plot p{"loss delta per step", "step", "delta", false, false, {}, {}};
                p.series.push_back({column(rows, 0), column(rows, 1), "delta", "#2ca02c", false, true});
                const json a = io::read_json_file(dir / "analysis.json");
                p.notes.push_back("fraction positive " + std::to_string(a.value("fraction_positive", 0.0)));
                key = emit(p, "loss_delta");
              } else if (cmd == "train") {
                const auto rows = read_csv(dir / "trace.csv");
                svg::Plot p{"training loss", "step", "DSM loss", false, false, {}, {}};
                p.series.push_back({column(rows, 0), column(rows, 1), "loss", "#1f77b4"});
                const json t = io::read_json_file(dir / "train.json");
                if (t.contains("irreducible_constant")) {
                  const double c = t["irreducible_constant"].get<double>();
                  const double n = static_cast<double>(rows.size() - 1);
                  p.series.push_back({{0.0, n}, {c, c}, "constant", "#d62728"});
                }
                key = emit(p, "train_loss");
              } else if (cmd == "init-bound") {
                const auto rows = read_csv(dir / "init_bound.csv");
                svg::Plot p{"initialization error", "t", "KL", false, true, {}, {}};
                p.series.push_back({column(rows, 0), column(rows, 1), "exact", "#1f77b4"});
                p.series.push_back({column(rows, 0), column(rows, 2), "bound", "#d62728"});
                key = emit(p, "init_bound");
              }
              md += "| " + run + " | " + cmd + " | " + m.value("config_digest", "") + " | " + key + " |\n";
            }
            if (o->runs.empty()) md += "\n(no runs)\n";
            write_text(ctx.file("report/summary.md"), md);
          }};
}

}  // namespace

std::vector<Command> register_commands(CLI::App& app) {
  return {schedule_cmd(app),      sample_cmd(app),         pushforward_cmd(app),
          train_cmd(app),         analyze_cmd(app),        counterexample_cmd(app),
          init_bound_cmd(app),    ar_vs_joint_cmd(app),    synth_gen_cmd(app),
          synth_eval_cmd(app),    report_cmd(app)};
}

}  // namespace ardiff::cli
