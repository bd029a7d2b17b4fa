// End-to-end acceptance checks. One line per criterion: "criterion N: PASS|FAIL  details".
#include "iot/iot.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace iot;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

Mat normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  Mat m(rows, cols);
  for (auto& e : m.reshaped()) e = normal(rng);
  return m;
}

// ---------------------------------------------------------------------------------------------
// Random light-model instances shared by criteria 1-3.

struct Instance {
  LightModel model;
  Vec x;
  double eps = 1.0;
};

// Instance i covers M = 1 + i % 4 and N = 1 + i % 5 (all 20 pairs over i < 20); Dy is 1 for
// the first half and 2 for the second.
Instance random_instance(int i, Rng& rng, const CostArchitecture& arch = {{8}, {8}}) {
  const Eigen::Index dy = i < 10 ? 1 : 2, m = 1 + i % 4, n = 1 + i % 5;
  Instance in;
  in.model.cost = cost_init(2, dy, m, arch, rng);
  in.model.potential = {normal_matrix(rng, n, 1, 0.5), normal_matrix(rng, dy, n), normal_matrix(rng, dy, n, 0.3)};
  in.x = normal_matrix(rng, 2, 1);
  in.eps = std::uniform_real_distribution<double>(0.5, 1.5)(rng);
  return in;
}

Mat component_variances(const ConditionalMixture& mix) {
  Mat var(mix.dim(), mix.heads() * mix.components());
  for (Eigen::Index m = 0; m < mix.heads(); ++m)
    for (Eigen::Index n = 0; n < mix.components(); ++n)
      var.col(mix.column(m, n)) = mix.log_var.col(n).array().exp();
  return var;
}

GridSpec instance_grid(const ConditionalMixture& mix) {
  return mixture_grid(mix.mean, component_variances(mix), mix.dim() == 1 ? 4000 : 600);
}

// log of the midpoint sum of exp(g) over the grid.
template <typename LogIntegrand>
double log_grid_integral(const GridSpec& grid, const LogIntegrand& g) {
  Vec vals(grid.num_cells());
  for (Eigen::Index c = 0; c < vals.size(); ++c) vals(c) = g(grid.cell(c));
  return logsumexp(vals) + std::log(grid.cell_volume());
}

Outcome criterion_1() {
  Rng rng(101);
  double worst1 = 0.0, worst2 = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Instance in = random_instance(i, rng);
    const auto mix = in.model.conditional(in.x, in.eps);
    // Direct route: f and c evaluated pointwise, no mixture algebra.
    const CostHeads h = cost_forward(in.model.cost, Mat(in.x));
    const Eigen::Index dy = in.model.cost.y_dim();
    const double log_q = log_grid_integral(instance_grid(mix), [&](const Vec& y) {
      const double c = cost_from_heads(h.heads(0, dy), h.log_v(0), y, in.eps);
      return (eval_f(in.model.potential, y, in.eps) - c) / in.eps;
    });
    const double rel = std::abs(std::expm1(log_q - mix.log_Z));
    (dy == 1 ? worst1 : worst2) = std::max(dy == 1 ? worst1 : worst2, rel);
  }
  return {worst1 <= 1e-5 && worst2 <= 1e-3,
          "max rel error 1D " + fmt(worst1) + " (tol 1e-5), 2D " + fmt(worst2) + " (tol 1e-3), 20 instances"};
}

Outcome criterion_2() {
  Rng rng(101);
  double worst_mass = 0.0, worst_route = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Instance in = random_instance(i, rng);
    const auto mix = in.model.conditional(in.x, in.eps);
    const double log_mass = log_grid_integral(instance_grid(mix), [&](const Vec& y) { return conditional_logpdf(mix, y); });
    worst_mass = std::max(worst_mass, std::abs(std::expm1(log_mass)));
    Rng probe(1000 + i);
    Mat ys(mix.dim(), 50);
    ys << sample_conditional(mix, probe, 25), normal_matrix(probe, mix.dim(), 25, 2.0);
    for (Eigen::Index k = 0; k < ys.cols(); ++k) {
      const Vec y = ys.col(k);
      const double route = (eval_f(in.model.potential, y, in.eps) - eval_c(in.model.cost, in.x, y, in.eps)) / in.eps - mix.log_Z;
      worst_route = std::max(worst_route, std::abs(conditional_logpdf(mix, y) - route));
    }
  }
  return {worst_mass <= 1e-4 && worst_route <= 1e-10,
          "max |mass - 1| " + fmt(worst_mass) + " (tol 1e-4), max two-route gap " + fmt(worst_route) +
              " (tol 1e-10), 20 instances"};
}

Outcome criterion_3() {
  std::map<std::string, double> group_worst;
  double worst = 0.0;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(300 + seed);
    for (int i = 0; i < 20; ++i) {
      const Instance in = random_instance(i, rng, {{8, 8}, {8}});
      const Eigen::Index dy = in.model.cost.y_dim();
      const LossBatch b{normal_matrix(rng, 2, 3), normal_matrix(rng, dy, 3), normal_matrix(rng, 2, 4),
                        normal_matrix(rng, dy, 5)};
      const LightModel& m = in.model;
      const Vec analytic = light_loss_grad(m.cost, m.potential, b, in.eps).grad.flatten();
      auto loss = [&](const Vec& t) {
        LightModel q = m;
        q.assign(t);
        return light_loss(q.cost, q.potential, b, in.eps).total();
      };
      const auto na = static_cast<Eigen::Index>(m.cost.a_net.num_params());
      const auto nv = static_cast<Eigen::Index>(m.cost.v_net.num_params());
      const Eigen::Index nc = m.potential.components(), off = na + nv;
      const GradcheckReport rep = gradcheck(loss, analytic, m.flatten(), 1e-5,
                                            {{"a_net", 0, na},
                                             {"v_net", na, nv},
                                             {"log_weight", off, nc},
                                             {"center", off + nc, dy * nc},
                                             {"log_scale", off + nc + dy * nc, dy * nc}});
      for (const auto& [name, v] : rep.group_max) group_worst[name] = std::max(group_worst[name], v);
      worst = std::max(worst, rep.max_rel_error);
      failures += (rep.max_rel_error > 1e-4 || !rep.skipped.empty()) ? 1 : 0;
    }
  }
  std::string detail = "max rel error " + fmt(worst) + " (tol 1e-4) over 100 checks;";
  for (const auto& [name, v] : group_worst) detail += " " + name + " " + fmt(v, 2);
  return {failures == 0, detail};
}

// ---------------------------------------------------------------------------------------------
// Oracle recovery.

Outcome criterion_4() {
  Rng rng(4);
  const RecoverableData rd = make_recoverable_dataset(10000, 20000, 20000, rng);
  TrainConfig cfg;
  cfg.heads = 4;
  cfg.components = 4;
  cfg.arch = {{64, 64}, {16}};
  cfg.iters = 20000;
  const LightTrainResult res = train_light(cfg, rd.data, rng);
  if (res.divergence) return {false, res.divergence->message()};
  Rng test_rng(40);
  const Mat tx = gaussian_source(20, 2, test_rng);
  double total = 0.0, worst = 0.0;
  bool floored = false;
  for (Eigen::Index i = 0; i < tx.cols(); ++i) {
    const Vec x = tx.col(i);
    const auto truth = rd.task.conditional(x);
    const auto model = res.model.conditional(x, cfg.eps);
    const GridKlResult kl = grid_kl([&](const Vec& y) { return rd.task.log_density(x, y); },
                                    [&](const Vec& y) { return conditional_logpdf(model, y); },
                                    mixture_grid(truth.mean, truth.variance));
    total += kl.value;
    worst = std::max(worst, kl.value);
    floored = floored || kl.model_floored;
  }
  const double mean = total / 20.0;
  return {mean <= 0.05, "mean grid-KL " + fmt(mean) + " nats (tol 0.05), max " + fmt(worst) +
                            (floored ? ", log floor hit" : "") + ", M=N=4, 20000 iterations"};
}

// ---------------------------------------------------------------------------------------------
// Swiss roll.

constexpr int kPermutations = 500;

LightTrainResult train_swiss(const TrainConfig& cfg, const Dataset& data, std::uint64_t seed) {
  Rng rng(seed);
  return train_light(cfg, data, rng);
}

// One conditional draw per x; the x are fresh source samples.
Mat light_marginal_samples(const LightModel& m, double eps, Eigen::Index n, Rng& rng) {
  const Mat xs = gaussian_source(n, 2, rng);
  Mat ys(2, n);
  for (Eigen::Index i = 0; i < n; ++i) ys.col(i) = sample_conditional(m.conditional(xs.col(i), eps), rng, 1);
  return ys;
}

// Angle between the two fitted modes as seen from the roll's center.
bool bimodal(const Mat& ys) {
  const Gmm2 fit = fit_gmm2(ys);
  return angle_between_deg(fit.mean[0], fit.mean[1]) >= 60.0;
}

Outcome criterion_5() {
  Rng rng(5);
  const Dataset data = make_swiss_dataset(128, 1024, 1024, rng);
  const TrainConfig cfg;  // recorded Swiss-roll defaults
  const LightTrainResult res = train_swiss(cfg, data, 50);
  if (res.divergence) return {false, res.divergence->message()};
  Rng eval_rng(55);
  const Mat gen = light_marginal_samples(res.model, cfg.eps, 4000, eval_rng);
  const Mat held_out = swiss_roll(4000, kRollNoise, eval_rng);
  const PermutationTest pt = energy_permutation_test(gen, held_out, kPermutations, eval_rng);
  const Mat tx = gaussian_source(50, 2, eval_rng);
  int bimodal_count = 0;
  for (Eigen::Index i = 0; i < tx.cols(); ++i)
    bimodal_count += bimodal(sample_conditional(res.model.conditional(tx.col(i), cfg.eps), eval_rng, 500)) ? 1 : 0;
  const bool a = pt.p_value > 0.01, b = bimodal_count >= 40;
  return {a && b, std::string("(a) ") + (a ? "pass" : "fail") + " energy " + fmt(pt.statistic) + " p " +
                      fmt(pt.p_value) + " (level 0.01); (b) " + (b ? "pass " : "fail ") + std::to_string(bimodal_count) +
                      "/50 bimodal at >= 60 deg (need 40)"};
}

// Held-out pairs from the same pairing process as the training data.
const OtPairs& swiss_test_pairs() {
  static const OtPairs pairs = [] {
    Rng rng(9090);
    return swiss_ot_pairs(1000, rng);
  }();
  return pairs;
}

double held_out_ll(const LightModel& m, double eps) {
  const OtPairs& t = swiss_test_pairs();
  return test_log_likelihood([&](const Vec& x, const Vec& y) { return conditional_logpdf(m.conditional(x, eps), y); },
                             t.x, t.y)
      .value;
}

// Criteria 6 and 8 train ten models each, so they run a shorter schedule than criterion 5.
constexpr long kAblationIters = 2000;
// The naive marginal costs O(batch_x * batch_y * M * N) per step; both objectives in criterion 8
// use these smaller x and y batches so the comparison stays like for like.
constexpr Eigen::Index kContrastBatch = 32;

Outcome criterion_6() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(600 + seed);
    const Dataset full = make_swiss_dataset(128, 1024, 1024, rng);
    const Dataset prefix{full.paired_x, full.paired_y, full.paired_x, full.paired_y};
    TrainConfig cfg;
    cfg.iters = kAblationIters;
    const LightTrainResult a = train_swiss(cfg, full, 60 + seed), b = train_swiss(cfg, prefix, 60 + seed);
    if (a.divergence || b.divergence) return {false, "seed " + std::to_string(seed) + " diverged"};
    const double la = held_out_ll(a.model, cfg.eps), lb = held_out_ll(b.model, cfg.eps);
    wins += la > lb ? 1 : 0;
    detail += " [full " + fmt(la) + ", prefix " + fmt(lb) + "]";
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds with LL(1024,1024) > LL(prefix) (need 4):" + detail};
}

Outcome criterion_8() {
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(800 + seed);
    const Dataset data = make_swiss_dataset(128, 1024, 1024, rng);
    TrainConfig cfg;
    cfg.iters = kAblationIters;
    cfg.batch_x = cfg.batch_y = kContrastBatch;
    TrainConfig naive = cfg;
    naive.variant = Objective::naive_ss;
    const LightTrainResult a = train_swiss(cfg, data, 80 + seed), b = train_swiss(naive, data, 80 + seed);
    if (a.divergence || b.divergence) return {false, "seed " + std::to_string(seed) + " diverged"};
    const double la = held_out_ll(a.model, cfg.eps), lb = held_out_ll(b.model, cfg.eps);
    wins += lb < la ? 1 : 0;
    detail += " [light " + fmt(la) + ", naive " + fmt(lb) + "]";
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds with LL(naive_ss) < LL(light) (need 4):" + detail};
}

// ---------------------------------------------------------------------------------------------
// EBM.

Outcome criterion_7_moments() {
  // E(y) = |y|^2 / 2: the stationary law is N(0, I). Chains start far from it.
  Rng rng(71);
  const Eigen::Index chains = 10000;
  const Mat xs = Mat::Zero(1, chains);
  const Mat y0 = Mat::Constant(2, chains, 3.0);
  const LangevinConfig cfg{2000, 0.01, 1.0, true};
  const Mat ys = langevin([](const Mat&, const Mat& y) { return y; }, xs, y0, cfg, rng);
  const Moments mo = sample_moments(ys);
  const double mean = mo.mean.cwiseAbs().maxCoeff();
  const double var_lo = mo.cov.diagonal().minCoeff(), var_hi = mo.cov.diagonal().maxCoeff();
  const bool ok = mean <= 0.05 && var_lo >= 0.85 && var_hi <= 1.15;
  return {ok, "max |mean| " + fmt(mean) + ", var in [" + fmt(var_lo) + ", " + fmt(var_hi) + "]"};
}

Outcome criterion_7_quadrature() {
  const EbmArchitecture arch{{6}, {6, 6}, 0.2};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(700 + seed);
    const EbmModel m = ebm_init(1, 1, 1.0, arch, rng);
    const Mat px = normal_matrix(rng, 1, 3), py = normal_matrix(rng, 1, 3), yb = normal_matrix(rng, 1, 4);
    const Mat xs = normal_matrix(rng, 1, 4);
    auto exact_loss = [&](const EbmModel& q) {
      const double paired = mlp_apply(q.c_net, detail::stack_xy(px, py)).mean() / q.eps;
      const double fy = -mlp_apply(q.f_net, yb).mean() / q.eps;
      return paired + fy + quadrature_samples_1d(q, xs, -5.0, 5.0, 1000).log_z.mean();
    };
    const auto qs = quadrature_samples_1d(m, xs, -5.0, 5.0, 1000);
    const Vec analytic = ebm_loss_grad(m, px, py, yb, qs.samples).grad.flatten();
    const GradcheckReport rep = gradcheck(
        [&](const Vec& t) {
          EbmModel q = m;
          q.assign(t);
          return exact_loss(q);
        },
        analytic, m.flatten());
    worst = std::max(worst, rep.max_rel_error);
  }
  return {worst <= 1e-3, "max rel error " + fmt(worst) + " (tol 1e-3), 5 instances"};
}

constexpr long kEbmIters = 3000;

Outcome criterion_7_swiss() {
  Rng rng(7);
  const Dataset data = make_swiss_dataset(128, 1024, 1024, rng);
  const RunConfig rc = preset("ebm_swissroll");
  EbmConfig cfg;
  cfg.eps = rc.train.eps;
  cfg.arch = rc.ebm_arch;
  cfg.langevin = rc.langevin;
  cfg.lr_paired = rc.train.lr_paired;
  cfg.lr_unpaired = rc.train.lr_unpaired;
  cfg.iters = kEbmIters;
  Rng train_rng(70);
  const EbmTrainResult res = train_ebm(cfg, data, train_rng);
  if (res.divergence) return {false, res.divergence->message()};
  Rng eval_rng(77);
  const Mat xs = gaussian_source(4000, 2, eval_rng);
  const Mat gen = ebm_sample(res.model, xs, 1, cfg.langevin, eval_rng);
  const Mat held_out = swiss_roll(4000, kRollNoise, eval_rng);
  const PermutationTest pt = energy_permutation_test(gen, held_out, kPermutations, eval_rng);
  return {pt.p_value > 0.05, "energy " + fmt(pt.statistic) + " p " + fmt(pt.p_value) + " (level 0.05), " +
                                 std::to_string(kEbmIters) + " iterations"};
}

Outcome criterion_7() {
  const Outcome a = criterion_7_moments(), b = criterion_7_quadrature(), c = criterion_7_swiss();
  auto tag = [](const Outcome& o) { return std::string(o.pass ? "pass " : "fail "); };
  return {a.pass && b.pass && c.pass,
          "(i) " + tag(a) + a.detail + "; (ii) " + tag(b) + b.detail + "; (iii) " + tag(c) + c.detail};
}

// ---------------------------------------------------------------------------------------------
// Infrastructure.

int run_cli(const std::string& args, const fs::path& out, const fs::path& err) {
  const std::string cmd = std::string(IOT_CLI_PATH) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

// Concatenated bytes of every regular file under p, in path order.
std::string snapshot(const fs::path& p) {
  if (fs::is_regular_file(p)) return slurp(p);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string out;
  for (const auto& f : files) out += fs::relative(f, p).string() + "\n" + slurp(f);
  return out;
}

Outcome criterion_10() {
  std::string detail;
  bool ok = true;

  // Checkpoint round trip.
  {
    Rng rng(10);
    const RecoverableData rd = make_recoverable_dataset(200, 400, 400, rng);
    RunConfig rc = preset("default");
    rc.train.heads = 3;
    rc.train.components = 4;
    rc.train.arch = {{16}, {8}};
    rc.train.iters = 50;
    const LightTrainResult res = train_light(rc.train, rd.data, rng);
    const fs::path path = fs::temp_directory_path() / "iot_acceptance_ck.json";
    save_checkpoint(path, {rc, res.model, rng_to_string(rng), rc.train.iters});
    const Checkpoint back = load_checkpoint(path);
    const auto& m = std::get<LightModel>(back.model);
    int mismatches = 0;
    for (int probe = 0; probe < 100; ++probe) {
      const Vec x = normal_matrix(rng, 2, 1), y = normal_matrix(rng, 2, 1, 2.0);
      mismatches += conditional_logpdf(res.model.conditional(x, rc.train.eps), y) !=
                            conditional_logpdf(m.conditional(x, back.config.train.eps), y)
                        ? 1
                        : 0;
    }
    ok = ok && mismatches == 0;
    detail += "checkpoint " + std::to_string(100 - mismatches) + "/100 probes bitwise";
  }

  // Every command twice with the same seed.
  {
    const fs::path root = fs::temp_directory_path() / "iot_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string r = root.string() + "/";
    const std::string small = " --heads 2 --components 3 --a-hidden 16 --v-hidden 8 --iters 20 ";
    struct Command {
      std::string args;
      std::vector<std::string> outputs;
    };
    const std::vector<Command> commands = {
        {"gen-data --task swissroll -p 16 -q 32 -r 32 --seed 3 --out " + r + "swiss_@", {r + "swiss_@"}},
        {"gen-data --task recoverable -p 40 -q 80 -r 80 --per-x 5 --seed 3 --out " + r + "rec_@", {r + "rec_@"}},
        {"train --data " + r + "rec_a" + small + "--seed 4 --out " + r + "ck_@.json --history " + r + "h_@.csv",
         {r + "ck_@.json", r + "h_@.csv"}},
        {"sample --checkpoint " + r + "ck_a.json --x 0.5,-0.5 -n 50 --seed 5 --out " + r + "s_@.csv", {r + "s_@.csv"}},
        {"eval --checkpoint " + r + "ck_a.json --data " + r + "rec_a --metrics ll,cfd,kl --kl-points 2 --grid 60"
         " --model-samples 50 --seed 6 --out " + r + "e_@.csv",
         {r + "e_@.csv"}},
        {"gradcheck --seed 7", {}},
    };
    int reproducible = 0;
    for (const auto& cmd : commands) {
      std::string captured[2];
      bool ran = true;
      for (int k = 0; k < 2; ++k) {
        const std::string tag(1, static_cast<char>('a' + k));
        auto sub = [&](std::string s) {
          for (std::size_t at; (at = s.find('@')) != std::string::npos;) s.replace(at, 1, tag);
          return s;
        };
        const fs::path out = r + "stdout_" + tag + ".txt", err = r + "stderr_" + tag + ".txt";
        ran = ran && run_cli(sub(cmd.args), out, err) == 0;
        // Logs echo the output paths, so stderr only counts for commands without output files.
        captured[k] = slurp(out) + (cmd.outputs.empty() ? slurp(err) : std::string());
        for (const auto& o : cmd.outputs) captured[k] += snapshot(sub(o));
      }
      const bool same = ran && captured[0] == captured[1] && !captured[0].empty();
      reproducible += same ? 1 : 0;
      if (!same) detail += "; not reproducible: " + cmd.args.substr(0, cmd.args.find(' '));
    }
    ok = ok && reproducible == static_cast<int>(commands.size());
    detail += ", " + std::to_string(reproducible) + "/" + std::to_string(commands.size()) + " commands byte-reproducible";
  }

  // Sinkhorn on data-generation-sized problems.
  {
    Rng rng(1010);
    double worst = 0.0;
    int converged = 0;
    const Vec u = Vec::Constant(64, 1.0 / 64);
    for (int trial = 0; trial < 50; ++trial) {
      Mat cost = rotation_cost(gaussian_source(64, 2, rng), swiss_roll(64, kRollNoise, rng), 90.0);
      cost /= cost.maxCoeff();
      const Coupling c = sinkhorn(cost, u, u, kDataSinkhornReg);
      if (!c.converged) continue;
      ++converged;
      worst = std::max(worst, marginal_violation(c));
    }
    ok = ok && converged > 0 && worst <= 1e-6;
    detail += ", Sinkhorn " + std::to_string(converged) + "/50 converged, max violation " + fmt(worst) + " (tol 1e-6)";
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  flush_denormals();
  CLI::App app{"acceptance checks"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criteria to run (default: all)")->check(CLI::IsMember({1, 2, 3, 4, 5, 6, 7, 8, 10}));
  CLI11_PARSE(app, argc, argv);
  if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 10};

  const std::map<int, Outcome (*)()> table = {{1, criterion_1}, {2, criterion_2}, {3, criterion_3},
                                              {4, criterion_4}, {5, criterion_5}, {6, criterion_6},
                                              {7, criterion_7}, {8, criterion_8}, {10, criterion_10}};
  bool all = true;
  for (int id : which) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = table.at(id)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << " [" << fmt(secs, 3)
              << " s]" << std::endl;
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
