#pragma once

#include "iot/checkpoint.hpp"
#include "iot/config.hpp"
#include "iot/ebm_solver.hpp"
#include "iot/io.hpp"
#include "iot/light_solver.hpp"
#include "iot/metrics.hpp"
#include "iot/ot_data.hpp"

#include <iostream>

namespace iot::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kDiverged = 3, kGradcheckFailed = 4 };

/// Raised by commands for bad arguments or data; maps to kUsage.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GenDataOptions {
  std::string task = "swissroll";
  Eigen::Index p = 128, q = 1024, r = 1024;
  Eigen::Index per_x = 1;  // conditional draws per distinct paired x
  std::optional<std::uint64_t> seed;
  std::filesystem::path out;
};

inline int gen_data(const GenDataOptions& o, std::ostream& log) {
  if (o.task != "swissroll" && o.task != "recoverable") throw UsageError("gen-data: task must be swissroll or recoverable");
  if (o.p < 1) throw UsageError("gen-data: P must be >= 1");
  if (o.p > std::min(o.q, o.r)) throw UsageError("gen-data: P must not exceed Q or R");
  if (o.per_x < 1 || o.p % o.per_x != 0) throw UsageError("gen-data: per-x must divide P");
  const std::uint64_t seed = resolve_seed(o.seed, 0);
  Rng rng(seed);
  Dataset d;
  nlohmann::json manifest = {{"task", o.task}, {"p", o.p}, {"q", o.q}, {"r", o.r}, {"per_x", o.per_x}, {"seed", seed}};
  const Eigen::Index distinct = o.p / o.per_x;
  if (o.task == "swissroll") {
    Mat px, py;
    int unconverged = 0;
    if (o.per_x == 1) {
      OtPairs pairs = swiss_ot_pairs(o.p, rng);
      px = std::move(pairs.x);
      py = std::move(pairs.y);
      unconverged = pairs.unconverged;
    } else {
      px.resize(2, o.p);
      py.resize(2, o.p);
      const Mat xs = gaussian_source(distinct, 2, rng);
      for (Eigen::Index g = 0; g < distinct; ++g) {
        px.middleCols(g * o.per_x, o.per_x) = xs.col(g).replicate(1, o.per_x);
        py.middleCols(g * o.per_x, o.per_x) = swiss_conditional_samples(xs.col(g), o.per_x, rng);
      }
    }
    const Mat ex = gaussian_source(o.q - o.p, 2, rng);
    const Mat ey = o.r > o.p ? swiss_roll(o.r - o.p, kRollNoise, rng) : Mat(2, 0);
    d = assemble_dataset(std::move(px), std::move(py), ex, ey);
    manifest["generator"] = {{"source", "standard normal"},
                             {"target", "swiss roll"},
                             {"roll_t_range", {kRollTMin, kRollTMax}},
                             {"roll_scale", kRollScale},
                             {"roll_noise", kRollNoise},
                             {"pairing", "minibatch entropic OT, rotation cost +-90 deg, plan sampling"},
                             {"minibatch", 64},
                             {"sinkhorn_reg", kDataSinkhornReg},
                             {"sinkhorn_unconverged", unconverged}};
  } else {
    const RecoverableTask task = default_recoverable_task();
    if (o.per_x == 1) {
      d = make_recoverable_dataset(o.p, o.q, o.r, rng, task).data;
    } else {
      Mat px(2, o.p), py(2, o.p);
      const Mat xs = gaussian_source(distinct, 2, rng);
      for (Eigen::Index g = 0; g < distinct; ++g) {
        px.middleCols(g * o.per_x, o.per_x) = xs.col(g).replicate(1, o.per_x);
        py.middleCols(g * o.per_x, o.per_x) = task.sample(xs.col(g), o.per_x, rng);
      }
      const Mat ex = gaussian_source(o.q - o.p, 2, rng);
      const Mat hx = gaussian_source(o.r - o.p, 2, rng);
      Mat ey(2, o.r - o.p);
      for (Eigen::Index i = 0; i < ey.cols(); ++i) ey.col(i) = task.sample(hx.col(i), 1, rng);
      d = assemble_dataset(std::move(px), std::move(py), ex, ey);
    }
    write_json(o.out / "oracle.json", (std::filesystem::create_directories(o.out), task_to_json(task)));
    manifest["generator"] = {{"source", "standard normal"}, {"oracle", "oracle.json"}};
  }
  save_dataset(o.out, d);
  write_json(o.out / "manifest.json", manifest);
  log << "wrote " << d.num_paired() << " paired, " << d.num_x() << " x, " << d.num_y() << " y samples to "
      << o.out.string() << "\n";
  return kOk;
}

/// Command-line overrides of config keys; empty entries leave the config untouched.
struct Overrides {
  std::vector<std::pair<std::string, std::string>> values;  // "section.key" -> text

  void set(const std::string& full_key, const std::string& value) { values.emplace_back(full_key, value); }
  void apply(RunConfig& c) const {
    for (const auto& [k, v] : values) {
      const auto dot = k.find('.');
      set_config_value(c, k.substr(0, dot), k.substr(dot + 1), v);
    }
  }
};

inline RunConfig resolve_config(const std::filesystem::path& config_path, const std::string& preset_name,
                                 const Overrides& ov, std::optional<std::uint64_t> seed_flag) {
  RunConfig c;
  try {
    c = config_path.empty() ? preset(preset_name) : load_config(config_path, preset_name);
    ov.apply(c);
    c.train.seed = resolve_seed(seed_flag, c.train.seed);
    validate(c);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return c;
}

inline void write_history(const std::filesystem::path& path, const History& h) {
  Mat rows(5, static_cast<Eigen::Index>(h.size()));
  for (std::size_t i = 0; i < h.size(); ++i)
    rows.col(static_cast<Eigen::Index>(i)) << static_cast<double>(h[i].iteration), h[i].total, h[i].paired, h[i].fy,
        h[i].log_z;
  write_csv(path, {"iteration", "total", "term_paired", "term_fy", "term_logZ"}, rows);
}

struct TrainOptions {
  std::filesystem::path config;
  std::string preset = "default";
  std::filesystem::path data;
  std::filesystem::path out;
  std::filesystem::path history;  // default: <out>.history.csv
  Overrides overrides;
  std::optional<std::uint64_t> seed;
};

inline Dataset load_data_or_throw(const std::filesystem::path& dir) {
  try {
    Dataset d = load_dataset(dir);
    validate(d);
    if (d.num_paired() < 1) throw DataError("dataset: need at least one paired sample");
    return d;
  } catch (const DataError& e) {
    throw UsageError(e.what());
  } catch (const std::domain_error& e) {
    throw UsageError(e.what());
  }
}

inline int train(const TrainOptions& o, std::ostream& log) {
  const RunConfig cfg = resolve_config(o.config, o.preset, o.overrides, o.seed);
  const Dataset data = load_data_or_throw(o.data);
  if (o.out.empty()) throw UsageError("train: --out is required");
  const std::filesystem::path history_path = o.history.empty() ? std::filesystem::path(o.out.string() + ".history.csv") : o.history;
  Rng rng(cfg.train.seed);
  Checkpoint ck{cfg, LightModel{}, {}, 0};
  History history;
  std::optional<Divergence> divergence;
  if (cfg.variant == "ebm") {
    auto res = train_ebm(ebm_config(cfg), data, rng);
    ck.model = std::move(res.model);
    history = std::move(res.history);
    divergence = res.divergence;
  } else {
    auto res = train_light(cfg.train, data, rng);
    ck.model = std::move(res.model);
    history = std::move(res.history);
    divergence = res.divergence;
  }
  ck.rng_state = rng_to_string(rng);
  ck.iteration = static_cast<long>(history.size());
  write_history(history_path, history);
  if (divergence) {
    const std::filesystem::path partial = o.out.string() + ".diverged";
    save_checkpoint(partial, ck);
    log << "error: " << divergence->message() << "; partial checkpoint written to " << partial.string() << "\n";
    return kDiverged;
  }
  save_checkpoint(o.out, ck);
  if (!history.empty()) {
    const auto& last = history.back();
    log << "iterations " << history.size() << "  total " << format_double(last.total) << "  paired "
        << format_double(last.paired) << "  fy " << format_double(last.fy) << "  "
        << (cfg.variant == "ebm" ? "model " : "logZ ") << format_double(last.log_z) << "\n";
  } else {
    log << "iterations 0 (checkpoint holds the initialization)\n";
  }
  return kOk;
}

inline Checkpoint load_checkpoint_or_throw(const std::filesystem::path& path) {
  try {
    return load_checkpoint(path);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

/// Conditional samples for each column of xs, n per x, grouped by x.
inline Mat model_samples(const Checkpoint& ck, const Mat& xs, Eigen::Index n, const LangevinConfig& lc, Rng& rng) {
  if (const auto* lm = std::get_if<LightModel>(&ck.model)) {
    Mat out(lm->potential.dim(), xs.cols() * n);
    for (Eigen::Index i = 0; i < xs.cols(); ++i)
      out.middleCols(i * n, n) = sample_conditional(lm->conditional(xs.col(i), ck.config.train.eps), rng, n);
    return out;
  }
  return ebm_sample(std::get<EbmModel>(ck.model), xs, n, lc, rng);
}

struct SampleOptions {
  std::filesystem::path checkpoint;
  std::vector<std::string> inline_x;  // comma-separated coordinates
  std::filesystem::path x_file;
  Eigen::Index n = 1;
  std::filesystem::path out;
  std::optional<std::uint64_t> seed;
  std::optional<int> ula_steps;
  std::optional<double> eta;
  std::optional<double> sigma0;
};

inline Vec parse_point(const std::string& text) {
  std::vector<double> v;
  for (const auto& cell : split_csv_line(text)) {
    char* end = nullptr;
    const double d = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0' || !std::isfinite(d)) throw UsageError("bad coordinate '" + cell + "' in --x");
    v.push_back(d);
  }
  return Eigen::Map<Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline int sample(const SampleOptions& o, std::ostream& log) {
  const Checkpoint ck = load_checkpoint_or_throw(o.checkpoint);
  if (o.n < 0) throw UsageError("sample: n must be >= 0");
  const Eigen::Index dx = std::visit(
      [](const auto& m) -> Eigen::Index {
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LightModel>) return m.cost.x_dim();
        else return m.x_dim();
      },
      ck.model);
  std::vector<Vec> points;
  for (const auto& s : o.inline_x) points.push_back(parse_point(s));
  if (!o.x_file.empty()) {
    Table t;
    try {
      t = read_csv(o.x_file);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    if (t.header != numbered("x", dx)) throw UsageError("sample: x file header must be x0..x" + std::to_string(dx - 1));
    for (Eigen::Index i = 0; i < t.data.cols(); ++i) points.push_back(t.data.col(i));
  }
  if (points.empty()) throw UsageError("sample: give --x or --x-file");
  Mat xs(dx, static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dx) throw UsageError("sample: x must have " + std::to_string(dx) + " coordinates");
    xs.col(static_cast<Eigen::Index>(i)) = points[i];
  }
  LangevinConfig lc = ck.config.langevin;
  if (ck.is_ebm()) {
    if (!o.ula_steps) log << "warning: --ula-steps not given; using K=" << lc.steps << "\n";
    if (o.ula_steps) lc.steps = *o.ula_steps;
    if (o.eta) lc.eta = *o.eta;
    if (o.sigma0) lc.sigma0 = *o.sigma0;
    try {
      validate(lc);
    } catch (const std::domain_error& e) {
      throw UsageError(e.what());
    }
  }
  Rng rng(resolve_seed(o.seed, 0));
  const Mat ys = model_samples(ck, xs, o.n, lc, rng);
  Mat rows(dx + ys.rows(), ys.cols());
  for (Eigen::Index i = 0; i < xs.cols(); ++i) rows.block(0, i * o.n, dx, o.n) = xs.col(i).replicate(1, o.n);
  rows.bottomRows(ys.rows()) = ys;
  auto header = numbered("x", dx);
  const auto yh = numbered("y", ys.rows());
  header.insert(header.end(), yh.begin(), yh.end());
  if (o.out.empty()) {
    write_csv(std::cout, header, rows);
  } else {
    write_csv(o.out, header, rows);
  }
  return kOk;
}

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;    // test pairs in paired.csv
  std::filesystem::path oracle;  // default: <data>/oracle.json when present
  std::vector<std::string> metrics{"ll"};
  std::filesystem::path out;     // report CSV; stdout when empty
  std::filesystem::path dump;    // optional sample dump for cfd groups
  Eigen::Index model_samples = 1000;
  double group_radius = 0.0;
  Eigen::Index kl_points = 20;
  int grid = 400;
  std::optional<std::uint64_t> seed;
};

struct ReportRow {
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  Eigen::Index n = 0;
};

inline void write_report(std::ostream& os, const std::vector<ReportRow>& rows) {
  os << "metric,value,stderr,n\n";
  for (const auto& r : rows) os << r.metric << ',' << format_double(r.value) << ',' << format_double(r.stderr_) << ',' << r.n << '\n';
}

inline double stderr_of(const Vec& v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1) / v.size());
}

inline int eval(const EvalOptions& o, std::ostream& log) {
  const Checkpoint ck = load_checkpoint_or_throw(o.checkpoint);
  Dataset test;
  try {
    test = load_dataset(o.data);
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
  if (test.num_paired() < 1) throw UsageError("eval: data dir has no paired test samples");
  Rng rng(resolve_seed(o.seed, 0));
  std::vector<ReportRow> rows;
  const auto* lm = std::get_if<LightModel>(&ck.model);
  const double eps = ck.config.train.eps;
  for (const auto& metric : o.metrics) {
    if (metric == "ll") {
      if (!lm) throw UsageError("eval: ll needs the closed-form density of a light checkpoint");
      const auto ll = test_log_likelihood(
          [&](const Vec& x, const Vec& y) { return conditional_logpdf(lm->conditional(x, eps), y); }, test.paired_x,
          test.paired_y);
      rows.push_back({"ll", ll.value, ll.stderr_, ll.n});
    } else if (metric == "cfd") {
      const auto groups = group_by_x(test.paired_x, test.paired_y, o.group_radius);
      std::vector<Mat> truth, model;
      for (const auto& g : groups) {
        if (g.ys.cols() < 2)
          throw UsageError("eval: cfd needs at least two test y per x; group the test data by x (gen-data --per-x) "
                           "or set --group-radius");
        truth.push_back(g.ys);
        model.push_back(model_samples(ck, Mat(g.x), o.model_samples, ck.config.langevin, rng));
      }
      const CfdResult cfd = conditional_frechet_distance(model, truth);
      rows.push_back({"cfd", cfd.value, stderr_of(cfd.per_group), cfd.per_group.size()});
      rows.push_back({"cfd_ridge_added", cfd.ridge_added ? 1.0 : 0.0, 0.0, cfd.per_group.size()});
      if (!o.dump.empty()) {
        std::ofstream os(o.dump, std::ios::binary);
        const Eigen::Index dx = test.x_dim(), dy = test.y_dim();
        for (const auto& h : numbered("x", dx)) os << h << ',';
        for (const auto& h : numbered("y", dy)) os << h << ',';
        os << "source\n";
        for (std::size_t g = 0; g < groups.size(); ++g) {
          for (const auto* set : {&model[g], &truth[g]}) {
            for (Eigen::Index i = 0; i < set->cols(); ++i) {
              for (Eigen::Index k = 0; k < dx; ++k) os << format_double(groups[g].x(k)) << ',';
              for (Eigen::Index k = 0; k < dy; ++k) os << format_double((*set)(k, i)) << ',';
              os << (set == &model[g] ? "model" : "true") << '\n';
            }
          }
        }
      }
    } else if (metric == "kl") {
      if (!lm) throw UsageError("eval: kl needs the closed-form density of a light checkpoint");
      std::filesystem::path spec = o.oracle;
      if (spec.empty() && std::filesystem::exists(o.data / "oracle.json")) spec = o.data / "oracle.json";
      if (spec.empty()) throw UsageError("eval: kl needs an oracle spec (--oracle or oracle.json in the data dir)");
      RecoverableTask task;
      try {
        task = task_from_json(read_json(spec));
      } catch (const DataError& e) {
        throw UsageError(e.what());
      }
      const auto groups = group_by_x(test.paired_x, test.paired_y);
      const Eigen::Index k = std::min<Eigen::Index>(o.kl_points, static_cast<Eigen::Index>(groups.size()));
      Vec kls(k);
      bool floored = false;
      for (Eigen::Index i = 0; i < k; ++i) {
        const Vec& x = groups[static_cast<std::size_t>(i)].x;
        const auto truth = task.conditional(x);
        const auto mix = lm->conditional(x, eps);
        const auto res = grid_kl([&](const Vec& y) { return task.log_density(x, y); },
                                 [&](const Vec& y) { return conditional_logpdf(mix, y); },
                                 mixture_grid(truth.mean, truth.variance, o.grid));
        kls(i) = res.value;
        floored = floored || res.model_floored;
      }
      rows.push_back({"kl", kls.mean(), stderr_of(kls), k});
      rows.push_back({"kl_floored", floored ? 1.0 : 0.0, 0.0, k});
    } else {
      throw UsageError("eval: unknown metric '" + metric + "' (ll, cfd, kl)");
    }
  }
  if (o.out.empty()) {
    write_report(std::cout, rows);
  } else {
    std::ofstream os(o.out, std::ios::binary);
    if (!os) throw UsageError("cannot write " + o.out.string());
    write_report(os, rows);
    log << "wrote " << rows.size() << " metrics to " << o.out.string() << "\n";
  }
  return kOk;
}

struct GradcheckOptions {
  std::filesystem::path config;
  std::string preset = "default";
  Overrides overrides;
  std::optional<std::uint64_t> seed;
  std::string sabotage;  // test hook: drop one term (paired, fy, logz) from the analytic gradient
};

inline constexpr double kGradcheckTolerance = 1e-4;

/// Small random instance of the configured model; hidden widths are capped at 8 to keep the
/// coordinate sweep short.
inline int gradcheck_cmd(const GradcheckOptions& o, std::ostream& log) {
  const RunConfig cfg = resolve_config(o.config, o.preset, o.overrides, o.seed);
  Rng rng(cfg.train.seed);
  auto cap = [](std::vector<Eigen::Index> w) {
    for (auto& v : w) v = std::min<Eigen::Index>(v, 8);
    return w;
  };
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (auto& e : m.reshaped()) e = normal(rng);
    return m;
  };
  const LossBatch b{random(2, 3), random(2, 3), random(2, 4), random(2, 5)};
  GradcheckReport rep;
  if (cfg.variant == "ebm") {
    if (!o.sabotage.empty()) throw UsageError("gradcheck: --sabotage applies to the light loss only");
    EbmArchitecture arch = cfg.ebm_arch;
    arch.f_hidden = cap(arch.f_hidden);
    arch.c_hidden = cap(arch.c_hidden);
    const EbmModel m = ebm_init(2, 2, cfg.train.eps, arch, rng);
    const WeightedSamples s{b.x, random(2, 4), Vec::Constant(4, 0.25)};
    const auto lg = ebm_loss_grad(m, b.paired_x, b.paired_y, b.y, s);
    auto loss = [&](const Vec& t) {
      EbmModel q = m;
      q.assign(t);
      return ebm_loss_grad(q, b.paired_x, b.paired_y, b.y, s).terms.total();
    };
    const auto nf = static_cast<Eigen::Index>(m.f_net.num_params());
    rep = gradcheck(loss, lg.grad.flatten(), m.flatten(), 1e-5,
                    {{"f_net", 0, nf}, {"c_net", nf, static_cast<Eigen::Index>(m.c_net.num_params())}});
  } else {
    CostArchitecture arch{cap(cfg.train.arch.a_hidden), cap(cfg.train.arch.v_hidden)};
    LightModel m;
    m.cost = cost_init(2, 2, cfg.train.heads, arch, rng);
    m.potential = {0.5 * random(cfg.train.components, 1), random(2, cfg.train.components),
                   0.3 * random(2, cfg.train.components)};
    TermMask mask;
    if (o.sabotage == "paired") mask.paired = false;
    else if (o.sabotage == "fy") mask.fy = false;
    else if (o.sabotage == "logz") mask.log_z = false;
    else if (!o.sabotage.empty()) throw UsageError("gradcheck: --sabotage must be paired, fy or logz");
    const double eps = cfg.train.eps;
    const bool naive = cfg.variant == "naive_ss";
    if (naive && !o.sabotage.empty()) throw UsageError("gradcheck: --sabotage applies to the light loss only");
    const Vec analytic = naive ? naive_ss_loss_grad(m.cost, m.potential, b, eps).grad.flatten()
                               : light_loss_grad(m.cost, m.potential, b, eps, mask).grad.flatten();
    auto loss = [&](const Vec& t) {
      LightModel q = m;
      q.assign(t);
      return naive ? naive_ss_loss(q.cost, q.potential, b, eps) : light_loss(q.cost, q.potential, b, eps).total();
    };
    const auto na = static_cast<Eigen::Index>(m.cost.a_net.num_params());
    const auto nv = static_cast<Eigen::Index>(m.cost.v_net.num_params());
    const Eigen::Index nc = cfg.train.components, off = na + nv;
    rep = gradcheck(loss, analytic, m.flatten(), 1e-5,
                    {{"a_net", 0, na},
                     {"v_net", na, nv},
                     {"log_weight", off, nc},
                     {"center", off + nc, 2 * nc},
                     {"log_scale", off + 3 * nc, 2 * nc}});
  }
  for (const auto& [name, v] : rep.group_max) log << name << " max_rel_error " << format_double(v) << "\n";
  log << "max_rel_error " << format_double(rep.max_rel_error) << " at coordinate " << rep.worst_index << " (tolerance "
      << kGradcheckTolerance << ")\n";
  if (!rep.skipped.empty()) log << "skipped " << rep.skipped.size() << " coordinates with non-finite loss\n";
  if (rep.max_rel_error > kGradcheckTolerance) {
    log << "gradcheck FAILED\n";
    return kGradcheckFailed;
  }
  log << "gradcheck passed\n";
  return kOk;
}

}  // namespace iot::cli
