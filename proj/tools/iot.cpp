#include "iot/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <map>

namespace {

using namespace iot;

/// One --flag per config key (model.a_hidden -> --a-hidden); train.seed is covered by --seed.
void add_config_flags(CLI::App* app, std::map<std::string, std::string>& raw) {
  for (const auto& [section, key, value] : config_entries(RunConfig{})) {
    if (section == "train" && key == "seed") continue;
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    const std::string full = section + "." + key;
    app->add_option("--" + flag, raw[full], full + " (default " + (value.empty() ? "none" : value) + ")");
  }
}

cli::Overrides collect(const std::map<std::string, std::string>& raw, const CLI::App* app) {
  cli::Overrides ov;
  for (const auto& [full, value] : raw) {
    std::string flag = full.substr(full.find('.') + 1);
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (app->count("--" + flag) > 0) ov.set(full, value);
  }
  return ov;
}

}  // namespace

int main(int argc, char** argv) {
  iot::flush_denormals();
  CLI::App app{"Semi-supervised conditional density learning by inverse entropic optimal transport"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed;

  cli::GenDataOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  g->add_option("--task", gen.task, "swissroll or recoverable")->capture_default_str();
  g->add_option("-p,--p", gen.p, "paired samples P")->capture_default_str();
  g->add_option("-q,--q", gen.q, "unpaired x samples Q (including the paired prefix)")->capture_default_str();
  g->add_option("-r,--r", gen.r, "unpaired y samples R (including the paired prefix)")->capture_default_str();
  g->add_option("--per-x", gen.per_x, "conditional draws per paired x (grouped test data)")->capture_default_str();
  g->add_option("--seed", seed, "random seed (fallback: IOT_SEED, then 0)");
  g->add_option("--out", gen.out, "output directory")->required();

  cli::TrainOptions tr;
  std::map<std::string, std::string> train_raw;
  auto* t = app.add_subcommand("train", "Train a model");
  t->add_option("--config", tr.config, "INI config file");
  t->add_option("--preset", tr.preset, "default, weather or ebm_swissroll")->capture_default_str();
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--history", tr.history, "history CSV (default <out>.history.csv)");
  t->add_option("--seed", seed, "random seed (fallback: IOT_SEED, then config)");
  add_config_flags(t, train_raw);

  cli::EvalOptions ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on held-out data");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
  e->add_option("--data", ev.data, "test dataset directory (paired.csv holds test pairs)")->required();
  e->add_option("--oracle", ev.oracle, "oracle spec for kl (default <data>/oracle.json)");
  e->add_option("--metrics", ev.metrics, "ll, cfd, kl")->delimiter(',')->capture_default_str();
  e->add_option("--out", ev.out, "report CSV (default stdout)");
  e->add_option("--dump", ev.dump, "CSV of model and true samples for cfd groups");
  e->add_option("--model-samples", ev.model_samples, "model samples per x for cfd")->capture_default_str();
  e->add_option("--group-radius", ev.group_radius, "bin x within this radius for cfd (0: exact)")->capture_default_str();
  e->add_option("--kl-points", ev.kl_points, "test x used for kl")->capture_default_str();
  e->add_option("--grid", ev.grid, "grid cells per axis for kl")->capture_default_str();
  e->add_option("--seed", seed, "random seed (fallback: IOT_SEED, then 0)");

  cli::SampleOptions sa;
  auto* s = app.add_subcommand("sample", "Draw conditional samples");
  s->add_option("--checkpoint", sa.checkpoint, "checkpoint path")->required();
  s->add_option("--x", sa.inline_x, "comma-separated x (repeatable)");
  s->add_option("--x-file", sa.x_file, "CSV with header x0..");
  s->add_option("-n,--n", sa.n, "samples per x")->capture_default_str();
  s->add_option("--out", sa.out, "output CSV (default stdout)");
  s->add_option("--seed", seed, "random seed (fallback: IOT_SEED, then 0)");
  s->add_option("--ula-steps", sa.ula_steps, "ULA steps K (ebm)");
  s->add_option("--eta", sa.eta, "ULA step size (ebm)");
  s->add_option("--sigma0", sa.sigma0, "ULA initial noise scale (ebm)");

  cli::GradcheckOptions gc;
  std::map<std::string, std::string> gc_raw;
  auto* c = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
  c->add_option("--config", gc.config, "INI config file");
  c->add_option("--preset", gc.preset, "default, weather or ebm_swissroll")->capture_default_str();
  c->add_option("--seed", seed, "random seed (fallback: IOT_SEED, then config)");
  c->add_option("--sabotage", gc.sabotage)->group("");
  add_config_flags(c, gc_raw);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    if (*g) {
      gen.seed = seed;
      return cli::gen_data(gen, std::cerr);
    }
    if (*t) {
      tr.seed = seed;
      tr.overrides = collect(train_raw, t);
      return cli::train(tr, std::cerr);
    }
    if (*e) {
      ev.seed = seed;
      return cli::eval(ev, std::cerr);
    }
    if (*s) {
      sa.seed = seed;
      return cli::sample(sa, std::cerr);
    }
    gc.seed = seed;
    gc.overrides = collect(gc_raw, c);
    return cli::gradcheck_cmd(gc, std::cerr);
  } catch (const cli::UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
  } catch (const std::domain_error& err) {
    std::cerr << "error: " << err.what() << "\n";
  }
  return cli::kUsage;
}
