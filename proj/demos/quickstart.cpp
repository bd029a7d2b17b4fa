// Fit the light solver on the recoverable task and compare one learned conditional with the truth.
#include "iot/iot.hpp"

#include <iostream>

int main() {
  using namespace iot;
  flush_denormals();
  Rng rng(0);

  // 2000 pairs plus 2000 extra unpaired x and y.
  const RecoverableData rd = make_recoverable_dataset(2000, 4000, 4000, rng);

  TrainConfig cfg;
  cfg.heads = 4;
  cfg.components = 4;
  cfg.arch = {{64, 64}, {16}};
  cfg.iters = 3000;
  const LightTrainResult res = train_light(cfg, rd.data, rng);
  if (res.divergence) {
    std::cerr << res.divergence->message() << "\n";
    return 1;
  }
  const HistoryRow& last = res.history.back();
  std::cout << "final loss " << last.total << " (paired " << last.paired << ", fy " << last.fy << ", logZ "
            << last.log_z << ")\n";

  const Vec x{{0.5, -1.0}};
  const auto truth = rd.task.conditional(x);
  const ConditionalMixture model = res.model.conditional(x, cfg.eps);
  const GridKlResult kl = grid_kl([&](const Vec& y) { return rd.task.log_density(x, y); },
                                  [&](const Vec& y) { return conditional_logpdf(model, y); },
                                  mixture_grid(truth.mean, truth.variance, 200));
  std::cout << "KL(true || model) at x = (0.5, -1): " << kl.value << " nats\n";

  const Mat ys = sample_conditional(model, rng, 5);
  std::cout << "five samples of y | x:\n" << ys.transpose() << "\n";
}
