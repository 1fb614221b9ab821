#include <benchmark/benchmark.h>

#include "cgvae/distributions.hpp"
#include "cgvae/divergence.hpp"
#include "cgvae/expfam.hpp"
#include "cgvae/rng.hpp"
#include "cgvae/vae.hpp"

using namespace cgvae;

namespace {

void BM_SampleConcrete(benchmark::State& state) {
  const int d = 8, R = static_cast<int>(state.range(0));
  Rng rng(1);
  Tensor logits = rng.gaussian_tensor({static_cast<std::size_t>(d),
                                       static_cast<std::size_t>(R)});
  for (auto _ : state) {
    Tensor gumbel({static_cast<std::size_t>(d), static_cast<std::size_t>(R)});
    for (std::size_t i = 0; i < gumbel.size(); ++i) gumbel[i] = rng.gumbel();
    benchmark::DoNotOptimize(sample_concrete(logits, 0.5, gumbel));
  }
}
BENCHMARK(BM_SampleConcrete)->Arg(51)->Arg(100);

void BM_KlCategorySurrogate(benchmark::State& state) {
  const int d = 8, R = static_cast<int>(state.range(0));
  Rng rng(2);
  Tensor beta = rng.gaussian_tensor({static_cast<std::size_t>(d),
                                     static_cast<std::size_t>(R)});
  Tensor alpha = rng.gaussian_tensor({static_cast<std::size_t>(d),
                                      static_cast<std::size_t>(R)});
  for (auto _ : state)
    benchmark::DoNotOptimize(kl_category_surrogate(beta, alpha));
}
BENCHMARK(BM_KlCategorySurrogate)->Arg(51)->Arg(100);

void BM_KlZMonteCarlo(benchmark::State& state) {
  const int R = 100;
  Rng rng(3);
  Tensor beta = rng.gaussian_tensor({1, R});
  Tensor alpha = rng.gaussian_tensor({1, R});
  for (auto _ : state) {
    Rng stream = rng.split(7);
    benchmark::DoNotOptimize(
        kl_z_monte_carlo(beta, alpha, 0.5, state.range(0), R, stream));
  }
}
BENCHMARK(BM_KlZMonteCarlo)->Arg(10000)->Arg(100000);

void BM_ToNatural(benchmark::State& state) {
  Rng rng(4);
  const int K = 51, S = 5;
  DiscreteExpFam fam;
  fam.K = K;
  fam.S = S;
  fam.t = Tensor({K, S});
  for (std::size_t i = 0; i < fam.t.size(); ++i)
    fam.t[i] = 2.0 * rng.uniform() - 1.0;
  std::vector<double> phi(S);
  for (double& p : phi) p = rng.gaussian();
  MomentParam eta = to_moment(fam, phi);
  for (auto _ : state) benchmark::DoNotOptimize(to_natural(fam, eta.eta));
}
BENCHMARK(BM_ToNatural);

void BM_FreeEnergyStep(benchmark::State& state) {
  ModelConfig mc;
  mc.kind = static_cast<ModelKind>(state.range(0));
  mc.input_dim = 64;
  mc.d = 8;
  mc.L = 1;
  mc.C = 10;
  mc.M = 5;
  mc.R = 51;
  mc.enc_hidden = {128};
  mc.dec_hidden = {128};
  Rng rng(5);
  Rng init_rng = rng.split(1);
  ModelParams params = init_params(mc, init_rng);
  Tensor batch({100, 64});
  for (std::size_t i = 0; i < batch.size(); ++i)
    batch[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  for (auto _ : state) {
    Rng noise_rng = rng.split(2);
    NoiseDraws noise = draw_noise(mc, 100, mc.L, noise_rng);
    ParamMap grads;
    benchmark::DoNotOptimize(
        free_energy(batch, params, mc, noise, 0.9, &grads));
  }
}
BENCHMARK(BM_FreeEnergyStep)
    ->Arg(static_cast<int>(ModelKind::kGauss))
    ->Arg(static_cast<int>(ModelKind::kCat))
    ->Arg(static_cast<int>(ModelKind::kCgBpef));

}  // namespace

BENCHMARK_MAIN();
