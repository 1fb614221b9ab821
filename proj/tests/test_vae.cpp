#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "cgvae/data.hpp"
#include "cgvae/rng.hpp"
#include "cgvae/vae.hpp"
#include "doctest.h"

using namespace cgvae;

namespace {

ModelConfig small_config(ModelKind kind) {
  ModelConfig mc;
  mc.kind = kind;
  mc.input_dim = 16;
  mc.d = 2;
  mc.L = 2;
  mc.C = 3;
  mc.M = 3;
  mc.R = 11;
  mc.T_max = 1.0;
  mc.T_min = 0.6;
  mc.enc_hidden = {8};
  mc.dec_hidden = {8};
  return mc;
}

Tensor random_binary_batch(Rng& rng, std::size_t n, std::size_t dim) {
  Tensor t({n, dim});
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return t;
}

double fd_gradient_error(ModelKind kind, std::uint64_t seed) {
  ModelConfig mc = small_config(kind);
  Rng rng(seed);
  Rng init_rng = rng.split(1);
  Rng noise_rng = rng.split(2);
  Rng data_rng = rng.split(3);
  ModelParams params = init_params(mc, init_rng);
  Tensor batch = random_binary_batch(data_rng, 2, 16);
  NoiseDraws noise = draw_noise(mc, 2, mc.L, noise_rng);
  const double T = 0.7, step = 1e-5;

  ParamMap grads;
  free_energy(batch, params, mc, noise, T, &grads);
  double max_err = 0;
  for (auto& [name, g] : grads) {
    Tensor& p = params.values.at(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      double orig = p[i];
      p[i] = orig + step;
      double fp = free_energy(batch, params, mc, noise, T).total;
      p[i] = orig - step;
      double fm = free_energy(batch, params, mc, noise, T).total;
      p[i] = orig;
      double central = (fp - fm) / (2 * step);
      max_err = std::max(max_err, std::abs(g[i] - central) /
                                      (std::abs(g[i]) + std::abs(central) +
                                       1e-12));
    }
  }
  return max_err;
}

}  // namespace

TEST_SUITE_BEGIN("vae");

TEST_CASE("xavier_init") {
  Rng rng(1);
  // fan_in = fan_out = 3 -> a = 1
  Tensor w = xavier_init(3, 3, rng);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i] >= -1.0);
    CHECK(w[i] <= 1.0);
  }

  Rng big_rng(2);
  Tensor big = xavier_init(100, 100, big_rng);
  double a = std::sqrt(6.0 / 200.0);
  double mean = 0;
  for (std::size_t i = 0; i < big.size(); ++i) mean += big[i];
  mean /= big.size();
  CHECK(std::abs(mean) < 3.0 * a / std::sqrt(12.0 * 1e4));

  Rng r1(3), r2(3);
  CHECK(xavier_init(5, 7, r1).values() == xavier_init(5, 7, r2).values());
}

TEST_CASE("adam_step") {
  {
    ParamMap params{{"w", Tensor::vec({1.0, -2.0})}};
    ParamMap grads{{"w", Tensor::vec({0.0, 0.0})}};
    AdamState st;
    adam_step(params, grads, st, 0.1);
    CHECK(params.at("w").values() == std::vector<double>{1.0, -2.0});
  }
  {
    // constant gradient: step magnitude approaches gamma
    ParamMap params{{"w", Tensor::vec({0.0})}};
    AdamState st;
    double prev = 0;
    const double gamma = 0.01;
    for (int t = 0; t < 200; ++t) {
      ParamMap grads{{"w", Tensor::vec({2.5})}};
      prev = params.at("w")[0];
      adam_step(params, grads, st, gamma);
    }
    CHECK(std::abs((prev - params.at("w")[0]) - gamma) < 1e-4);
  }
  {
    // quadratic loss f(w) = (w-3)^2 decreases over 100 steps
    ParamMap params{{"w", Tensor::vec({0.0})}};
    AdamState st;
    auto loss = [&] {
      double w = params.at("w")[0];
      return (w - 3) * (w - 3);
    };
    double initial = loss();
    for (int t = 0; t < 100; ++t) {
      ParamMap grads{{"w", Tensor::vec({2 * (params.at("w")[0] - 3)})}};
      adam_step(params, grads, st, 0.05);
    }
    CHECK(loss() < initial);
  }
}

TEST_CASE("anneal_temperature") {
  CHECK(anneal_temperature(0, 1000, 1.0, 0.5) == doctest::Approx(1.0));
  CHECK(anneal_temperature(500, 1000, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK(anneal_temperature(900, 1000, 1.0, 0.5) == doctest::Approx(0.5));
  CHECK(anneal_temperature(250, 1000, 1.0, 0.25) == doctest::Approx(0.5));
  // constant schedule when T_max == T_min
  CHECK(anneal_temperature(10, 1000, 0.8, 0.8) == doctest::Approx(0.8));
}

TEST_CASE("free_energy: uniform decoder gives D log 2 reconstruction") {
  for (ModelKind kind :
       {ModelKind::kGauss, ModelKind::kCat, ModelKind::kCgBpef}) {
    ModelConfig mc = small_config(kind);
    Rng rng(5);
    Rng init_rng = rng.split(1);
    ModelParams params = init_params(mc, init_rng);
    // zero the decoder output layer: logits 0 -> p = 0.5 per pixel
    params.values.at("dec_W1").fill(0.0);
    params.values.at("dec_b1").fill(0.0);
    Rng noise_rng = rng.split(2);
    Rng data_rng = rng.split(3);
    Tensor batch = random_binary_batch(data_rng, 4, 16);
    NoiseDraws noise = draw_noise(mc, 4, mc.L, noise_rng);
    FreeEnergyReport rep = free_energy(batch, params, mc, noise, 0.8);
    CHECK(rep.term2 == doctest::Approx(16.0 * std::log(2.0)).epsilon(1e-10));
    CHECK(rep.total == rep.term1 + rep.term2);
  }
}

TEST_CASE("free_energy: cgbpef posterior equal to prior gives zero term1") {
  ModelConfig mc = small_config(ModelKind::kCgBpef);
  Rng rng(7);
  Rng init_rng = rng.split(1);
  ModelParams params = init_params(mc, init_rng);
  // encoder head outputs exactly the prior coefficients for every input
  Tensor prior({static_cast<std::size_t>(mc.d), static_cast<std::size_t>(mc.M)});
  for (std::size_t i = 0; i < prior.size(); ++i)
    prior[i] = 0.3 * static_cast<double>(i) - 0.5;
  params.values.at("prior_A") = prior;
  params.values.at("enc_W1").fill(0.0);
  Tensor head_bias({static_cast<std::size_t>(mc.d * mc.M)});
  for (std::size_t i = 0; i < head_bias.size(); ++i) head_bias[i] = prior[i];
  params.values.at("enc_b1") = head_bias;

  Rng noise_rng = rng.split(2);
  Rng data_rng = rng.split(3);
  Tensor batch = random_binary_batch(data_rng, 3, 16);
  NoiseDraws noise = draw_noise(mc, 3, mc.L, noise_rng);
  FreeEnergyReport rep = free_energy(batch, params, mc, noise, 0.8);
  CHECK(rep.term1 == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("free_energy: term2 is invariant to batch order") {
  ModelConfig mc = small_config(ModelKind::kCgBpef);
  Rng rng(9);
  Rng init_rng = rng.split(1);
  ModelParams params = init_params(mc, init_rng);
  Rng noise_rng = rng.split(2);
  Rng data_rng = rng.split(3);
  Tensor batch = random_binary_batch(data_rng, 4, 16);
  NoiseDraws noise = draw_noise(mc, 4, mc.L, noise_rng);
  FreeEnergyReport a = free_energy(batch, params, mc, noise, 0.8);

  // reverse the batch rows together with the matching noise rows
  Tensor rev_batch({4, 16});
  for (int b = 0; b < 4; ++b)
    for (int i = 0; i < 16; ++i) rev_batch(3 - b, i) = batch(b, i);
  NoiseDraws rev_noise = noise;
  for (Tensor& draw : rev_noise.draws) {
    // rows of each draw are (datum, latent-dim) pairs, d rows per datum
    Tensor orig = draw;
    std::size_t rows_per_datum = orig.rows() / 4;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t r = 0; r < rows_per_datum; ++r)
        for (std::size_t c = 0; c < orig.cols(); ++c)
          draw((3 - b) * rows_per_datum + r, c) =
              orig(b * rows_per_datum + r, c);
  }
  FreeEnergyReport b = free_energy(rev_batch, params, mc, rev_noise, 0.8);
  CHECK(a.term2 == doctest::Approx(b.term2).epsilon(1e-12));
  CHECK(a.term1 == doctest::Approx(b.term1).epsilon(1e-12));
}

TEST_CASE("free_energy: rejects batches outside the unit interval") {
  ModelConfig mc = small_config(ModelKind::kGauss);
  Rng rng(11);
  Rng init_rng = rng.split(1);
  ModelParams params = init_params(mc, init_rng);
  Rng noise_rng = rng.split(2);
  Tensor bad({1, 16}, 2.0);
  NoiseDraws noise = draw_noise(mc, 1, mc.L, noise_rng);
  CHECK_THROWS(free_energy(bad, params, mc, noise, 0.8));
}

TEST_CASE("full free-energy gradient matches finite differences") {
  CHECK(fd_gradient_error(ModelKind::kGauss, 21) < 1e-4);
  CHECK(fd_gradient_error(ModelKind::kCat, 22) < 1e-4);
  CHECK(fd_gradient_error(ModelKind::kCgBpef, 23) < 1e-4);
}

TEST_CASE("train: zero iterations, determinism, descent") {
  Rng data_rng(31);
  Dataset data = synth_grid_digits(30, 0.05, data_rng);
  data = split(std::move(data), {11, 1, 2}, data_rng);

  ModelConfig mc = small_config(ModelKind::kCgBpef);
  mc.input_dim = static_cast<int>(data.dim());
  mc.L = 1;

  TrainConfig tc;
  tc.gamma = 1e-3;
  tc.batch = 25;
  tc.iters = 0;
  tc.seed = 7;

  TrainResult zero = train(mc, tc, data);
  CHECK(zero.history.empty());
  CHECK_FALSE(zero.diverged);
  CHECK_FALSE(zero.best_params.values.empty());

  tc.iters = 300;
  tc.valid_every = 100;
  TrainResult a = train(mc, tc, data);
  TrainResult b = train(mc, tc, data);
  REQUIRE(!a.history.empty());
  CHECK(a.history.back().total == b.history.back().total);
  CHECK_FALSE(a.diverged);

  double initial = a.history.front().total;
  double best = a.best_valid_total;
  CHECK(best < initial);
  for (const HistoryRow& row : a.history)
    CHECK(row.total == row.term1 + row.term2);
}

TEST_CASE("evaluate: determinism and trained-vs-untrained ordering") {
  Rng data_rng(37);
  Dataset data = synth_grid_digits(30, 0.05, data_rng);
  data = split(std::move(data), {11, 1, 2}, data_rng);

  ModelConfig mc = small_config(ModelKind::kGauss);
  mc.input_dim = static_cast<int>(data.dim());
  mc.L = 1;

  TrainConfig tc;
  tc.gamma = 1e-3;
  tc.batch = 25;
  tc.iters = 400;
  tc.seed = 3;

  Rng init_rng(Rng(3).split(1).seed());
  ModelParams untrained = init_params(mc, init_rng);
  TrainResult res = train(mc, tc, data);

  Rng e1(55), e2(55);
  FreeEnergyReport r1 = evaluate(res.best_params, mc, data, Split::kTest, e1, 2);
  FreeEnergyReport r2 = evaluate(res.best_params, mc, data, Split::kTest, e2, 2);
  CHECK(r1.total == r2.total);
  CHECK(r1.term1 >= 0.0);  // exact Gaussian KL

  Rng e3(55);
  FreeEnergyReport r0 = evaluate(untrained, mc, data, Split::kTest, e3, 2);
  CHECK(r1.total < r0.total);
}

TEST_CASE("model snapshot round trip") {
  ModelConfig mc = small_config(ModelKind::kCgBpef);
  Rng rng(41);
  ModelParams params = init_params(mc, rng);
  std::filesystem::path tmp =
      std::filesystem::temp_directory_path() / "cgvae_test_model.cgv";
  save_model(tmp.string(), mc, params);
  auto [mc2, params2] = load_model(tmp.string());
  CHECK(mc2.kind == mc.kind);
  CHECK(mc2.input_dim == mc.input_dim);
  CHECK(mc2.d == mc.d);
  CHECK(mc2.M == mc.M);
  CHECK(mc2.R == mc.R);
  CHECK(mc2.T_min == mc.T_min);
  CHECK(mc2.enc_hidden == mc.enc_hidden);
  REQUIRE(params2.values.size() == params.values.size());
  for (const auto& [name, t] : params.values) {
    REQUIRE(params2.values.count(name) == 1);
    CHECK(params2.values.at(name).values() == t.values());
  }
  std::filesystem::remove(tmp);
}

TEST_CASE("config validation") {
  ModelConfig mc = small_config(ModelKind::kCgBpef);
  mc.M = 10;  // violates M < R-1 for R=11
  CHECK_THROWS(mc.validate());
  mc = small_config(ModelKind::kCat);
  mc.C = 1;
  CHECK_THROWS(mc.validate());
  mc = small_config(ModelKind::kGauss);
  mc.L = 0;
  CHECK_THROWS(mc.validate());
  CHECK(model_kind_from_string("gauss") == ModelKind::kGauss);
  CHECK(model_kind_from_string("cat") == ModelKind::kCat);
  CHECK(model_kind_from_string("cgbpef") == ModelKind::kCgBpef);
  CHECK_THROWS(model_kind_from_string("vgg"));
}

TEST_SUITE_END();
