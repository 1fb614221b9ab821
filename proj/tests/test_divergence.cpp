#include <algorithm>
#include <cmath>
#include <vector>

#include "cgvae/distributions.hpp"
#include "cgvae/divergence.hpp"
#include "cgvae/numeric.hpp"
#include "cgvae/rng.hpp"
#include "doctest.h"

using namespace cgvae;

namespace {

std::vector<double> random_pmf(Rng& rng, int n) {
  return sample_dirichlet(rng, 1.0, n);
}

// Simpson quadrature of the per-dimension Gaussian KL integrand
double gaussian_kl_quadrature(double mq, double sq, double mp, double sp) {
  const int n = 4000;  // even
  const double lo = -20.0, hi = 20.0;
  const double h = (hi - lo) / n;
  auto integrand = [&](double x) {
    double lq = -0.5 * ((x - mq) / sq) * ((x - mq) / sq) - std::log(sq);
    double lp = -0.5 * ((x - mp) / sp) * ((x - mp) / sp) - std::log(sp);
    double q = std::exp(lq) / std::sqrt(2.0 * M_PI);
    return q * (lq - lp);
  };
  double acc = integrand(lo) + integrand(hi);
  for (int i = 1; i < n; ++i)
    acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

}  // namespace

TEST_SUITE_BEGIN("divergence");

TEST_CASE("kl_discrete") {
  std::vector<double> u{0.5, 0.5};
  CHECK(kl_discrete(u, u) == 0.0);

  std::vector<double> p{1, 0};
  CHECK(kl_discrete(p, u) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  std::vector<double> p2{0.75, 0.25};
  double direct = 0.75 * std::log(0.75 / 0.5) + 0.25 * std::log(0.25 / 0.5);
  CHECK(kl_discrete(p2, u) == doctest::Approx(direct).epsilon(1e-12));
  CHECK(kl_discrete(p2, u) == doctest::Approx(0.13081).epsilon(1e-4));

  std::vector<double> q{0, 1};
  CHECK_THROWS_AS(kl_discrete(u, q), InfiniteKlError);

  // nonnegativity, equality iff p == q
  Rng rng(1);
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> a = random_pmf(rng, 6), b = random_pmf(rng, 6);
    CHECK(kl_discrete(a, b) >= 0.0);
    CHECK(kl_discrete(a, a) < 1e-12);
    double linf = 0;
    for (int r = 0; r < 6; ++r) linf = std::max(linf, std::abs(a[r] - b[r]));
    if (linf > 1e-3) CHECK(kl_discrete(a, b) > 0.0);
  }
}

TEST_CASE("kl_category_surrogate") {
  Rng rng(3);
  Tensor b = rng.gaussian_tensor({3, 7});
  CHECK(kl_category_surrogate(b, b) == doctest::Approx(0.0).epsilon(1e-12));

  // matches the brute-force softmax + KL composition
  for (int rep = 0; rep < 50; ++rep) {
    Tensor beta = rng.gaussian_tensor({3, 7});
    Tensor alpha = rng.gaussian_tensor({3, 7});
    double direct = 0;
    for (int j = 0; j < 3; ++j) {
      std::vector<double> pb =
          softmax(std::span<const double>{beta.data() + j * 7, 7});
      std::vector<double> pa =
          softmax(std::span<const double>{alpha.data() + j * 7, 7});
      direct += kl_discrete(pb, pa);
    }
    double sur = kl_category_surrogate(beta, alpha);
    CHECK(std::abs(sur - direct) < 1e-12 * (1.0 + std::abs(direct)) + 1e-12);
  }

  // per-row shift invariance
  Tensor beta = rng.gaussian_tensor({2, 5});
  Tensor alpha = rng.gaussian_tensor({2, 5});
  Tensor shifted = beta;
  for (int r = 0; r < 5; ++r) {
    shifted(0, r) += 12.5;
    shifted(1, r) -= 3.25;
  }
  CHECK(kl_category_surrogate(shifted, alpha) ==
        doctest::Approx(kl_category_surrogate(beta, alpha)).epsilon(1e-10));

  // magnitude-500 logits stay finite; near-point-mass vs uniform -> log 3
  Tensor big({1, 3}, {500.0, -500.0, 0.0});
  Tensor small({1, 3}, 0.0);
  double v = kl_category_surrogate(big, small);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(std::log(3.0)).epsilon(1e-9));

  Tensor nan_t({1, 2}, {std::nan(""), 0.0});
  CHECK_THROWS(kl_category_surrogate(nan_t, small));
}

TEST_CASE("kl_gaussian_diag") {
  std::vector<double> m{0.3, -1.2}, s{0.7, 1.4};
  CHECK(kl_gaussian_diag(m, s, m, s) == doctest::Approx(0.0));

  std::vector<double> mq{1}, sq{1}, mp{0}, sp{1};
  CHECK(kl_gaussian_diag(mq, sq, mp, sp) == doctest::Approx(0.5).epsilon(1e-12));

  Rng rng(5);
  std::vector<double> a(4), b(4), c(4), d(4);
  for (int j = 0; j < 4; ++j) {
    a[j] = rng.gaussian();
    b[j] = 0.5 + rng.uniform();
    c[j] = rng.gaussian();
    d[j] = 0.5 + rng.uniform();
  }
  double quad = 0;
  for (int j = 0; j < 4; ++j)
    quad += gaussian_kl_quadrature(a[j], b[j], c[j], d[j]);
  CHECK(kl_gaussian_diag(a, b, c, d) == doctest::Approx(quad).epsilon(1e-6));

  std::vector<double> bad{1, 0};
  CHECK_THROWS(kl_gaussian_diag(m, bad, m, s));
}

TEST_CASE("coarsen and partitions") {
  std::vector<double> p{0.1, 0.2, 0.3, 0.4};
  {
    Partition id{4, {0, 1, 2, 3}};
    CHECK(coarsen(p, id) == p);
  }
  {
    Partition one{1, {0, 0, 0, 0}};
    std::vector<double> c = coarsen(p, one);
    CHECK(c.size() == 1);
    CHECK(c[0] == doctest::Approx(1.0));
  }
  {
    Partition halves{2, {0, 0, 1, 1}};
    std::vector<double> c = coarsen(p, halves);
    CHECK(c[0] == doctest::Approx(0.3));
    CHECK(c[1] == doctest::Approx(0.7));
  }
  Partition bad_range{2, {0, 0, 0, 5}};
  CHECK_THROWS(coarsen(p, bad_range));
  Partition empty_cell{3, {0, 0, 1, 1}};
  CHECK_THROWS(coarsen(p, empty_cell));
  Partition wrong_size{2, {0, 1}};
  CHECK_THROWS(coarsen(p, wrong_size));
}

TEST_CASE("information monotonicity") {
  std::vector<double> p{0.2, 0.3, 0.5};
  {
    auto [fine, coarse] =
        check_information_monotonicity(p, p, Partition{2, {0, 1, 1}});
    CHECK(fine == 0.0);
    CHECK(coarse == 0.0);
  }
  {
    std::vector<double> q{0.5, 0.25, 0.25};
    auto [fine, coarse] =
        check_information_monotonicity(p, q, Partition{3, {0, 1, 2}});
    CHECK(fine == doctest::Approx(coarse).epsilon(1e-12));
  }
  // 500 random triples
  Rng rng(7);
  for (int rep = 0; rep < 500; ++rep) {
    int R = 2 + static_cast<int>(rng.next_u64() % 40);
    std::vector<double> a = random_pmf(rng, R), b = random_pmf(rng, R);
    int K = 1 + static_cast<int>(rng.next_u64() % R);
    Partition part{K, std::vector<int>(R)};
    for (int r = 0; r < K; ++r) part.cell[r] = r;
    for (int r = K; r < R; ++r)
      part.cell[r] = static_cast<int>(rng.next_u64() % K);
    auto [fine, coarse] = check_information_monotonicity(a, b, part);
    CHECK(fine >= coarse - 1e-12);
  }
}

TEST_CASE("kl_z_monte_carlo") {
  Rng rng(9);
  {
    // identical distributions: below the noise floor
    Tensor logits = rng.gaussian_tensor({1, 100});
    Rng s = rng.split(1);
    double v = kl_z_monte_carlo(logits, logits, 0.5, 100000, 100, s);
    CHECK(v >= 0.0);
    CHECK(v < 0.02);
  }
  {
    // low-temperature category limit: concentrated beta vs uniform alpha
    const int R = 10;
    Tensor beta({1, R}, 0.0);
    beta[3] = 6.0;  // concentrated but absolutely continuous
    Tensor alpha({1, R}, 0.0);
    std::vector<double> pb =
        softmax(std::span<const double>{beta.data(), R});
    std::vector<double> pa(R, 1.0 / R);
    double category = kl_discrete(pb, pa);
    Rng s = rng.split(2);
    double mc = kl_z_monte_carlo(beta, alpha, 0.05, 200000, R, s);
    CHECK(std::abs(mc - category) / category < 0.10);
  }
  {
    // argmax frequencies reproduce the category KL (Voronoi partition)
    std::vector<double> logits{0.9, -0.3, 0.2, 0.0, -1.1};
    std::vector<double> probs = category_probs(logits);
    Rng s = rng.split(3);
    std::vector<double> freq = verify_limit_property(logits, 0.4, 100000, s);
    std::vector<double> uniform(5, 0.2);
    double kl_freq = kl_discrete(freq, uniform);
    double kl_cat = kl_discrete(probs, uniform);
    CHECK(std::abs(kl_freq - kl_cat) < 0.05);
  }
  Tensor l({1, 4}, 0.0);
  Rng s = rng.split(4);
  CHECK_THROWS(kl_z_monte_carlo(l, l, -1.0, 1000, 4, s));
}

TEST_CASE("bound_sweep") {
  {
    Rng rng(11);
    std::vector<KlSweepRecord> recs =
        bound_sweep(SimplexGenerator::kUniform, {0.5}, 1, 2000, 8, rng);
    CHECK(recs.size() == 1);
    CHECK(recs[0].generator == "uniform-simplex");
    CHECK(recs[0].temperature == 0.5);
    CHECK(recs[0].trial == 0);
    CHECK(recs[0].kl_category >= 0.0);
    CHECK(recs[0].kl_z_mc >= 0.0);
  }
  {
    // exact-uniform alpha fixture: both KL notions vanish
    std::vector<double> uniform(8, 1.0 / 8);
    CHECK(kl_discrete(uniform, uniform) == 0.0);
    Tensor zeros({1, 8}, 0.0);
    Rng s(13);
    CHECK(kl_z_monte_carlo(zeros, zeros, 0.5, 10000, 8, s) < 0.02);
  }
  {
    // multi-threaded output is identical to single-threaded
    Rng r1(17), r2(17);
    std::vector<double> temps{0.3, 0.9};
    auto a = bound_sweep(SimplexGenerator::kDirichletHalf, temps, 4, 2000, 12,
                         r1, 1);
    auto b = bound_sweep(SimplexGenerator::kDirichletHalf, temps, 4, 2000, 12,
                         r2, 4);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].kl_category == b[i].kl_category);
      CHECK(a[i].kl_z_mc == b[i].kl_z_mc);
      CHECK(a[i].trial == b[i].trial);
    }
  }
}

TEST_CASE("dirichlet sampler moments") {
  Rng rng(19);
  const int N = 20000;
  std::vector<double> mean(4, 0.0);
  for (int i = 0; i < N; ++i) {
    std::vector<double> x = sample_dirichlet(rng, 0.5, 4);
    for (int j = 0; j < 4; ++j) mean[j] += x[j];
  }
  for (int j = 0; j < 4; ++j) CHECK(std::abs(mean[j] / N - 0.25) < 0.01);
}

TEST_SUITE_END();
