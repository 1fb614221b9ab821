#include <cmath>
#include <vector>

#include "cgvae/distributions.hpp"
#include "cgvae/divergence.hpp"
#include "cgvae/expfam.hpp"
#include "cgvae/rng.hpp"
#include "doctest.h"

using namespace cgvae;

namespace {

DiscreteExpFam random_family(Rng& rng, int K, int S) {
  DiscreteExpFam fam;
  fam.K = K;
  fam.S = S;
  fam.t = Tensor({static_cast<std::size_t>(K), static_cast<std::size_t>(S)});
  for (std::size_t i = 0; i < fam.t.size(); ++i)
    fam.t[i] = 2.0 * rng.uniform() - 1.0;
  return fam;
}

DiscreteExpFam bernoulli() {
  DiscreteExpFam fam;
  fam.K = 2;
  fam.S = 1;
  fam.t = Tensor({2, 1}, {0.0, 1.0});
  return fam;
}

std::vector<double> random_phi(Rng& rng, int S, double scale = 1.0) {
  std::vector<double> phi(S);
  for (double& p : phi) p = scale * rng.gaussian();
  return phi;
}

}  // namespace

TEST_SUITE_BEGIN("expfam");

TEST_CASE("cumulant") {
  Rng rng(1);
  DiscreteExpFam fam = random_family(rng, 7, 3);
  std::vector<double> zero(3, 0.0);
  CHECK(cumulant(fam, zero) == doctest::Approx(std::log(7.0)).epsilon(1e-12));

  DiscreteExpFam bern = bernoulli();
  std::vector<double> z1(1, 0.0);
  CHECK(cumulant(bern, z1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  // convexity along random segments
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> p1 = random_phi(rng, 3), p2 = random_phi(rng, 3);
    std::vector<double> mid(3);
    for (int s = 0; s < 3; ++s) mid[s] = 0.5 * (p1[s] + p2[s]);
    CHECK(cumulant(fam, mid) <=
          0.5 * cumulant(fam, p1) + 0.5 * cumulant(fam, p2) + 1e-12);
  }
}

TEST_CASE("to_moment / to_natural") {
  Rng rng(3);
  DiscreteExpFam fam = random_family(rng, 9, 2);
  {
    std::vector<double> zero(2, 0.0);
    MomentParam eta = to_moment(fam, zero);
    for (int s = 0; s < 2; ++s) {
      double col = 0;
      for (int k = 0; k < 9; ++k) col += fam.t(k, s);
      CHECK(eta.eta[s] == doctest::Approx(col / 9.0).epsilon(1e-12));
    }
  }
  {
    DiscreteExpFam bern = bernoulli();
    std::vector<double> phi{std::log(3.0)};
    MomentParam eta = to_moment(bern, phi);
    CHECK(eta.eta[0] == doctest::Approx(0.75).epsilon(1e-12));
  }
  // 50 random round trips: compare pmfs, not raw phi
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> phi = random_phi(rng, 2);
    MomentParam eta = to_moment(fam, phi);
    NaturalParam back = to_natural(fam, eta.eta);
    std::vector<double> p0 = member_pmf(fam, phi);
    std::vector<double> p1 = member_pmf(fam, back.phi);
    for (int k = 0; k < 9; ++k)
      CHECK(std::abs(p0[k] - p1[k]) < 1e-8);
  }
  // eta outside the moment polytope (statistics in [-1,1], so eta=2 is out)
  std::vector<double> outside{2.0, 2.0};
  CHECK_THROWS(to_natural(fam, outside));
}

TEST_CASE("neg_entropy") {
  Rng rng(5);
  DiscreteExpFam fam = random_family(rng, 6, 2);
  std::vector<double> zero(2, 0.0);
  MomentParam uni = to_moment(fam, zero);
  CHECK(neg_entropy(fam, uni.eta) ==
        doctest::Approx(-std::log(6.0)).epsilon(1e-9));

  {
    // near-degenerate Bernoulli member: entropy approaches 0 from below
    DiscreteExpFam bern = bernoulli();
    std::vector<double> eta{0.999};
    double i = neg_entropy(bern, eta);
    CHECK(i < 0.0);
    CHECK(i > -0.01);
  }

  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> phi = random_phi(rng, 2);
    MomentParam eta = to_moment(fam, phi);
    std::vector<double> p = member_pmf(fam, phi);
    double direct = 0;
    for (double v : p) direct += v * std::log(v);
    CHECK(std::abs(neg_entropy(fam, eta.eta) - direct) < 1e-9);
  }
}

TEST_CASE("lemma identity") {
  Rng rng(7);
  {
    DiscreteExpFam fam = random_family(rng, 8, 3);
    std::vector<double> zero(3, 0.0);
    CHECK(lemma_residual(fam, zero) < 1e-12);
  }
  {
    DiscreteExpFam bern = bernoulli();
    std::vector<double> phi{std::log(3.0)};
    CHECK(lemma_residual(bern, phi) < 1e-10);
  }
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    int K = 2 + static_cast<int>(rng.next_u64() % 20);
    int S = 1 + static_cast<int>(rng.next_u64() % 4);
    DiscreteExpFam fam = random_family(rng, K, S);
    std::vector<double> phi = random_phi(rng, S, 2.0);
    worst = std::max(worst, lemma_residual(fam, phi));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("term1_average") {
  Rng rng(9);
  DiscreteExpFam fam = random_family(rng, 10, 3);
  NaturalParam z{random_phi(rng, 3)};
  {
    std::vector<NaturalParam> phis(4, z);
    CHECK(term1_average(fam, phis, z) == doctest::Approx(0.0).epsilon(1e-12));
  }
  {
    NaturalParam one{random_phi(rng, 3)};
    double direct =
        kl_discrete(member_pmf(fam, one.phi), member_pmf(fam, z.phi));
    CHECK(term1_average(fam, {one}, z) ==
          doctest::Approx(direct).epsilon(1e-10));
  }
  {
    std::vector<NaturalParam> phis;
    for (int k = 0; k < 5; ++k) phis.push_back({random_phi(rng, 3)});
    double direct = 0;
    for (const NaturalParam& p : phis)
      direct += kl_discrete(member_pmf(fam, p.phi), member_pmf(fam, z.phi));
    direct /= 5.0;
    CHECK(std::abs(term1_average(fam, phis, z) - direct) < 1e-10);
  }
}

TEST_CASE("bregman_centroid") {
  Rng rng(11);
  DiscreteExpFam fam = random_family(rng, 8, 2);
  {
    NaturalParam one{random_phi(rng, 2)};
    auto [eta, phi] = bregman_centroid(fam, {one});
    std::vector<double> p0 = member_pmf(fam, one.phi);
    std::vector<double> p1 = member_pmf(fam, phi.phi);
    for (int k = 0; k < 8; ++k) CHECK(std::abs(p0[k] - p1[k]) < 1e-8);
  }
  {
    DiscreteExpFam bern = bernoulli();
    std::vector<NaturalParam> phis = {
        {to_natural(bern, std::vector<double>{0.2}).phi},
        {to_natural(bern, std::vector<double>{0.8}).phi}};
    auto [eta, phi] = bregman_centroid(bern, phis);
    CHECK(eta.eta[0] == doctest::Approx(0.5).epsilon(1e-9));
  }
  {
    // local minimality of term1 at the centroid
    std::vector<NaturalParam> phis;
    for (int k = 0; k < 4; ++k) phis.push_back({random_phi(rng, 2)});
    auto [eta, phi_star] = bregman_centroid(fam, phis);
    double at_star = term1_average(fam, phis, phi_star);
    for (int rep = 0; rep < 20; ++rep) {
      NaturalParam perturbed = phi_star;
      for (double& p : perturbed.phi) p += 0.1 * rng.gaussian();
      CHECK(term1_average(fam, phis, perturbed) >= at_star - 1e-12);
    }
  }
}

TEST_CASE("parametric and nonparametric bounds") {
  Rng rng(13);
  DiscreteExpFam fam = random_family(rng, 12, 3);
  {
    NaturalParam one{random_phi(rng, 3)};
    std::vector<NaturalParam> same(5, one);
    CHECK(parametric_bound(fam, same) == doctest::Approx(0.0).epsilon(1e-9));
    std::vector<std::vector<double>> pmfs(5, member_pmf(fam, one.phi));
    CHECK(nonparametric_bound(pmfs) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(nonparametric_bound({pmfs[0]}) == doctest::Approx(0.0));
  }
  {
    // two near-point-mass categorical members on disjoint atoms -> log 2
    DiscreteExpFam cat;
    cat.K = 4;
    cat.S = 4;
    cat.t = Tensor({4, 4}, 0.0);
    for (int k = 0; k < 4; ++k) cat.t(k, k) = 1.0;
    std::vector<NaturalParam> phis = {
        {std::vector<double>{20, 0, 0, 0}},
        {std::vector<double>{0, 20, 0, 0}}};
    CHECK(parametric_bound(cat, phis) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-6));
  }
  // theorem chain on random instances, plus convexity of I along segments
  for (int rep = 0; rep < 30; ++rep) {
    int n = 1 + static_cast<int>(rng.next_u64() % 6);
    std::vector<NaturalParam> phis;
    std::vector<std::vector<double>> pmfs;
    for (int k = 0; k < n; ++k) {
      phis.push_back({random_phi(rng, 3)});
      pmfs.push_back(member_pmf(fam, phis.back().phi));
    }
    NaturalParam z{random_phi(rng, 3)};
    double t1 = term1_average(fam, phis, z);
    auto [eta_star, phi_star] = bregman_centroid(fam, phis);
    double at_star = term1_average(fam, phis, phi_star);
    double para = parametric_bound(fam, phis);
    double nonpara = nonparametric_bound(pmfs);
    CHECK(t1 >= para - 1e-9);
    CHECK(std::abs(at_star - para) < 1e-10);
    CHECK(para >= nonpara - 1e-9);
    CHECK(nonpara >= -1e-12);

    std::vector<double> e1 = to_moment(fam, random_phi(rng, 3)).eta;
    std::vector<double> e2 = to_moment(fam, random_phi(rng, 3)).eta;
    std::vector<double> mid(3);
    for (int s = 0; s < 3; ++s) mid[s] = 0.5 * (e1[s] + e2[s]);
    CHECK(neg_entropy(fam, mid) <=
          0.5 * neg_entropy(fam, e1) + 0.5 * neg_entropy(fam, e2) + 1e-9);
  }
}

TEST_CASE("BPEF-on-grid family: lemma holds with polynomial statistics") {
  Grid g = make_grid(11);
  const int M = 3;
  DiscreteExpFam fam;
  fam.K = 11;
  fam.S = M;
  fam.t = power_table(g, M);
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> phi = random_phi(rng, M);
    CHECK(lemma_residual(fam, phi) < 1e-9);
  }
}

TEST_SUITE_END();
