#include "cgvae/divergence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "cgvae/numeric.hpp"

namespace cgvae {

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("kl_discrete: length mismatch");
  double kl = 0.0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    if (p[r] == 0.0) continue;
    if (q[r] == 0.0) throw InfiniteKlError();
    kl += p[r] * std::log(p[r] / q[r]);
  }
  return kl;
}

double kl_category_surrogate(const Tensor& beta, const Tensor& alpha) {
  if (!beta.same_shape(alpha) || beta.shape().size() != 2)
    throw std::invalid_argument("kl_category_surrogate: shape mismatch");
  if (!beta.all_finite() || !alpha.all_finite())
    throw std::invalid_argument("kl_category_surrogate: non-finite logits");
  std::size_t d = beta.rows(), R = beta.cols();
  std::vector<double> s(R);
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    std::span<const double> bj{beta.data() + j * R, R};
    std::span<const double> aj{alpha.data() + j * R, R};
    softmax(bj, s);
    double dot = 0.0;
    for (std::size_t r = 0; r < R; ++r) dot += s[r] * (bj[r] - aj[r]);
    total += dot + log_sum_exp(aj) - log_sum_exp(bj);
  }
  return total;
}

double kl_gaussian_diag(std::span<const double> mu_q,
                        std::span<const double> sd_q,
                        std::span<const double> mu_p,
                        std::span<const double> sd_p) {
  std::size_t d = mu_q.size();
  if (sd_q.size() != d || mu_p.size() != d || sd_p.size() != d)
    throw std::invalid_argument("kl_gaussian_diag: length mismatch");
  double kl = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    if (sd_q[j] <= 0.0 || sd_p[j] <= 0.0)
      throw std::invalid_argument("kl_gaussian_diag: sd must be positive");
    double m = mu_q[j] - mu_p[j];
    kl += std::log(sd_p[j] / sd_q[j]) +
          (sd_q[j] * sd_q[j] + m * m) / (2.0 * sd_p[j] * sd_p[j]) - 0.5;
  }
  return kl;
}

void Partition::validate(std::size_t R) const {
  if (cell.size() != R)
    throw std::invalid_argument("Partition: does not cover all fine cells");
  std::vector<char> seen(K, 0);
  for (int c : cell) {
    if (c < 0 || c >= K)
      throw std::invalid_argument("Partition: cell index out of range");
    seen[c] = 1;
  }
  for (char s : seen)
    if (!s) throw std::invalid_argument("Partition: empty coarse cell");
}

std::vector<double> coarsen(std::span<const double> p, const Partition& part) {
  part.validate(p.size());
  std::vector<double> coarse(part.K, 0.0);
  for (std::size_t r = 0; r < p.size(); ++r) coarse[part.cell[r]] += p[r];
  return coarse;
}

std::pair<double, double> check_information_monotonicity(
    std::span<const double> p, std::span<const double> q,
    const Partition& part) {
  double fine = kl_discrete(p, q);
  std::vector<double> pc = coarsen(p, part);
  std::vector<double> qc = coarsen(q, part);
  double coarse = kl_discrete(pc, qc);
  return {fine, coarse};
}

double kl_z_monte_carlo(const Tensor& beta, const Tensor& alpha, double T,
                        long long N, int bins, Rng& rng) {
  if (!beta.same_shape(alpha) || beta.shape().size() != 2)
    throw std::invalid_argument("kl_z_monte_carlo: shape mismatch");
  if (T <= 0.0 || bins < 1 || N < bins)
    throw std::invalid_argument("kl_z_monte_carlo: bad arguments");
  const std::size_t d = beta.rows(), R = beta.cols();

  // pre-divide logits by T; gumbels are shared between the two chains
  // (common random numbers; each histogram stays unbiased)
  std::vector<double> bt(d * R), at(d * R);
  for (std::size_t i = 0; i < d * R; ++i) {
    bt[i] = beta[i] / T;
    at[i] = alpha[i] / T;
  }

  std::vector<double> hq(d * bins, 0.0), hp(d * bins, 0.0);
  std::vector<double> g(R);
  const double inv_spacing = bins / 2.0;
  auto bin_of = [&](double z) {
    int b = static_cast<int>((z + 1.0) * inv_spacing);
    return std::clamp(b, 0, bins - 1);
  };

  // zeta grid implied by R; z = softmax-weighted average of zeta
  std::vector<double> zeta(R);
  for (std::size_t r = 0; r < R; ++r)
    zeta[r] = (2.0 * (r + 1.0) - (R + 1.0)) / (R - 1.0);

  for (long long n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t r = 0; r < R; ++r) g[r] = rng.gumbel() / T;
      const double* bj = bt.data() + j * R;
      const double* aj = at.data() + j * R;
      double mq = g[0] + bj[0], mp = g[0] + aj[0];
      for (std::size_t r = 1; r < R; ++r) {
        mq = std::max(mq, g[r] + bj[r]);
        mp = std::max(mp, g[r] + aj[r]);
      }
      double wq = 0.0, zq = 0.0, wp = 0.0, zp = 0.0;
      for (std::size_t r = 0; r < R; ++r) {
        double eq = std::exp(g[r] + bj[r] - mq);
        double ep = std::exp(g[r] + aj[r] - mp);
        wq += eq;
        zq += eq * zeta[r];
        wp += ep;
        zp += ep * zeta[r];
      }
      hq[j * bins + bin_of(zq / wq)] += 1.0;
      hp[j * bins + bin_of(zp / wp)] += 1.0;
    }
  }

  // additive smoothing of 0.5 counts per bin, then per-dimension KL
  double total = 0.0;
  const double norm = 1.0 / (static_cast<double>(N) + 0.5 * bins);
  std::vector<double> pq(bins), pp(bins);
  for (std::size_t j = 0; j < d; ++j) {
    for (int b = 0; b < bins; ++b) {
      pq[b] = (hq[j * bins + b] + 0.5) * norm;
      pp[b] = (hp[j * bins + b] + 0.5) * norm;
    }
    total += kl_discrete(pq, pp);
  }
  return total;
}

double sample_gamma(Rng& rng, double shape) {
  if (shape <= 0.0) throw std::invalid_argument("sample_gamma: shape <= 0");
  if (shape < 1.0) {
    // boost to shape+1, then scale by U^(1/shape)
    double g = sample_gamma(rng, shape + 1.0);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.gaussian();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    double u = rng.uniform();
    double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> sample_dirichlet(Rng& rng, double shape, int n) {
  std::vector<double> x(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    x[i] = sample_gamma(rng, shape);
    s += x[i];
  }
  for (int i = 0; i < n; ++i) x[i] /= s;
  return x;
}

std::vector<KlSweepRecord> bound_sweep(SimplexGenerator generator,
                                       const std::vector<double>& temperatures,
                                       int trials, long long N, int R,
                                       Rng& rng, int threads) {
  if (trials < 1) throw std::invalid_argument("bound_sweep: trials must be >= 1");
  if (threads < 1) threads = 1;
  double shape = generator == SimplexGenerator::kUniform ? 1.0 : 0.5;
  std::string label =
      generator == SimplexGenerator::kUniform ? "uniform-simplex" : "dirichlet(0.5)";
  std::vector<double> uniform(R, 1.0 / R);
  const std::size_t total = temperatures.size() * trials;
  std::vector<KlSweepRecord> records(total);

  // one stream per (temperature, trial): deterministic and
  // order-independent, so trials can run on any thread layout
  auto run_one = [&](std::size_t idx) {
    std::size_t ti = idx / trials;
    int trial = static_cast<int>(idx % trials);
    Rng stream = rng.split(ti * 1000003ULL + static_cast<std::uint64_t>(trial));
    std::vector<double> alpha = sample_dirichlet(stream, shape, R);
    KlSweepRecord& rec = records[idx];
    rec.generator = label;
    rec.temperature = temperatures[ti];
    rec.trial = trial;
    rec.kl_category = kl_discrete(alpha, uniform);
    Tensor beta_logits({1, static_cast<std::size_t>(R)});
    for (int r = 0; r < R; ++r) beta_logits[r] = std::log(alpha[r]);
    Tensor alpha_logits({1, static_cast<std::size_t>(R)}, 0.0);
    rec.kl_z_mc = kl_z_monte_carlo(beta_logits, alpha_logits,
                                   temperatures[ti], N, R, stream);
  };

  if (threads == 1) {
    for (std::size_t idx = 0; idx < total; ++idx) run_one(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (;;) {
          std::size_t idx = next.fetch_add(1);
          if (idx >= total) return;
          run_one(idx);
        }
      });
    for (auto& th : pool) th.join();
  }
  return records;
}

}  // namespace cgvae
