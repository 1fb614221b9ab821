#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cgvae/rng.hpp"
#include "cgvae/tensor.hpp"

namespace cgvae {

/// Signals KL(p:q) = +inf from an absolute-continuity violation.
class InfiniteKlError : public std::runtime_error {
 public:
  InfiniteKlError() : std::runtime_error("KL divergence is infinite") {}
};

/// sum_r p_r log(p_r/q_r) in nats, with 0 log(0/.) = 0.
double kl_discrete(std::span<const double> p, std::span<const double> q);

/// Closed-form surrogate: sum over rows j of
///   sum_r softmax(beta_j)_r (beta_jr - alpha_jr) + lse(alpha_j) - lse(beta_j).
/// Equals sum_j kl_discrete(softmax(beta_j), softmax(alpha_j)).
double kl_category_surrogate(const Tensor& beta, const Tensor& alpha);

/// KL between diagonal Gaussians (sd entries are standard deviations).
double kl_gaussian_diag(std::span<const double> mu_q,
                        std::span<const double> sd_q,
                        std::span<const double> mu_p,
                        std::span<const double> sd_p);

/// Surjective assignment of R fine cells onto K coarse cells.
struct Partition {
  int K = 0;
  std::vector<int> cell;  // size R, values in 0..K-1

  void validate(std::size_t R) const;
};

std::vector<double> coarsen(std::span<const double> p, const Partition& part);

/// Returns (fine KL, coarse KL); information monotonicity asserts
/// fine >= coarse.
std::pair<double, double> check_information_monotonicity(
    std::span<const double> p, std::span<const double> q,
    const Partition& part);

/// Monte-Carlo estimate of KL between the coarse-grained latents z induced
/// by Concrete(beta, T) and Concrete(alpha, T); d x R logits. Histograms z
/// per dimension on `bins` equal intervals of [-1,1] with additive smoothing
/// of 0.5 counts per bin, and sums the per-dimension KLs.
double kl_z_monte_carlo(const Tensor& beta, const Tensor& alpha, double T,
                        long long N, int bins, Rng& rng);

struct KlSweepRecord {
  std::string generator;
  double temperature = 0.0;
  int trial = 0;
  double kl_category = 0.0;  // nats
  double kl_z_mc = 0.0;      // nats
};

enum class SimplexGenerator {
  kUniform,      // Dirichlet(1,...,1)
  kDirichletHalf  // Dirichlet(0.5,...,0.5)
};

/// One record per (temperature, trial): sample a category distribution
/// alpha, compare it against the uniform reference with both the category
/// KL and the Monte-Carlo z-KL.
/// Records are a pure function of the rng seed; with threads > 1 the
/// (temperature, trial) pairs are partitioned across workers and the output
/// is byte-identical to the single-threaded run.
std::vector<KlSweepRecord> bound_sweep(SimplexGenerator generator,
                                       const std::vector<double>& temperatures,
                                       int trials, long long N, int R,
                                       Rng& rng, int threads = 1);

double sample_gamma(Rng& rng, double shape);
std::vector<double> sample_dirichlet(Rng& rng, double shape, int n);

}  // namespace cgvae
