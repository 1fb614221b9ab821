#pragma once

#include <span>
#include <vector>

#include "cgvae/rng.hpp"
#include "cgvae/tensor.hpp"

namespace cgvae {

/// Even discretization of [-1,1] into R values zeta_r = (2r-(R+1))/(R-1).
struct Grid {
  int R = 0;
  std::vector<double> zeta;

  double spacing() const { return 2.0 / (R - 1); }
};

Grid make_grid(int R);

/// Powers table P with P(r,m) = zeta_r^(m+1), r = 0..R-1, m = 0..M-1.
/// Shared by the prior and the encoder head; logits = coeffs . P^T.
Tensor power_table(const Grid& grid, int M);

/// Polynomial coefficients, one degree-M polynomial per latent dimension.
/// The polynomial has no constant term (it cancels in the softmax).
struct PolyCoeffs {
  int d = 0;
  int M = 0;
  Tensor coeffs;  // d x M
};

/// logits(j,r) = sum_m coeffs(j,m) * zeta_r^(m+1). Requires M < R-1.
Tensor poly_logits(const PolyCoeffs& coeffs, const Grid& grid);

/// softmax of logits via stable log-sum-exp.
std::vector<double> category_probs(std::span<const double> logits);

/// Relaxed one-hot rows on the simplex, one row per latent dimension.
struct ConcreteSample {
  Tensor y;  // d x R, each row in the simplex
  double temperature = 1.0;
};

/// y(j,.) = softmax((gumbel(j,.) + logits(j,.)) / T).
ConcreteSample sample_concrete(const Tensor& logits, double T,
                               const Tensor& gumbel);

/// z_j = y_j . zeta; each entry in [-1,1].
std::vector<double> coarse_grain(const ConcreteSample& y, const Grid& grid);

/// Draws N Concrete samples and returns the frequency with which each
/// coordinate attains the row maximum. The argmax distribution equals
/// softmax(logits) for every T.
std::vector<double> verify_limit_property(std::span<const double> logits,
                                          double T, int N, Rng& rng);

/// 2-D histogram of Concrete samples over the 2-simplex, binned on the
/// standard equilateral-triangle embedding. Counts sum to N.
struct DensityGrid {
  int bins = 0;
  std::vector<double> counts;  // bins x bins, row-major

  double& at(int ix, int iy) { return counts[ix * bins + iy]; }
  double at(int ix, int iy) const { return counts[ix * bins + iy]; }
};

DensityGrid density_grid(const std::vector<double>& alpha, double T,
                         long long N, int bins, Rng& rng);

/// Fraction of N Concrete samples whose largest coordinate exceeds the
/// threshold; grows toward 1 as T decreases (mass pushed to the vertices).
double vertex_fraction(const std::vector<double>& alpha, double T, long long N,
                       double threshold, Rng& rng);

/// z = mu + lambda o eps (lambda entries are standard deviations, > 0).
std::vector<double> gaussian_reparameterize(std::span<const double> mu,
                                            std::span<const double> lambda,
                                            std::span<const double> eps);

}  // namespace cgvae
