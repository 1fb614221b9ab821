#include "cgvae/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cgvae/numeric.hpp"

namespace cgvae {

Grid make_grid(int R) {
  if (R < 2) throw std::invalid_argument("make_grid: R must be >= 2");
  Grid g;
  g.R = R;
  g.zeta.resize(R);
  for (int r = 1; r <= R; ++r)
    g.zeta[r - 1] = static_cast<double>(2 * r - (R + 1)) / (R - 1);
  return g;
}

Tensor power_table(const Grid& grid, int M) {
  if (M < 1) throw std::invalid_argument("power_table: M must be >= 1");
  Tensor p({static_cast<std::size_t>(grid.R), static_cast<std::size_t>(M)});
  for (int r = 0; r < grid.R; ++r) {
    double acc = 1.0;
    for (int m = 0; m < M; ++m) {
      acc *= grid.zeta[r];
      p(r, m) = acc;
    }
  }
  return p;
}

Tensor poly_logits(const PolyCoeffs& coeffs, const Grid& grid) {
  if (coeffs.M >= grid.R - 1)
    throw std::invalid_argument("poly_logits: requires M < R-1");
  Tensor p = power_table(grid, coeffs.M);
  Tensor out({static_cast<std::size_t>(coeffs.d),
              static_cast<std::size_t>(grid.R)});
  for (int j = 0; j < coeffs.d; ++j)
    for (int r = 0; r < grid.R; ++r) {
      double s = 0.0;
      for (int m = 0; m < coeffs.M; ++m) s += coeffs.coeffs(j, m) * p(r, m);
      out(j, r) = s;
    }
  return out;
}

std::vector<double> category_probs(std::span<const double> logits) {
  for (double l : logits)
    if (!std::isfinite(l))
      throw std::invalid_argument("category_probs: non-finite logit");
  return softmax(logits);
}

ConcreteSample sample_concrete(const Tensor& logits, double T,
                               const Tensor& gumbel) {
  if (T <= 0.0)
    throw std::invalid_argument("sample_concrete: T must be positive");
  if (!logits.same_shape(gumbel))
    throw std::invalid_argument("sample_concrete: logits/gumbel shape mismatch");
  std::size_t d = logits.rows(), R = logits.cols();
  ConcreteSample s;
  s.temperature = T;
  s.y = Tensor({d, R});
  std::vector<double> perturbed(R);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t r = 0; r < R; ++r)
      perturbed[r] = gumbel(j, r) + logits(j, r);
    softmax(perturbed, {s.y.data() + j * R, R}, T);
  }
  return s;
}

std::vector<double> coarse_grain(const ConcreteSample& s, const Grid& grid) {
  if (s.y.cols() != static_cast<std::size_t>(grid.R))
    throw std::invalid_argument("coarse_grain: row width does not match R");
  std::size_t d = s.y.rows();
  std::vector<double> z(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double acc = 0.0;
    for (int r = 0; r < grid.R; ++r) acc += s.y(j, r) * grid.zeta[r];
    z[j] = acc;
  }
  return z;
}

std::vector<double> verify_limit_property(std::span<const double> logits,
                                          double T, int N, Rng& rng) {
  if (T <= 0.0 || N < 1)
    throw std::invalid_argument("verify_limit_property: bad arguments");
  std::size_t R = logits.size();
  std::vector<double> freq(R, 0.0);
  // argmax of softmax((g+phi)/T) is argmax of g+phi for any T > 0
  for (int n = 0; n < N; ++n) {
    std::size_t best = 0;
    double best_v = rng.gumbel() + logits[0];
    for (std::size_t r = 1; r < R; ++r) {
      double v = rng.gumbel() + logits[r];
      if (v > best_v) {
        best_v = v;
        best = r;
      }
    }
    freq[best] += 1.0;
  }
  for (double& f : freq) f /= N;
  return freq;
}

DensityGrid density_grid(const std::vector<double>& alpha, double T,
                         long long N, int bins, Rng& rng) {
  if (alpha.size() != 3)
    throw std::invalid_argument("density_grid: needs a pmf over 3 categories");
  if (bins < 1 || N < 0)
    throw std::invalid_argument("density_grid: bad arguments");
  const double kHeight = 0.8660254037844386467637231707529;  // sqrt(3)/2
  std::vector<double> logits(3);
  for (int r = 0; r < 3; ++r) logits[r] = std::log(alpha[r]);
  DensityGrid h;
  h.bins = bins;
  h.counts.assign(static_cast<std::size_t>(bins) * bins, 0.0);
  double y[3];
  for (long long n = 0; n < N; ++n) {
    for (int r = 0; r < 3; ++r) y[r] = rng.gumbel() + logits[r];
    softmax({y, 3}, {y, 3}, T);
    double px = y[1] + 0.5 * y[2];
    double py = kHeight * y[2];
    int ix = std::min(bins - 1, static_cast<int>(px * bins));
    int iy = std::min(bins - 1, static_cast<int>(py / kHeight * bins));
    h.at(ix, iy) += 1.0;
  }
  return h;
}

double vertex_fraction(const std::vector<double>& alpha, double T, long long N,
                       double threshold, Rng& rng) {
  if (T <= 0.0 || N < 1)
    throw std::invalid_argument("vertex_fraction: bad arguments");
  std::size_t R = alpha.size();
  std::vector<double> logits(R), y(R);
  for (std::size_t r = 0; r < R; ++r) logits[r] = std::log(alpha[r]);
  long long hits = 0;
  for (long long n = 0; n < N; ++n) {
    for (std::size_t r = 0; r < R; ++r) y[r] = rng.gumbel() + logits[r];
    softmax(y, y, T);
    if (*std::max_element(y.begin(), y.end()) > threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(N);
}

std::vector<double> gaussian_reparameterize(std::span<const double> mu,
                                            std::span<const double> lambda,
                                            std::span<const double> eps) {
  if (mu.size() != lambda.size() || mu.size() != eps.size())
    throw std::invalid_argument("gaussian_reparameterize: size mismatch");
  std::vector<double> z(mu.size());
  for (std::size_t j = 0; j < mu.size(); ++j) {
    if (lambda[j] <= 0.0)
      throw std::invalid_argument("gaussian_reparameterize: lambda must be > 0");
    z[j] = mu[j] + lambda[j] * eps[j];
  }
  return z;
}

}  // namespace cgvae
