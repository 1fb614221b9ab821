#include "cgvae/expfam.hpp"

#include <cmath>
#include <stdexcept>

#include "cgvae/numeric.hpp"

namespace cgvae {

namespace {

double entropy_term(std::span<const double> p) {
  double s = 0.0;
  for (double v : p)
    if (v > 0.0) s += v * std::log(v);
  return s;  // negative entropy
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// in-place solve of a small dense symmetric system by Gaussian elimination
// with partial pivoting; returns false if effectively singular
bool solve_dense(std::vector<double>& a, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int pivot = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    if (std::abs(a[pivot * n + col]) < 1e-14) return false;
    if (pivot != col) {
      for (int c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (int r = col + 1; r < n; ++r) {
      double f = a[r * n + col] / a[col * n + col];
      for (int c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < n; ++c) s -= a[r * n + c] * b[c];
    b[r] = s / a[r * n + r];
  }
  return true;
}

void check_fam(const DiscreteExpFam& fam, std::size_t plen) {
  if (fam.K < 1 || fam.S < 1 ||
      fam.t.shape() != std::vector<std::size_t>{static_cast<std::size_t>(fam.K),
                                                static_cast<std::size_t>(fam.S)})
    throw std::invalid_argument("DiscreteExpFam: inconsistent table");
  if (plen != static_cast<std::size_t>(fam.S))
    throw std::invalid_argument("expfam: parameter length mismatch");
}

}  // namespace

double cumulant(const DiscreteExpFam& fam, std::span<const double> phi) {
  check_fam(fam, phi.size());
  std::vector<double> logits(fam.K);
  for (int k = 0; k < fam.K; ++k)
    logits[k] = dot({fam.t.data() + k * fam.S, phi.size()}, phi);
  return log_sum_exp(logits);
}

std::vector<double> member_pmf(const DiscreteExpFam& fam,
                               std::span<const double> phi) {
  check_fam(fam, phi.size());
  std::vector<double> logits(fam.K);
  for (int k = 0; k < fam.K; ++k)
    logits[k] = dot({fam.t.data() + k * fam.S, phi.size()}, phi);
  return softmax(logits);
}

MomentParam to_moment(const DiscreteExpFam& fam, std::span<const double> phi) {
  std::vector<double> p = member_pmf(fam, phi);
  MomentParam eta;
  eta.eta.assign(fam.S, 0.0);
  for (int k = 0; k < fam.K; ++k)
    for (int s = 0; s < fam.S; ++s) eta.eta[s] += p[k] * fam.t(k, s);
  return eta;
}

NaturalParam to_natural(const DiscreteExpFam& fam,
                        std::span<const double> eta) {
  check_fam(fam, eta.size());
  const int S = fam.S;
  const double kTol = 1e-10;
  const int kMaxIter = 500;

  std::vector<double> phi(S, 0.0);
  auto objective = [&](const std::vector<double>& f) {
    return cumulant(fam, f) - dot(f, eta);
  };
  auto grad_norm = [&](const std::vector<double>& f) {
    std::vector<double> p = member_pmf(fam, f);
    double gm = 0.0;
    for (int s = 0; s < S; ++s) {
      double g = -eta[s];
      for (int k = 0; k < fam.K; ++k) g += p[k] * fam.t(k, s);
      gm = std::max(gm, std::abs(g));
    }
    return gm;
  };
  double obj = objective(phi);

  for (int iter = 0; iter < kMaxIter; ++iter) {
    std::vector<double> p = member_pmf(fam, phi);
    std::vector<double> grad(S, 0.0);
    for (int k = 0; k < fam.K; ++k)
      for (int s = 0; s < S; ++s) grad[s] += p[k] * fam.t(k, s);
    double gmax = 0.0;
    for (int s = 0; s < S; ++s) {
      grad[s] -= eta[s];
      gmax = std::max(gmax, std::abs(grad[s]));
    }
    if (gmax <= kTol) {
      NaturalParam out;
      out.phi = std::move(phi);
      return out;
    }

    // Hessian = covariance of t under p
    std::vector<double> hess(S * S, 0.0);
    std::vector<double> mean(S, 0.0);
    for (int k = 0; k < fam.K; ++k)
      for (int s = 0; s < S; ++s) mean[s] += p[k] * fam.t(k, s);
    for (int k = 0; k < fam.K; ++k)
      for (int s = 0; s < S; ++s) {
        double ds = fam.t(k, s) - mean[s];
        for (int s2 = 0; s2 <= s; ++s2)
          hess[s * S + s2] += p[k] * ds * (fam.t(k, s2) - mean[s2]);
      }
    for (int s = 0; s < S; ++s)
      for (int s2 = s + 1; s2 < S; ++s2) hess[s * S + s2] = hess[s2 * S + s];

    // Levenberg-damped Newton: near the moment-polytope boundary the
    // covariance degenerates, so retry with growing diagonal damping until
    // backtracking finds a descent step.
    bool moved = false;
    bool tried_shrink = false;
    for (double mu = 0.0; !moved && mu <= 1e6;
         mu = (mu == 0.0 ? 1e-10 : mu * 100.0)) {
      std::vector<double> step(grad);
      std::vector<double> hcopy(hess);
      for (int s = 0; s < S; ++s) hcopy[s * S + s] += mu;
      if (!solve_dense(hcopy, step, S)) continue;

      double alpha = 1.0;
      for (int bt = 0; bt < 60; ++bt) {
        std::vector<double> cand(S);
        for (int s = 0; s < S; ++s) cand[s] = phi[s] - alpha * step[s];
        double cobj = objective(cand);
        if (std::isfinite(cobj) && cobj < obj) {
          phi = std::move(cand);
          obj = cobj;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved && !tried_shrink) {
        tried_shrink = true;
        // near the optimum the objective is flat at double precision while
        // the gradient is still above tolerance; accept a full Newton step
        // if it strictly shrinks the gradient
        std::vector<double> cand(S);
        for (int s = 0; s < S; ++s) cand[s] = phi[s] - step[s];
        if (grad_norm(cand) < gmax) {
          obj = objective(cand);
          phi = std::move(cand);
          moved = true;
        }
      }
    }
    if (!moved)
      throw std::runtime_error(
          "to_natural: no descent step (eta outside or on the moment "
          "polytope boundary)");
  }
  throw std::runtime_error("to_natural: did not converge");
}

double neg_entropy(const DiscreteExpFam& fam, std::span<const double> eta) {
  NaturalParam phi = to_natural(fam, eta);
  std::vector<double> p = member_pmf(fam, phi.phi);
  return entropy_term(p);
}

double lemma_residual(const DiscreteExpFam& fam, std::span<const double> phi) {
  std::vector<double> p = member_pmf(fam, phi);
  MomentParam eta = to_moment(fam, phi);
  double info = entropy_term(p);  // I(eta) evaluated on the pmf directly
  return std::abs(info - dot(eta.eta, phi) + cumulant(fam, phi));
}

double term1_average(const DiscreteExpFam& fam,
                     const std::vector<NaturalParam>& phis,
                     const NaturalParam& phi_z) {
  if (phis.empty()) throw std::invalid_argument("term1_average: empty list");
  double f_z = cumulant(fam, phi_z.phi);
  double total = 0.0;
  for (const NaturalParam& phi_k : phis) {
    std::vector<double> p = member_pmf(fam, phi_k.phi);
    MomentParam eta_k = to_moment(fam, phi_k.phi);
    total += entropy_term(p) - dot(eta_k.eta, phi_z.phi) + f_z;
  }
  return total / static_cast<double>(phis.size());
}

std::pair<MomentParam, NaturalParam> bregman_centroid(
    const DiscreteExpFam& fam, const std::vector<NaturalParam>& phis) {
  if (phis.empty()) throw std::invalid_argument("bregman_centroid: empty list");
  MomentParam mean;
  mean.eta.assign(fam.S, 0.0);
  for (const NaturalParam& phi_k : phis) {
    MomentParam eta_k = to_moment(fam, phi_k.phi);
    for (int s = 0; s < fam.S; ++s) mean.eta[s] += eta_k.eta[s];
  }
  for (int s = 0; s < fam.S; ++s) mean.eta[s] /= phis.size();
  NaturalParam phi_star = to_natural(fam, mean.eta);
  return {std::move(mean), std::move(phi_star)};
}

double parametric_bound(const DiscreteExpFam& fam,
                        const std::vector<NaturalParam>& phis) {
  if (phis.empty()) throw std::invalid_argument("parametric_bound: empty list");
  double avg_info = 0.0;
  MomentParam mean;
  mean.eta.assign(fam.S, 0.0);
  for (const NaturalParam& phi_k : phis) {
    std::vector<double> p = member_pmf(fam, phi_k.phi);
    avg_info += entropy_term(p);
    MomentParam eta_k = to_moment(fam, phi_k.phi);
    for (int s = 0; s < fam.S; ++s) mean.eta[s] += eta_k.eta[s];
  }
  avg_info /= phis.size();
  for (int s = 0; s < fam.S; ++s) mean.eta[s] /= phis.size();
  return avg_info - neg_entropy(fam, mean.eta);
}

double nonparametric_bound(const std::vector<std::vector<double>>& pmfs) {
  if (pmfs.empty()) throw std::invalid_argument("nonparametric_bound: empty list");
  std::size_t K = pmfs.front().size();
  std::vector<double> mixture(K, 0.0);
  double avg_info = 0.0;
  for (const auto& p : pmfs) {
    if (p.size() != K)
      throw std::invalid_argument("nonparametric_bound: pmf length mismatch");
    avg_info += entropy_term(p);
    for (std::size_t k = 0; k < K; ++k) mixture[k] += p[k];
  }
  avg_info /= pmfs.size();
  for (std::size_t k = 0; k < K; ++k) mixture[k] /= pmfs.size();
  return avg_info - entropy_term(mixture);
}

}  // namespace cgvae
