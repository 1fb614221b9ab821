#pragma once

#include <span>
#include <utility>
#include <vector>

#include "cgvae/tensor.hpp"

namespace cgvae {

/// Discrete exponential family over K support points with S sufficient
/// statistics: p_k(phi) proportional to exp(t_k . phi).
struct DiscreteExpFam {
  int K = 0;
  int S = 0;
  Tensor t;  // K x S statistic table
};

struct NaturalParam {
  std::vector<double> phi;
};

struct MomentParam {
  std::vector<double> eta;
};

/// F(phi) = log sum_k exp(t_k . phi).
double cumulant(const DiscreteExpFam& fam, std::span<const double> phi);

/// pmf of the member with natural parameter phi.
std::vector<double> member_pmf(const DiscreteExpFam& fam,
                               std::span<const double> phi);

/// eta = E[t] under the member pmf.
MomentParam to_moment(const DiscreteExpFam& fam, std::span<const double> phi);

/// Inverse Legendre map: solves min_phi F(phi) - eta . phi by damped Newton
/// (gradient-descent fallback) to gradient inf-norm <= 1e-10. Throws if eta
/// is outside or on the boundary of the moment polytope (non-convergence).
NaturalParam to_natural(const DiscreteExpFam& fam,
                        std::span<const double> eta);

/// Shannon negative entropy I(eta) = sum_k p_k log p_k of the member with
/// moment eta.
double neg_entropy(const DiscreteExpFam& fam, std::span<const double> eta);

/// |I(eta(phi)) - eta(phi) . phi + F(phi)|; zero for exponential families.
double lemma_residual(const DiscreteExpFam& fam, std::span<const double> phi);

/// (1/n) sum_k KL(member(phi_k) : member(phi_z)) evaluated through the
/// I/F duality.
double term1_average(const DiscreteExpFam& fam,
                     const std::vector<NaturalParam>& phis,
                     const NaturalParam& phi_z);

/// Moment coordinates of the centroid are the arithmetic mean of the
/// members' moments; natural coordinates recovered via to_natural.
std::pair<MomentParam, NaturalParam> bregman_centroid(
    const DiscreteExpFam& fam, const std::vector<NaturalParam>& phis);

/// (1/n) sum_k I(eta_k) - I(mean eta_k); equals term1_average at the
/// centroid.
double parametric_bound(const DiscreteExpFam& fam,
                        const std::vector<NaturalParam>& phis);

/// (1/n) sum_k I(p_k) - I(mixture); never exceeds the parametric bound.
double nonparametric_bound(const std::vector<std::vector<double>>& pmfs);

}  // namespace cgvae
