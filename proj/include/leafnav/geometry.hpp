#pragma once

#include <span>
#include <vector>

#include "leafnav/net.hpp"

namespace leafnav {

// M = sum_i weights_i * factors_i * factors_i^T, kept factored. Symmetric
// PSD with rank <= C-1 since the weighted factor sum vanishes.
struct FactoredPSD {
  std::vector<double> weights;               // the C softmax probabilities
  std::vector<std::vector<double>> factors;  // C gradient vectors
  int num_factors() const { return static_cast<int>(weights.size()); }
  int dim() const { return factors.empty() ? 0 : static_cast<int>(factors.front().size()); }
  // Factored matvec: M v = sum_i w_i <f_i, v> f_i.
  std::vector<double> apply(std::span<const double> v) const;
  // tr M = sum_i w_i ||f_i||^2, no densification.
  double trace() const;
};

struct Spectrum {
  std::vector<double> eigenvalues;  // C values, descending; the rest are 0
  double trace = 0.0;               // sum_i w_i ||f_i||^2
  int soft_rank = 0;                // eigenvalues above 1e-8 * lambda_max
};

// G(x,w): weights = softmax probs, factors = rows of the input Jacobian.
FactoredPSD local_data_matrix(const NetParams& params, std::span<const double> x);
// F(x,w): same weights, factors = flattened grad_w log p_i.
FactoredPSD local_fisher_matrix(const NetParams& params, std::span<const double> x);

// Eigenvalues via the C x C Gram matrix K_ij = sqrt(w_i w_j) <f_i, f_j>,
// which shares the nonzero spectrum of M.
Spectrum spectrum(const FactoredPSD& m);

// Orthogonal projection of v onto the span of the given vectors, through
// the normal system with eigenvalue cutoff 1e-10 * lambda_max (the rows
// are linearly dependent, so the system is always singular).
std::vector<double> project_onto_span(std::span<const double> v,
                                      const std::vector<std::vector<double>>& rows);

std::vector<double> project_onto_distribution(std::span<const double> v,
                                              const InputJacobian& jac);
std::vector<double> project_onto_kernel(std::span<const double> v,
                                        const InputJacobian& jac);

// Strictly positive inputs summing to 1; sum_i p_i log(p_i / q_i).
double kl_divergence(std::span<const double> p, std::span<const double> q);

// KL between the softmax distributions at two log-prob vectors, computed
// from log-probs so extreme scores never produce log(0).
double kl_from_log_probs(std::span<const double> log_p, std::span<const double> log_q);

struct KlQuadratic {
  double measured = 0.0;   // KL(p(x+tu) || p(x))
  double predicted = 0.0;  // (1/2) t^2 u^T G u through the factors
  double rel_error = 0.0;
};

// Requires x and x+tu in one linear region (ReLU pattern compared at the
// endpoints and midpoint); throws with retry advice on a crossing.
KlQuadratic kl_quadratic_check(const NetParams& params, std::span<const double> x,
                               std::span<const double> u, double t);

struct BracketResidual {
  double in_span = 0.0;      // ||P b||
  double out_of_span = 0.0;  // ||b - P b||
  double relative = 0.0;     // out / max(||b||, 1e-30)
};

// Lie bracket residual of the fields g_i = grad_x log p_i against the span
// of all g_k. b = D_{g_i} g_j - D_{g_j} g_i via central differences with
// displacement h along each unit direction; for a ReLU net the relative
// residual is ~0 (the involutivity behind the foliation). A linear-region
// guard (score second differences along each probe) throws on a crossing.
BracketResidual involutivity_residual(const NetParams& params, std::span<const double> x,
                                      int i, int j, double h);

// Same bracket computed for the parameter-space fields w -> grad_w log p_i
// at fixed x. Reported, not asserted: this distribution is not involutive.
BracketResidual param_involutivity_residual(const NetParams& params,
                                            std::span<const double> x, int i, int j,
                                            double h);

}  // namespace leafnav
