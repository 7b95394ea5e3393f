#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace catdiff {

/// Token indices of a discrete latent sequence. Data sequences (x_0) never
/// contain the mask token.
using TokenSequence = std::vector<int>;

/// Opaque conditioning identifier standing in for encoded text features.
struct Condition {
  int id = 0;
};

/// Probability vector over token categories. Entries are nonnegative and sum
/// to 1 within 1e-9.
struct Categorical {
  std::vector<double> probs;

  int size() const { return static_cast<int>(probs.size()); }

  double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

  void validate(double tol = 1e-9) const {
    for (double p : probs) {
      if (!(p >= -tol) || !std::isfinite(p)) {
        throw std::invalid_argument("Categorical: negative or non-finite entry");
      }
    }
    if (std::abs(sum() - 1.0) > tol) {
      throw std::invalid_argument("Categorical: probabilities do not sum to 1");
    }
  }

  void normalize() {
    const double s = sum();
    if (s <= 0.0) throw std::domain_error("Categorical: cannot normalize zero mass");
    for (double& p : probs) p /= s;
  }
};

/// Half the L1 distance between two discrete distributions.
inline double total_variation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
  return 0.5 * d;
}

/// KL divergence between discrete distributions, 0*log(0) = 0 convention.
inline double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

}  // namespace catdiff
