#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "catdiff/schedule.hpp"
#include "catdiff/types.hpp"

namespace catdiff {

/// Transition distributions for the three matrix kinds. 0-based token
/// indexing with the mask token at index K when present. All operations are
/// pure; the model is immutable after construction.
class TransitionModel {
 public:
  explicit TransitionModel(NoiseSchedule schedule, int oracle_limit = 64);

  const NoiseSchedule& schedule() const { return schedule_; }
  MatrixKind kind() const { return schedule_.kind; }
  int K() const { return schedule_.K; }
  int T() const { return schedule_.T; }

  /// K for Uniform, K+1 for Mask and MaskUniform.
  int total_categories() const { return total_; }

  bool has_mask() const { return kind() != MatrixKind::Uniform; }

  /// Mask token index (= K); throws for the Uniform kind.
  int mask_token() const;

  /// Column of Q_t selecting x_prev as the previous state: q(x_t | x_{t-1}).
  Categorical step_distribution(int x_prev, int t) const;

  /// Closed-form q(x_t | x_0); t = 0 returns a point mass on x0.
  Categorical cumulative_distribution(int x0, int t) const;

  /// Scalar q(x_t = x | x0) without building the full vector.
  double cumulative_prob(int x0, int x, int t) const;

  /// Scalar single-jump probability q(x_to | x_from) under the given
  /// effective parameters.
  double jump_prob(int x_from, int x_to, const PerStepParams& p) const;

  /// Effective single-jump parameters of the composite chain from t_from to
  /// t_to (the family is closed under composition).
  PerStepParams composite_params(int t_from, int t_to) const;

  /// q(x_{t_to} | x_{t_from} = x_prev) for 0 <= t_from < t_to <= T.
  Categorical composite_distribution(int x_prev, int t_from, int t_to) const;

  /// Explicit column-stochastic Q_t; verification oracle, capped at
  /// oracle_limit categories.
  Eigen::MatrixXd dense_matrix(int t) const;

  /// Limiting distribution of the forward chain; requires a saturated
  /// schedule (tolerance 1e-9).
  Categorical stationary_distribution() const;

  int oracle_limit() const { return oracle_limit_; }

 private:
  Categorical from_params(int x_prev, const PerStepParams& p) const;

  NoiseSchedule schedule_;
  int total_;
  int oracle_limit_;
};

/// JSON array serialization for a categorical distribution.
nlohmann::json categorical_to_json(const Categorical& c);

/// Column-major JSON serialization with an explicit "layout" field.
nlohmann::json dense_matrix_to_json(const Eigen::MatrixXd& m);

}  // namespace catdiff
