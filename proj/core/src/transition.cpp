#include "catdiff/transition.hpp"

#include <cmath>

namespace catdiff {

namespace {
constexpr double kSaturationTol = 1e-9;
}

TransitionModel::TransitionModel(NoiseSchedule schedule, int oracle_limit)
    : schedule_(std::move(schedule)), oracle_limit_(oracle_limit) {
  schedule_.validate();
  total_ = schedule_.K + (schedule_.kind == MatrixKind::Uniform ? 0 : 1);
}

int TransitionModel::mask_token() const {
  if (!has_mask()) throw std::logic_error("mask_token: uniform kind has no mask token");
  return schedule_.K;
}

Categorical TransitionModel::from_params(int x_prev, const PerStepParams& p) const {
  Categorical c;
  c.probs.assign(total_, 0.0);
  if (has_mask() && x_prev == mask_token()) {
    c.probs[mask_token()] = 1.0;  // absorbing
    return c;
  }
  switch (kind()) {
    case MatrixKind::Uniform:
      for (int i = 0; i < K(); ++i) c.probs[i] = p.beta;
      c.probs[x_prev] += p.alpha;
      break;
    case MatrixKind::Mask:
      c.probs[x_prev] = p.beta;
      c.probs[mask_token()] = p.gamma;
      break;
    case MatrixKind::MaskUniform:
      for (int i = 0; i < K(); ++i) c.probs[i] = p.beta;
      c.probs[x_prev] += p.alpha;
      c.probs[mask_token()] = p.gamma;
      break;
  }
  return c;
}

Categorical TransitionModel::step_distribution(int x_prev, int t) const {
  if (x_prev < 0 || x_prev >= total_) {
    throw std::invalid_argument("step_distribution: token out of range");
  }
  if (t < 1 || t > T()) throw std::invalid_argument("step_distribution: t out of range");
  return from_params(x_prev, per_step_params(schedule_, t));
}

Categorical TransitionModel::cumulative_distribution(int x0, int t) const {
  if (x0 < 0 || x0 >= K()) {
    throw std::invalid_argument("cumulative_distribution: x0 must be a non-mask token");
  }
  if (t < 0 || t > T()) throw std::invalid_argument("cumulative_distribution: t out of range");
  Categorical c;
  c.probs.assign(total_, 0.0);
  switch (kind()) {
    case MatrixKind::Uniform:
      for (int i = 0; i < K(); ++i) c.probs[i] = schedule_.beta_bar[t];
      c.probs[x0] += schedule_.alpha_bar[t];
      break;
    case MatrixKind::Mask:
      c.probs[x0] = schedule_.beta_bar[t];
      c.probs[mask_token()] = schedule_.gamma_bar[t];
      break;
    case MatrixKind::MaskUniform:
      for (int i = 0; i < K(); ++i) c.probs[i] = schedule_.beta_bar[t];
      c.probs[x0] += schedule_.alpha_bar[t];
      c.probs[mask_token()] = schedule_.gamma_bar[t];
      break;
  }
  return c;
}

double TransitionModel::cumulative_prob(int x0, int x, int t) const {
  if (x0 < 0 || x0 >= K()) {
    throw std::invalid_argument("cumulative_prob: x0 must be a non-mask token");
  }
  if (x < 0 || x >= total_) throw std::invalid_argument("cumulative_prob: x out of range");
  if (t < 0 || t > T()) throw std::invalid_argument("cumulative_prob: t out of range");
  switch (kind()) {
    case MatrixKind::Uniform:
      return schedule_.beta_bar[t] + (x == x0 ? schedule_.alpha_bar[t] : 0.0);
    case MatrixKind::Mask:
      if (x == mask_token()) return schedule_.gamma_bar[t];
      return x == x0 ? schedule_.beta_bar[t] : 0.0;
    case MatrixKind::MaskUniform:
      if (x == mask_token()) return schedule_.gamma_bar[t];
      return schedule_.beta_bar[t] + (x == x0 ? schedule_.alpha_bar[t] : 0.0);
  }
  throw std::logic_error("unknown MatrixKind");
}

double TransitionModel::jump_prob(int x_from, int x_to, const PerStepParams& p) const {
  if (x_from < 0 || x_from >= total_ || x_to < 0 || x_to >= total_) {
    throw std::invalid_argument("jump_prob: token out of range");
  }
  if (has_mask() && x_from == mask_token()) {
    return x_to == mask_token() ? 1.0 : 0.0;
  }
  switch (kind()) {
    case MatrixKind::Uniform:
      return p.beta + (x_to == x_from ? p.alpha : 0.0);
    case MatrixKind::Mask:
      if (x_to == mask_token()) return p.gamma;
      return x_to == x_from ? p.beta : 0.0;
    case MatrixKind::MaskUniform:
      if (x_to == mask_token()) return p.gamma;
      return p.beta + (x_to == x_from ? p.alpha : 0.0);
  }
  throw std::logic_error("unknown MatrixKind");
}

PerStepParams TransitionModel::composite_params(int t_from, int t_to) const {
  if (t_from < 0 || t_to > T() || t_from >= t_to) {
    throw std::invalid_argument("composite_params: need 0 <= t_from < t_to <= T");
  }
  PerStepParams p;
  switch (kind()) {
    case MatrixKind::Uniform: {
      const double prev = schedule_.alpha_bar[t_from];
      if (prev <= 0.0) throw SaturationError("composite_params: alpha_bar saturated at t_from");
      p.alpha = schedule_.alpha_bar[t_to] / prev;
      p.beta = (1.0 - p.alpha) / K();
      break;
    }
    case MatrixKind::Mask: {
      const double prev = 1.0 - schedule_.gamma_bar[t_from];
      if (prev <= 0.0) throw SaturationError("composite_params: gamma_bar saturated at t_from");
      p.gamma = 1.0 - (1.0 - schedule_.gamma_bar[t_to]) / prev;
      p.beta = 1.0 - p.gamma;
      p.alpha = p.beta;
      break;
    }
    case MatrixKind::MaskUniform: {
      const double a_prev = schedule_.alpha_bar[t_from];
      const double g_prev = 1.0 - schedule_.gamma_bar[t_from];
      if (a_prev <= 0.0) throw SaturationError("composite_params: alpha_bar saturated at t_from");
      if (g_prev <= 0.0) throw SaturationError("composite_params: gamma_bar saturated at t_from");
      p.alpha = schedule_.alpha_bar[t_to] / a_prev;
      p.gamma = 1.0 - (1.0 - schedule_.gamma_bar[t_to]) / g_prev;
      p.beta = (1.0 - p.alpha - p.gamma) / K();
      break;
    }
  }
  return p;
}

Categorical TransitionModel::composite_distribution(int x_prev, int t_from, int t_to) const {
  if (x_prev < 0 || x_prev >= total_) {
    throw std::invalid_argument("composite_distribution: token out of range");
  }
  return from_params(x_prev, composite_params(t_from, t_to));
}

Eigen::MatrixXd TransitionModel::dense_matrix(int t) const {
  if (t < 1 || t > T()) throw std::invalid_argument("dense_matrix: t out of range");
  if (total_ > oracle_limit_) {
    throw std::invalid_argument("dense_matrix: oracle limit exceeded");
  }
  Eigen::MatrixXd q(total_, total_);
  for (int j = 0; j < total_; ++j) {
    const Categorical col = step_distribution(j, t);
    for (int i = 0; i < total_; ++i) q(i, j) = col.probs[i];
  }
  return q;
}

Categorical TransitionModel::stationary_distribution() const {
  Categorical c;
  c.probs.assign(total_, 0.0);
  switch (kind()) {
    case MatrixKind::Uniform:
      if (schedule_.alpha_bar[T()] > kSaturationTol) {
        throw std::domain_error("stationary_distribution: schedule not saturated");
      }
      for (int i = 0; i < K(); ++i) c.probs[i] = 1.0 / K();
      break;
    case MatrixKind::Mask:
      if (schedule_.beta_bar[T()] > kSaturationTol) {
        throw std::domain_error("stationary_distribution: schedule not saturated");
      }
      c.probs[mask_token()] = 1.0;
      break;
    case MatrixKind::MaskUniform:
      if (schedule_.alpha_bar[T()] > kSaturationTol) {
        throw std::domain_error("stationary_distribution: schedule not saturated");
      }
      for (int i = 0; i < K(); ++i) c.probs[i] = schedule_.beta_bar[T()];
      c.probs[mask_token()] = schedule_.gamma_bar[T()];
      break;
  }
  return c;
}

nlohmann::json categorical_to_json(const Categorical& c) {
  return nlohmann::json{{"probs", c.probs}};
}

nlohmann::json dense_matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data(m.data(), m.data() + m.size());
  return nlohmann::json{{"layout", "column-major"},
                        {"rows", m.rows()},
                        {"cols", m.cols()},
                        {"data", data}};
}

}  // namespace catdiff
