#include "catdiff/schedule.hpp"

#include <cmath>

namespace catdiff {

namespace {

void check_unit_interval(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
  }
}

}  // namespace

std::string to_string(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::Uniform: return "uniform";
    case MatrixKind::Mask: return "mask";
    case MatrixKind::MaskUniform: return "mask-uniform";
  }
  throw std::logic_error("unknown MatrixKind");
}

MatrixKind matrix_kind_from_string(const std::string& name) {
  if (name == "uniform") return MatrixKind::Uniform;
  if (name == "mask") return MatrixKind::Mask;
  if (name == "mask-uniform" || name == "mask_uniform") return MatrixKind::MaskUniform;
  throw std::invalid_argument("unknown matrix kind: " + name);
}

void NoiseSchedule::validate() const {
  if (K < 2) throw std::invalid_argument("NoiseSchedule: K must be >= 2");
  if (T < 1) throw std::invalid_argument("NoiseSchedule: T must be >= 1");
  const auto n = static_cast<std::size_t>(T + 1);
  if (alpha_bar.size() != n || gamma_bar.size() != n || beta_bar.size() != n) {
    throw std::invalid_argument("NoiseSchedule: arrays must have length T+1");
  }
  constexpr double tol = 1e-12;
  // beta_bar[0] is the empty stay-probability product (1) for the Mask kind
  // and zero accumulated uniform mass for the others.
  const double beta0 = kind == MatrixKind::Mask ? 1.0 : 0.0;
  if (std::abs(alpha_bar[0] - 1.0) > tol || std::abs(gamma_bar[0]) > tol ||
      std::abs(beta_bar[0] - beta0) > tol) {
    throw std::invalid_argument("NoiseSchedule: bad t=0 anchors");
  }
  for (int t = 0; t <= T; ++t) {
    check_unit_interval(alpha_bar[t], "alpha_bar");
    check_unit_interval(gamma_bar[t], "gamma_bar");
    check_unit_interval(beta_bar[t], "beta_bar");
    if (t > 0) {
      if (alpha_bar[t] > alpha_bar[t - 1] + tol) {
        throw std::invalid_argument("NoiseSchedule: alpha_bar must be nonincreasing");
      }
      if (gamma_bar[t] < gamma_bar[t - 1] - tol) {
        throw std::invalid_argument("NoiseSchedule: gamma_bar must be nondecreasing");
      }
    }
    switch (kind) {
      case MatrixKind::Uniform:
        if (std::abs(gamma_bar[t]) > tol ||
            std::abs(K * beta_bar[t] - (1.0 - alpha_bar[t])) > 1e-9) {
          throw std::invalid_argument("NoiseSchedule: uniform kind constraint violated");
        }
        break;
      case MatrixKind::Mask:
        if (std::abs(gamma_bar[t] - (1.0 - beta_bar[t])) > 1e-9 ||
            std::abs(alpha_bar[t] - beta_bar[t]) > 1e-9) {
          throw std::invalid_argument("NoiseSchedule: mask kind constraint violated");
        }
        break;
      case MatrixKind::MaskUniform:
        if (std::abs(K * beta_bar[t] - (1.0 - alpha_bar[t] - gamma_bar[t])) > 1e-9) {
          throw std::invalid_argument("NoiseSchedule: mask-uniform kind constraint violated");
        }
        break;
    }
  }
}

NoiseSchedule build_linear_schedule(MatrixKind kind, int K, int T, ScheduleTargets targets) {
  if (T < 1) throw std::invalid_argument("build_linear_schedule: T must be >= 1");
  if (K < 2) throw std::invalid_argument("build_linear_schedule: K must be >= 2");

  NoiseSchedule s;
  s.kind = kind;
  s.K = K;
  s.T = T;
  s.alpha_bar.assign(T + 1, 0.0);
  s.gamma_bar.assign(T + 1, 0.0);
  s.beta_bar.assign(T + 1, 0.0);

  switch (kind) {
    case MatrixKind::Uniform: {
      check_unit_interval(targets.alpha_bar_T, "alpha_bar_T");
      for (int t = 0; t <= T; ++t) {
        const double f = static_cast<double>(t) / T;
        s.alpha_bar[t] = 1.0 + f * (targets.alpha_bar_T - 1.0);
        s.gamma_bar[t] = 0.0;
        s.beta_bar[t] = (1.0 - s.alpha_bar[t]) / K;
      }
      break;
    }
    case MatrixKind::Mask: {
      check_unit_interval(targets.gamma_bar_T, "gamma_bar_T");
      for (int t = 0; t <= T; ++t) {
        const double f = static_cast<double>(t) / T;
        s.gamma_bar[t] = f * targets.gamma_bar_T;
        s.beta_bar[t] = 1.0 - s.gamma_bar[t];
        // Stay-probability product; keeps alpha_bar's own meaning for Mask.
        s.alpha_bar[t] = s.beta_bar[t];
      }
      break;
    }
    case MatrixKind::MaskUniform: {
      check_unit_interval(targets.alpha_bar_T, "alpha_bar_T");
      check_unit_interval(targets.gamma_bar_T, "gamma_bar_T");
      if (targets.alpha_bar_T + targets.gamma_bar_T > 1.0 + 1e-12) {
        throw std::invalid_argument(
            "build_linear_schedule: alpha_bar_T + gamma_bar_T must not exceed 1");
      }
      for (int t = 0; t <= T; ++t) {
        const double f = static_cast<double>(t) / T;
        s.alpha_bar[t] = 1.0 + f * (targets.alpha_bar_T - 1.0);
        s.gamma_bar[t] = f * targets.gamma_bar_T;
        s.beta_bar[t] = (1.0 - s.alpha_bar[t] - s.gamma_bar[t]) / K;
      }
      break;
    }
  }
  s.validate();
  return s;
}

PerStepParams per_step_params(const NoiseSchedule& schedule, int t) {
  if (t < 1 || t > schedule.T) {
    throw std::invalid_argument("per_step_params: t out of range");
  }
  PerStepParams p;
  const int K = schedule.K;
  switch (schedule.kind) {
    case MatrixKind::Uniform: {
      const double prev = schedule.alpha_bar[t - 1];
      if (prev <= 0.0) throw SaturationError("per_step_params: alpha_bar saturated before t");
      p.alpha = schedule.alpha_bar[t] / prev;
      p.beta = (1.0 - p.alpha) / K;
      p.gamma = 0.0;
      break;
    }
    case MatrixKind::Mask: {
      const double prev = 1.0 - schedule.gamma_bar[t - 1];
      if (prev <= 0.0) throw SaturationError("per_step_params: gamma_bar saturated before t");
      p.gamma = 1.0 - (1.0 - schedule.gamma_bar[t]) / prev;
      p.beta = 1.0 - p.gamma;
      p.alpha = p.beta;
      break;
    }
    case MatrixKind::MaskUniform: {
      const double a_prev = schedule.alpha_bar[t - 1];
      const double g_prev = 1.0 - schedule.gamma_bar[t - 1];
      if (a_prev <= 0.0) throw SaturationError("per_step_params: alpha_bar saturated before t");
      if (g_prev <= 0.0) throw SaturationError("per_step_params: gamma_bar saturated before t");
      p.alpha = schedule.alpha_bar[t] / a_prev;
      p.gamma = 1.0 - (1.0 - schedule.gamma_bar[t]) / g_prev;
      p.beta = (1.0 - p.alpha - p.gamma) / K;
      break;
    }
  }
  return p;
}

nlohmann::json NoiseSchedule::to_json() const {
  return nlohmann::json{{"kind", catdiff::to_string(kind)},
                        {"K", K},
                        {"T", T},
                        {"alpha_bar", alpha_bar},
                        {"gamma_bar", gamma_bar},
                        {"beta_bar", beta_bar}};
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::json& j) {
  NoiseSchedule s;
  s.kind = matrix_kind_from_string(j.at("kind").get<std::string>());
  s.K = j.at("K").get<int>();
  s.T = j.at("T").get<int>();
  s.alpha_bar = j.at("alpha_bar").get<std::vector<double>>();
  s.gamma_bar = j.at("gamma_bar").get<std::vector<double>>();
  s.beta_bar = j.at("beta_bar").get<std::vector<double>>();
  s.validate();
  return s;
}

}  // namespace catdiff
