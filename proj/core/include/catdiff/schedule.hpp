#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace catdiff {

/// Corruption strategy of the forward chain.
enum class MatrixKind { Uniform, Mask, MaskUniform };

std::string to_string(MatrixKind kind);
MatrixKind matrix_kind_from_string(const std::string& name);

/// Thrown when a per-step parameter cannot be recovered because the cumulative
/// parameter already saturated before the requested timestep.
struct SaturationError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Cumulative end-values at t = T. alpha_bar_T applies to Uniform and
/// MaskUniform, gamma_bar_T to Mask and MaskUniform; the other field is
/// ignored for the respective kind.
struct ScheduleTargets {
  double alpha_bar_T = 0.0;
  double gamma_bar_T = 0.0;
};

struct PerStepParams {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
};

/// Per-timestep cumulative corruption parameters for t = 0..T. Immutable
/// after construction; arrays always carry all three parameters with their
/// own meaning per kind (beta_bar is derived from the kind constraint).
struct NoiseSchedule {
  MatrixKind kind = MatrixKind::Uniform;
  int K = 0;  // vocabulary size, excluding the mask token
  int T = 0;
  std::vector<double> alpha_bar;  // length T+1, alpha_bar[0] = 1
  std::vector<double> gamma_bar;  // length T+1, gamma_bar[0] = 0
  std::vector<double> beta_bar;   // length T+1, derived

  void validate() const;

  nlohmann::json to_json() const;
  static NoiseSchedule from_json(const nlohmann::json& j);
};

/// Linearly interpolates the primary cumulative parameters from their t = 0
/// anchors to the given end-values; beta_bar is derived from the kind
/// constraint at every t.
NoiseSchedule build_linear_schedule(MatrixKind kind, int K, int T, ScheduleTargets targets);

/// Recovers (alpha_t, beta_t, gamma_t) from consecutive cumulative values.
/// alpha_T = 0 at a fully corrupting final step is returned without division.
PerStepParams per_step_params(const NoiseSchedule& schedule, int t);

}  // namespace catdiff
