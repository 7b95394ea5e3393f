#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace catdiff {

/// N x d real matrix of feature vectors.
struct FeatureSet {
  Eigen::MatrixXd features;

  void validate() const;
};

/// N x C matrix of per-sample class distributions; rows sum to 1 within 1e-9.
struct ProbSet {
  Eigen::MatrixXd probs;

  void validate() const;
};

/// Frechet distance between Gaussian fits of the two feature sets. The matrix
/// square root is taken of the symmetric PSD product C_r^{1/2} C_f C_r^{1/2};
/// negative eigenvalues are clamped at 0 and the result is clamped at 0.
double fid(const FeatureSet& real, const FeatureSet& fake);

/// Mean over paired rows of D_KL(real_row || fake_row) with eps-smoothing
/// (1e-10) on the second argument.
double kl_score(const ProbSet& real, const ProbSet& fake);

enum class DisturbanceKind { Noise, Mask, Mix };

DisturbanceKind disturbance_kind_from_string(const std::string& name);

struct DisturbanceResult {
  double level = 0.0;
  double fid = 0.0;
  double kl = 0.0;
};

/// Applies the disturbance at each level to a seeded synthetic feature and
/// probability set and scores against the undisturbed baseline; level 0
/// yields the identical-set baseline.
std::vector<DisturbanceResult> disturbance_suite(DisturbanceKind kind,
                                                 const std::vector<double>& levels,
                                                 int n_samples, int feature_dim, int classes,
                                                 std::mt19937_64& rng);

FeatureSet feature_set_from_csv(const std::string& text);
std::string feature_set_to_csv(const FeatureSet& fs);
ProbSet prob_set_from_csv(const std::string& text);

/// Score document: {metric, value, n_real, n_fake, metadata}.
nlohmann::json score_json(const std::string& metric, double value, long n_real, long n_fake,
                          nlohmann::json metadata = nlohmann::json::object());

}  // namespace catdiff
