#pragma once

#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "catdiff/transition.hpp"
#include "catdiff/types.hpp"

namespace catdiff {

/// Per-position categorical over the K non-mask tokens: p(x0_hat | x_t, y).
struct DenoiserOutput {
  std::vector<std::vector<double>> probs;  // N rows of length K
  bool fallback = false;                   // set when an unseen condition hit a uniform fallback

  int positions() const { return static_cast<int>(probs.size()); }

  void validate(double tol = 1e-9) const;
};

/// Uniform denoiser contract: predict the noiseless token distribution for
/// every position of x_t. Prediction is pure given parameters.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual DenoiserOutput predict(const TokenSequence& x_t, int t, Condition cond) const = 0;

  /// Joint-mode denoisers draw a full candidate x0 sequence from their exact
  /// posterior; factorized denoisers decline.
  virtual std::optional<TokenSequence> sample_joint_x0(const TokenSequence& x_t, int t,
                                                       Condition cond,
                                                       std::mt19937_64& rng) const {
    (void)x_t;
    (void)t;
    (void)cond;
    (void)rng;
    return std::nullopt;
  }
};

/// Trainable stand-in model: logits indexed by
/// [condition][timestep][current token (incl. mask)][predicted token in 0..K-1].
/// Conditions on (t, current token) per position, ignoring cross-position
/// context.
class TabularDenoiser : public Denoiser {
 public:
  TabularDenoiser(int num_conditions, int T, int total_categories, int K, double learning_rate);

  DenoiserOutput predict(const TokenSequence& x_t, int t, Condition cond) const override;

  /// logits <- logits - lr * grad; rejects non-finite gradients.
  void apply_gradient(const std::vector<double>& grad);

  std::size_t parameter_count() const { return logits_.size(); }
  double learning_rate() const { return lr_; }
  int num_conditions() const { return num_conds_; }
  int T() const { return T_; }
  int total_categories() const { return total_; }
  int K() const { return K_; }

  double& logit(int cond, int t, int token, int k) { return logits_[index(cond, t, token, k)]; }
  double logit(int cond, int t, int token, int k) const {
    return logits_[index(cond, t, token, k)];
  }
  std::size_t index(int cond, int t, int token, int k) const;

  const std::vector<double>& parameters() const { return logits_; }

  nlohmann::json to_json() const;
  static TabularDenoiser from_json(const nlohmann::json& j);

 private:
  int num_conds_;
  int T_;
  int total_;
  int K_;
  double lr_;
  std::vector<double> logits_;
};

/// Exact Bayes denoiser over an enumerable weighted dataset. The posterior
/// over dataset sequences is proportional to prior weight times the product
/// of closed-form per-position likelihoods.
class OracleDenoiser : public Denoiser {
 public:
  struct Entry {
    Condition cond;
    TokenSequence tokens;
    double weight = 1.0;
  };

  OracleDenoiser(const TransitionModel& model, std::vector<Entry> dataset, bool joint_mode,
                 long long enumeration_cap = 4096);

  /// Posterior weights over the dataset entries matching cond.
  std::vector<double> posterior_weights(const TokenSequence& x_t, int t, Condition cond) const;

  DenoiserOutput predict(const TokenSequence& x_t, int t, Condition cond) const override;

  std::optional<TokenSequence> sample_joint_x0(const TokenSequence& x_t, int t, Condition cond,
                                               std::mt19937_64& rng) const override;

  const std::vector<Entry>& dataset() const { return dataset_; }
  bool joint_mode() const { return joint_mode_; }

 private:
  std::vector<const Entry*> entries_for(Condition cond) const;

  const TransitionModel* model_;
  std::vector<Entry> dataset_;
  bool joint_mode_;
};

}  // namespace catdiff
