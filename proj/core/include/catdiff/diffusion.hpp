#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "catdiff/denoiser.hpp"
#include "catdiff/transition.hpp"
#include "catdiff/types.hpp"

namespace catdiff {

/// Loss decomposition: total = lambda * aux + vlb.
struct LossReport {
  double vlb = 0.0;
  double aux = 0.0;
  double total = 0.0;
  double lambda = 0.0;
};

/// Mean negative log-likelihood of the true tokens under the denoiser output.
/// A zero probability at a true token raises the `infinite` flag instead of
/// silently returning infinity.
struct AuxLoss {
  double value = 0.0;
  bool infinite = false;
};

constexpr double kDefaultLossWeight = 1e-4;

struct VlbOptions {
  long long enumeration_cap = 4096;  // max total_categories^N for exact evaluation
  bool monte_carlo = false;          // opt-in fallback beyond the cap
  int mc_samples = 64;
  std::uint64_t seed = 0;
};

/// Samples each position independently from q(x_t | x0); deterministic given
/// the rng state.
TokenSequence forward_sample(const TransitionModel& model, const TokenSequence& x0, int t,
                             std::mt19937_64& rng);

/// Bayes posterior q(x_{t-1} | x_t, x0) over total_categories.
Categorical posterior(const TransitionModel& model, int x_t, int x0, int t);

/// Strided posterior q(x_{t-stride} | x_t, x0_hat), composing the stride-step
/// transition analytically from cumulative parameters at both endpoints.
Categorical strided_posterior(const TransitionModel& model, int x_t, int x0_hat, int t,
                              int stride);

/// Reparameterized reverse step: per position, the mixture over x0_hat of the
/// strided posterior weighted by the denoiser output. Mixture components with
/// zero evidence q(x_t | x0_hat) are skipped and the rest renormalized.
std::vector<Categorical> reverse_step(const TransitionModel& model,
                                      const DenoiserOutput& denoiser_output,
                                      const TokenSequence& x_t, int t, int stride);

/// Full variational bound: sum over t = 1..T-1 of the expected posterior KL
/// under q(x_t | x0), plus the prior term at t = T. Exact enumeration within
/// the cap, Monte Carlo on opt-in beyond it.
double vlb_loss(const TransitionModel& model, const Denoiser& denoiser, const TokenSequence& x0,
                Condition cond, const VlbOptions& options = {});

AuxLoss aux_loss(const DenoiserOutput& denoiser_output, const TokenSequence& x0);

LossReport total_loss(double vlb, double aux, double lambda = kDefaultLossWeight);

/// Sampled-t training loss at one (x_t, t): per-position posterior KL against
/// the stride-1 reverse step, the closed-form prior term, and the auxiliary
/// loss.
struct TrainingLoss {
  double kl = 0.0;     // sum over positions of KL(q(x_{t-1}|x_t,x0) || p(x_{t-1}|x_t,y))
  double prior = 0.0;  // KL(q(x_T|x0) || p(x_T)), constant in the parameters
  AuxLoss aux;

  double vlb_estimate() const { return kl + prior; }
};

TrainingLoss training_loss(const TransitionModel& model, const Denoiser& denoiser,
                           const TokenSequence& x0, const TokenSequence& x_t, int t,
                           Condition cond);

/// Analytic gradient of kl + lambda * aux w.r.t. the tabular logits,
/// full-shape tensor.
std::vector<double> training_gradient(const TransitionModel& model, const TabularDenoiser& den,
                                      const TokenSequence& x0, const TokenSequence& x_t, int t,
                                      Condition cond, double lambda);

struct EpochStats {
  double mean_vlb = 0.0;
  double mean_aux = 0.0;
  double mean_total = 0.0;
};

/// One-update-per-example training loop: sample t uniformly in 1..T, corrupt
/// x0 forward, evaluate the sampled-t loss, apply one gradient-descent step.
/// Aborts with the trace so far if the loss turns non-finite.
std::vector<EpochStats> train(const TransitionModel& model, TabularDenoiser& denoiser,
                              const std::vector<std::pair<Condition, TokenSequence>>& dataset,
                              int epochs, std::mt19937_64& rng,
                              double lambda = kDefaultLossWeight);

/// Reverse generation: start from the stationary distribution and iterate
/// strided reverse steps; the final stride is shortened so the chain lands
/// exactly at t = 0. Output is mask-free.
TokenSequence infer(const TransitionModel& model, const Denoiser& denoiser, Condition cond,
                    int length, int stride, std::mt19937_64& rng);

/// Timestep visit order of infer for a given T and stride (T, T-stride, ...,
/// 0 with the last step shortened).
std::vector<int> stride_schedule(int T, int stride);

int sample_categorical(const Categorical& c, std::mt19937_64& rng);

}  // namespace catdiff
