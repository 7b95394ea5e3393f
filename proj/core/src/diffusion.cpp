#include "catdiff/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace catdiff {

int sample_categorical(const Categorical& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  const int n = c.size();
  for (int i = 0; i < n; ++i) {
    acc += c.probs[i];
    if (u < acc) return i;
  }
  // Round-off at the tail; return the last positive entry.
  for (int i = n - 1; i >= 0; --i) {
    if (c.probs[i] > 0.0) return i;
  }
  throw std::domain_error("sample_categorical: zero-mass distribution");
}

TokenSequence forward_sample(const TransitionModel& model, const TokenSequence& x0, int t,
                             std::mt19937_64& rng) {
  if (t < 0 || t > model.T()) throw std::invalid_argument("forward_sample: t out of range");
  TokenSequence x_t;
  x_t.reserve(x0.size());
  for (int tok : x0) {
    x_t.push_back(sample_categorical(model.cumulative_distribution(tok, t), rng));
  }
  return x_t;
}

Categorical strided_posterior(const TransitionModel& model, int x_t, int x0_hat, int t,
                              int stride) {
  if (stride < 1) throw std::invalid_argument("strided_posterior: stride must be >= 1");
  const int s = t - stride;
  if (s < 0) throw std::invalid_argument("strided_posterior: stride overshoots below 0");
  if (t > model.T() || t < 1) throw std::invalid_argument("strided_posterior: t out of range");
  if (x_t < 0 || x_t >= model.total_categories()) {
    throw std::invalid_argument("strided_posterior: x_t out of range");
  }

  const PerStepParams jump = model.composite_params(s, t);
  Categorical c;
  c.probs.assign(model.total_categories(), 0.0);
  double total = 0.0;
  for (int k = 0; k < model.total_categories(); ++k) {
    const double prior = model.cumulative_prob(x0_hat, k, s);
    if (prior <= 0.0) continue;
    const double v = model.jump_prob(k, x_t, jump) * prior;
    c.probs[k] = v;
    total += v;
  }
  if (total <= 0.0) {
    throw std::domain_error("strided_posterior: zero-probability evidence q(x_t | x0) = 0");
  }
  for (double& p : c.probs) p /= total;
  return c;
}

Categorical posterior(const TransitionModel& model, int x_t, int x0, int t) {
  return strided_posterior(model, x_t, x0, t, 1);
}

std::vector<Categorical> reverse_step(const TransitionModel& model,
                                      const DenoiserOutput& denoiser_output,
                                      const TokenSequence& x_t, int t, int stride) {
  if (denoiser_output.positions() != static_cast<int>(x_t.size())) {
    throw std::invalid_argument("reverse_step: denoiser output / sequence length mismatch");
  }
  const int total = model.total_categories();
  const int K = model.K();

  // Strided posterior columns depend only on the current token value; cache
  // them per distinct token.
  struct TokenMix {
    bool ready = false;
    std::vector<std::vector<double>> columns;  // K columns of length total (empty if invalid)
    std::vector<bool> valid;
  };
  std::vector<TokenMix> cache(total);

  std::vector<Categorical> out;
  out.reserve(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const int token = x_t[i];
    if (token < 0 || token >= total) {
      throw std::invalid_argument("reverse_step: token out of range");
    }
    TokenMix& mix = cache[token];
    if (!mix.ready) {
      mix.columns.assign(K, {});
      mix.valid.assign(K, false);
      for (int j = 0; j < K; ++j) {
        if (model.cumulative_prob(j, token, t) <= 0.0) continue;
        mix.columns[j] = strided_posterior(model, token, j, t, stride).probs;
        mix.valid[j] = true;
      }
      mix.ready = true;
    }
    Categorical c;
    c.probs.assign(total, 0.0);
    double weight = 0.0;
    const auto& row = denoiser_output.probs[i];
    for (int j = 0; j < K; ++j) {
      const double w = row[j];
      if (!mix.valid[j] || w <= 0.0) continue;
      weight += w;
      const auto& col = mix.columns[j];
      for (int k = 0; k < total; ++k) c.probs[k] += w * col[k];
    }
    if (weight <= 0.0) {
      throw std::domain_error("reverse_step: denoiser output inconsistent with x_t");
    }
    for (double& p : c.probs) p /= weight;
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

/// Per-position KL between the true posterior and the reverse-step output for
/// a concrete x_t.
double posterior_kl_sum(const TransitionModel& model, const Denoiser& denoiser,
                        const TokenSequence& x0, const TokenSequence& x_t, int t,
                        Condition cond) {
  const DenoiserOutput out = denoiser.predict(x_t, t, cond);
  const auto p = reverse_step(model, out, x_t, t, 1);
  double kl = 0.0;
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const Categorical q = posterior(model, x_t[i], x0[i], t);
    kl += kl_divergence(q.probs, p[i].probs);
  }
  return kl;
}

double prior_kl(const TransitionModel& model, const TokenSequence& x0) {
  const Categorical stat = model.stationary_distribution();
  double kl = 0.0;
  for (int tok : x0) {
    kl += kl_divergence(model.cumulative_distribution(tok, model.T()).probs, stat.probs);
  }
  return kl;
}

}  // namespace

double vlb_loss(const TransitionModel& model, const Denoiser& denoiser, const TokenSequence& x0,
                Condition cond, const VlbOptions& options) {
  const int total = model.total_categories();
  const int n = static_cast<int>(x0.size());
  if (n == 0) throw std::invalid_argument("vlb_loss: empty sequence");

  double joint_states = 1.0;
  for (int i = 0; i < n; ++i) joint_states *= total;
  const bool exact = joint_states <= static_cast<double>(options.enumeration_cap);
  if (!exact && !options.monte_carlo) {
    throw std::invalid_argument("vlb_loss: enumeration cap exceeded without Monte Carlo opt-in");
  }

  double loss = 0.0;
  if (exact) {
    TokenSequence x_t(n, 0);
    for (int t = 1; t <= model.T() - 1; ++t) {
      std::fill(x_t.begin(), x_t.end(), 0);
      while (true) {
        double weight = 1.0;
        for (int i = 0; i < n && weight > 0.0; ++i) {
          weight *= model.cumulative_prob(x0[i], x_t[i], t);
        }
        if (weight > 0.0) {
          loss += weight * posterior_kl_sum(model, denoiser, x0, x_t, t, cond);
        }
        int pos = 0;
        while (pos < n && ++x_t[pos] == total) x_t[pos++] = 0;
        if (pos == n) break;
      }
    }
  } else {
    std::mt19937_64 rng(options.seed);
    for (int t = 1; t <= model.T() - 1; ++t) {
      double acc = 0.0;
      for (int s = 0; s < options.mc_samples; ++s) {
        const TokenSequence x_t = forward_sample(model, x0, t, rng);
        acc += posterior_kl_sum(model, denoiser, x0, x_t, t, cond);
      }
      loss += acc / options.mc_samples;
    }
  }
  return loss + prior_kl(model, x0);
}

AuxLoss aux_loss(const DenoiserOutput& denoiser_output, const TokenSequence& x0) {
  if (denoiser_output.positions() != static_cast<int>(x0.size())) {
    throw std::invalid_argument("aux_loss: shape mismatch");
  }
  if (x0.empty()) throw std::invalid_argument("aux_loss: empty sequence");
  AuxLoss result;
  double acc = 0.0;
  for (std::size_t i = 0; i < x0.size(); ++i) {
    const auto& row = denoiser_output.probs[i];
    if (x0[i] < 0 || x0[i] >= static_cast<int>(row.size())) {
      throw std::invalid_argument("aux_loss: token out of denoiser range");
    }
    const double p = row[x0[i]];
    if (p <= 0.0) {
      result.infinite = true;
    } else {
      acc -= std::log(p);
    }
  }
  result.value = result.infinite ? std::numeric_limits<double>::infinity()
                                 : acc / static_cast<double>(x0.size());
  return result;
}

LossReport total_loss(double vlb, double aux, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("total_loss: lambda must be nonnegative");
  LossReport r;
  r.vlb = vlb;
  r.aux = aux;
  r.lambda = lambda;
  r.total = lambda * aux + vlb;
  return r;
}

TrainingLoss training_loss(const TransitionModel& model, const Denoiser& denoiser,
                           const TokenSequence& x0, const TokenSequence& x_t, int t,
                           Condition cond) {
  TrainingLoss loss;
  loss.kl = posterior_kl_sum(model, denoiser, x0, x_t, t, cond);
  loss.prior = prior_kl(model, x0);
  loss.aux = aux_loss(denoiser.predict(x_t, t, cond), x0);
  return loss;
}

std::vector<double> training_gradient(const TransitionModel& model, const TabularDenoiser& den,
                                      const TokenSequence& x0, const TokenSequence& x_t, int t,
                                      Condition cond, double lambda) {
  const int total = model.total_categories();
  const int K = model.K();
  const int n = static_cast<int>(x_t.size());
  std::vector<double> grad(den.parameter_count(), 0.0);
  const DenoiserOutput out = den.predict(x_t, t, cond);
  if (out.fallback) return grad;  // unseen condition: no addressed parameters

  for (int i = 0; i < n; ++i) {
    const int token = x_t[i];
    const auto& s = out.probs[i];

    // Mixture columns and validity for this token.
    std::vector<std::vector<double>> cols(K);
    std::vector<bool> valid(K, false);
    double weight = 0.0;
    for (int j = 0; j < K; ++j) {
      if (model.cumulative_prob(j, token, t) <= 0.0) continue;
      cols[j] = strided_posterior(model, token, j, t, 1).probs;
      valid[j] = true;
      weight += s[j];
    }
    if (weight <= 0.0) {
      throw std::domain_error("training_gradient: denoiser output inconsistent with x_t");
    }
    std::vector<double> p(total, 0.0);
    for (int j = 0; j < K; ++j) {
      if (!valid[j]) continue;
      for (int k = 0; k < total; ++k) p[k] += s[j] * cols[j][k];
    }
    for (double& v : p) v /= weight;

    const Categorical q = posterior(model, token, x0[i], t);

    // d KL / d s[j], quotient rule through the renormalized mixture.
    std::vector<double> ds(K, 0.0);
    for (int j = 0; j < K; ++j) {
      if (!valid[j]) continue;
      double dot = 0.0;
      for (int k = 0; k < total; ++k) {
        if (q.probs[k] <= 0.0 || p[k] <= 0.0) continue;
        dot += q.probs[k] * cols[j][k] / p[k];
      }
      ds[j] = (1.0 - dot) / weight;
    }
    // Auxiliary term, mean over positions.
    if (s[x0[i]] > 0.0) {
      ds[x0[i]] -= lambda / (n * s[x0[i]]);
    }

    // Chain through the softmax of the addressed logit row.
    double inner = 0.0;
    for (int j = 0; j < K; ++j) inner += ds[j] * s[j];
    const std::size_t base = den.index(cond.id, t, token, 0);
    for (int a = 0; a < K; ++a) {
      grad[base + a] += s[a] * (ds[a] - inner);
    }
  }
  return grad;
}

std::vector<EpochStats> train(const TransitionModel& model, TabularDenoiser& denoiser,
                              const std::vector<std::pair<Condition, TokenSequence>>& dataset,
                              int epochs, std::mt19937_64& rng, double lambda) {
  if (dataset.empty()) throw std::invalid_argument("train: empty dataset");
  for (const auto& [cond, seq] : dataset) {
    (void)cond;
    for (int tok : seq) {
      if (tok < 0 || tok >= model.K()) {
        throw std::invalid_argument("train: dataset sequences must be mask-free");
      }
    }
  }
  std::uniform_int_distribution<int> pick_t(1, model.T());
  std::vector<EpochStats> trace;
  trace.reserve(epochs);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    EpochStats stats;
    for (const auto& [cond, x0] : dataset) {
      const int t = pick_t(rng);
      const TokenSequence x_t = forward_sample(model, x0, t, rng);
      const TrainingLoss loss = training_loss(model, denoiser, x0, x_t, t, cond);
      const LossReport report = total_loss(loss.vlb_estimate(), loss.aux.value, lambda);
      if (!std::isfinite(report.total)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      denoiser.apply_gradient(training_gradient(model, denoiser, x0, x_t, t, cond, lambda));
      stats.mean_vlb += report.vlb;
      stats.mean_aux += report.aux;
      stats.mean_total += report.total;
    }
    const double m = static_cast<double>(dataset.size());
    stats.mean_vlb /= m;
    stats.mean_aux /= m;
    stats.mean_total /= m;
    trace.push_back(stats);
  }
  return trace;
}

std::vector<int> stride_schedule(int T, int stride) {
  if (stride < 1) throw std::invalid_argument("stride_schedule: stride must be >= 1");
  std::vector<int> ts{T};
  int t = T;
  while (t > 0) {
    t -= std::min(stride, t);  // last step shortened to land exactly at 0
    ts.push_back(t);
  }
  return ts;
}

TokenSequence infer(const TransitionModel& model, const Denoiser& denoiser, Condition cond,
                    int length, int stride, std::mt19937_64& rng) {
  if (length < 1) throw std::invalid_argument("infer: length must be >= 1");
  const Categorical stationary = model.stationary_distribution();
  TokenSequence x(length);
  for (int i = 0; i < length; ++i) x[i] = sample_categorical(stationary, rng);

  const auto ts = stride_schedule(model.T(), stride);
  for (std::size_t step = 0; step + 1 < ts.size(); ++step) {
    const int t = ts[step];
    const int delta = t - ts[step + 1];
    if (auto x0_hat = denoiser.sample_joint_x0(x, t, cond, rng)) {
      for (int i = 0; i < length; ++i) {
        x[i] = sample_categorical(strided_posterior(model, x[i], (*x0_hat)[i], t, delta), rng);
      }
    } else {
      const auto rows = reverse_step(model, denoiser.predict(x, t, cond), x, t, delta);
      for (int i = 0; i < length; ++i) x[i] = sample_categorical(rows[i], rng);
    }
  }
  for (int tok : x) {
    if (model.has_mask() && tok == model.mask_token()) {
      throw std::logic_error("infer: output contains a mask token");
    }
  }
  return x;
}

}  // namespace catdiff
