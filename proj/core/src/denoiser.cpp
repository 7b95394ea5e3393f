#include "catdiff/denoiser.hpp"

#include <algorithm>
#include <cmath>

namespace catdiff {

void DenoiserOutput::validate(double tol) const {
  for (const auto& row : probs) {
    double s = 0.0;
    for (double p : row) {
      if (!(p >= -tol) || !std::isfinite(p)) {
        throw std::invalid_argument("DenoiserOutput: negative or non-finite entry");
      }
      s += p;
    }
    if (std::abs(s - 1.0) > tol) {
      throw std::invalid_argument("DenoiserOutput: row does not sum to 1");
    }
  }
}

TabularDenoiser::TabularDenoiser(int num_conditions, int T, int total_categories, int K,
                                 double learning_rate)
    : num_conds_(num_conditions), T_(T), total_(total_categories), K_(K), lr_(learning_rate) {
  if (num_conditions < 1 || T < 1 || total_categories < 2 || K < 2 || K > total_categories) {
    throw std::invalid_argument("TabularDenoiser: bad shape");
  }
  if (!(learning_rate >= 0.0)) {
    throw std::invalid_argument("TabularDenoiser: learning rate must be nonnegative");
  }
  logits_.assign(static_cast<std::size_t>(num_conds_) * (T_ + 1) * total_ * K_, 0.0);
}

std::size_t TabularDenoiser::index(int cond, int t, int token, int k) const {
  return ((static_cast<std::size_t>(cond) * (T_ + 1) + t) * total_ + token) * K_ + k;
}

DenoiserOutput TabularDenoiser::predict(const TokenSequence& x_t, int t, Condition cond) const {
  if (t < 0 || t > T_) throw std::invalid_argument("TabularDenoiser::predict: t out of range");
  DenoiserOutput out;
  out.probs.reserve(x_t.size());
  const bool known = cond.id >= 0 && cond.id < num_conds_;
  out.fallback = !known;
  for (int token : x_t) {
    if (token < 0 || token >= total_) {
      throw std::invalid_argument("TabularDenoiser::predict: token out of range");
    }
    std::vector<double> row(K_, 1.0 / K_);
    if (known) {
      const std::size_t base = index(cond.id, t, token, 0);
      double max_logit = logits_[base];
      for (int k = 1; k < K_; ++k) max_logit = std::max(max_logit, logits_[base + k]);
      double z = 0.0;
      for (int k = 0; k < K_; ++k) {
        row[k] = std::exp(logits_[base + k] - max_logit);
        z += row[k];
      }
      for (int k = 0; k < K_; ++k) row[k] /= z;
    }
    out.probs.push_back(std::move(row));
  }
  return out;
}

void TabularDenoiser::apply_gradient(const std::vector<double>& grad) {
  if (grad.size() != logits_.size()) {
    throw std::invalid_argument("apply_gradient: shape mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw std::invalid_argument("apply_gradient: non-finite gradient");
  }
  for (std::size_t i = 0; i < logits_.size(); ++i) logits_[i] -= lr_ * grad[i];
}

nlohmann::json TabularDenoiser::to_json() const {
  return nlohmann::json{{"shape",
                         {{"num_conditions", num_conds_},
                          {"T", T_},
                          {"total_categories", total_},
                          {"K", K_}}},
                        {"learning_rate", lr_},
                        {"logits", logits_}};
}

TabularDenoiser TabularDenoiser::from_json(const nlohmann::json& j) {
  const auto& shape = j.at("shape");
  TabularDenoiser den(shape.at("num_conditions").get<int>(), shape.at("T").get<int>(),
                      shape.at("total_categories").get<int>(), shape.at("K").get<int>(),
                      j.at("learning_rate").get<double>());
  auto logits = j.at("logits").get<std::vector<double>>();
  if (logits.size() != den.logits_.size()) {
    throw std::invalid_argument("TabularDenoiser::from_json: logit count mismatch");
  }
  den.logits_ = std::move(logits);
  return den;
}

OracleDenoiser::OracleDenoiser(const TransitionModel& model, std::vector<Entry> dataset,
                               bool joint_mode, long long enumeration_cap)
    : model_(&model), dataset_(std::move(dataset)), joint_mode_(joint_mode) {
  if (dataset_.empty()) throw std::invalid_argument("OracleDenoiser: empty dataset");
  long long cells = 0;
  for (const auto& e : dataset_) {
    cells += static_cast<long long>(e.tokens.size());
    for (int tok : e.tokens) {
      if (tok < 0 || tok >= model_->K()) {
        throw std::invalid_argument("OracleDenoiser: dataset sequences must be mask-free");
      }
    }
  }
  if (cells > enumeration_cap) {
    throw std::invalid_argument("OracleDenoiser: enumeration cap exceeded");
  }
}

std::vector<const OracleDenoiser::Entry*> OracleDenoiser::entries_for(Condition cond) const {
  std::vector<const Entry*> out;
  for (const auto& e : dataset_) {
    if (e.cond.id == cond.id) out.push_back(&e);
  }
  if (out.empty()) throw std::invalid_argument("OracleDenoiser: unknown condition");
  return out;
}

std::vector<double> OracleDenoiser::posterior_weights(const TokenSequence& x_t, int t,
                                                      Condition cond) const {
  const auto entries = entries_for(cond);
  std::vector<double> w(entries.size(), 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < entries.size(); ++s) {
    const auto& e = *entries[s];
    if (e.tokens.size() != x_t.size()) {
      throw std::invalid_argument("OracleDenoiser: sequence length mismatch");
    }
    double like = e.weight;
    for (std::size_t i = 0; i < x_t.size() && like > 0.0; ++i) {
      like *= model_->cumulative_prob(e.tokens[i], x_t[i], t);
    }
    w[s] = like;
    total += like;
  }
  if (total <= 0.0) {
    throw std::domain_error("OracleDenoiser: x_t inconsistent with every dataset sequence");
  }
  for (double& v : w) v /= total;
  return w;
}

DenoiserOutput OracleDenoiser::predict(const TokenSequence& x_t, int t, Condition cond) const {
  const auto entries = entries_for(cond);
  const auto w = posterior_weights(x_t, t, cond);
  DenoiserOutput out;
  out.probs.assign(x_t.size(), std::vector<double>(model_->K(), 0.0));
  for (std::size_t s = 0; s < entries.size(); ++s) {
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      out.probs[i][entries[s]->tokens[i]] += w[s];
    }
  }
  return out;
}

std::optional<TokenSequence> OracleDenoiser::sample_joint_x0(const TokenSequence& x_t, int t,
                                                             Condition cond,
                                                             std::mt19937_64& rng) const {
  if (!joint_mode_) return std::nullopt;
  const auto entries = entries_for(cond);
  const auto w = posterior_weights(x_t, t, cond);
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  return entries[pick(rng)]->tokens;
}

}  // namespace catdiff
