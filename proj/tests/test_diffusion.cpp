#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <random>

#include "catdiff/denoiser.hpp"
#include "catdiff/diffusion.hpp"
#include "catdiff/schedule.hpp"
#include "catdiff/transition.hpp"

using namespace catdiff;

namespace {

ScheduleTargets saturating_targets(MatrixKind kind) {
  switch (kind) {
    case MatrixKind::Uniform: return {0.0, 0.0};
    case MatrixKind::Mask: return {0.0, 1.0};
    case MatrixKind::MaskUniform: return {0.0, 0.9};
  }
  return {};
}

TransitionModel make_model(MatrixKind kind, int K, int T) {
  return TransitionModel(build_linear_schedule(kind, K, T, saturating_targets(kind)));
}

/// Denoiser that returns a fixed output regardless of input.
class FixedDenoiser : public Denoiser {
 public:
  explicit FixedDenoiser(std::vector<double> row) : row_(std::move(row)) {}

  DenoiserOutput predict(const TokenSequence& x_t, int, Condition) const override {
    DenoiserOutput out;
    out.probs.assign(x_t.size(), row_);
    return out;
  }

 private:
  std::vector<double> row_;
};

/// Denoiser returning the exact single-token posterior over x0 for a known x0;
/// makes the reverse step equal to the true posterior.
class PosteriorPerfectDenoiser : public Denoiser {
 public:
  PosteriorPerfectDenoiser(const TransitionModel& model, TokenSequence x0)
      : model_(&model), x0_(std::move(x0)) {}

  DenoiserOutput predict(const TokenSequence& x_t, int t, Condition) const override {
    DenoiserOutput out;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      std::vector<double> row(model_->K(), 0.0);
      if (t == 0) {
        row[x_t[i]] = 1.0;
      } else {
        row[x0_[i]] = 1.0;
      }
      out.probs.push_back(std::move(row));
    }
    return out;
  }

 private:
  const TransitionModel* model_;
  TokenSequence x0_;
};

}  // namespace

TEST_CASE("forward_sample boundary behavior") {
  std::mt19937_64 rng(11);
  SUBCASE("t = 0 is the identity") {
    const auto m = make_model(MatrixKind::MaskUniform, 4, 8);
    const TokenSequence x0{0, 3, 2, 1};
    CHECK(forward_sample(m, x0, 0, rng) == x0);
  }
  SUBCASE("mask kind at saturation masks everything") {
    const auto m = make_model(MatrixKind::Mask, 4, 8);
    const TokenSequence x0{0, 3, 2, 1};
    const auto x_T = forward_sample(m, x0, 8, rng);
    for (int tok : x_T) CHECK(tok == m.mask_token());
  }
  SUBCASE("determinism under a fixed seed") {
    const auto m = make_model(MatrixKind::Uniform, 5, 10);
    std::mt19937_64 a(42), b(42);
    CHECK(forward_sample(m, {1, 2, 3}, 5, a) == forward_sample(m, {1, 2, 3}, 5, b));
  }
}

TEST_CASE("forward_sample empirical histogram matches the closed form") {
  const auto m = make_model(MatrixKind::Uniform, 4, 10);
  std::mt19937_64 rng(3);
  const int t = 5;
  const int draws = 100000;
  std::vector<double> hist(4, 0.0);
  for (int i = 0; i < draws; ++i) hist[forward_sample(m, {2}, t, rng)[0]] += 1.0 / draws;
  const auto want = m.cumulative_distribution(2, t);
  CHECK(total_variation(hist, want.probs) < 0.01);
}

TEST_CASE("posterior at t = 1 is a point mass on x0") {
  for (const auto kind : {MatrixKind::Uniform, MatrixKind::Mask, MatrixKind::MaskUniform}) {
    const auto m = make_model(kind, 4, 6);
    for (int x0 = 0; x0 < 4; ++x0) {
      // Pick an x_t reachable from x0 at t = 1.
      const auto q1 = m.cumulative_distribution(x0, 1);
      for (int x_t = 0; x_t < m.total_categories(); ++x_t) {
        if (q1.probs[x_t] <= 0.0) continue;
        const auto post = posterior(m, x_t, x0, 1);
        CHECK(post.probs[x0] == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("posterior satisfies the Bayes product identity elementwise") {
  std::mt19937_64 rng(5);
  for (const auto kind : {MatrixKind::Uniform, MatrixKind::Mask, MatrixKind::MaskUniform}) {
    const auto m = make_model(kind, 6, 9);
    for (int rep = 0; rep < 200; ++rep) {
      const int t = 1 + static_cast<int>(rng() % 9);
      const int x0 = static_cast<int>(rng() % 6);
      const auto evidence = m.cumulative_distribution(x0, t);
      const int x_t = sample_categorical(evidence, rng);
      const auto post = posterior(m, x_t, x0, t);
      CHECK(std::abs(post.sum() - 1.0) < 1e-10);
      for (int k = 0; k < m.total_categories(); ++k) {
        const double lhs = post.probs[k] * evidence.probs[x_t];
        const double rhs =
            m.step_distribution(k, t).probs[x_t] * m.cumulative_distribution(x0, t - 1).probs[k];
        CHECK(std::abs(lhs - rhs) < 1e-10);
      }
    }
  }
}

TEST_CASE("posterior mass split for a masked observation") {
  // Mask kind, x_t = mask: mass splits between x0 and mask with ratio
  // beta_bar_{t-1} * gamma_t : gamma_bar_{t-1}.
  const auto m = make_model(MatrixKind::Mask, 5, 8);
  const auto& s = m.schedule();
  for (int t = 2; t <= 7; ++t) {
    const auto p = per_step_params(s, t);
    const auto post = posterior(m, m.mask_token(), 3, t);
    const double want_ratio = s.beta_bar[t - 1] * p.gamma / s.gamma_bar[t - 1];
    CHECK(post.probs[3] / post.probs[m.mask_token()] ==
          doctest::Approx(want_ratio).epsilon(1e-10));
    for (int k = 0; k < 5; ++k) {
      if (k != 3) CHECK(post.probs[k] == 0.0);
    }
  }
}

TEST_CASE("posterior rejects zero-probability evidence") {
  const auto m = make_model(MatrixKind::Mask, 4, 6);
  // Under the mask kind, x_t = 2 is unreachable from x0 = 0.
  CHECK_THROWS_AS(posterior(m, 2, 0, 3), std::domain_error);
}

TEST_CASE("strided posterior against a dense brute-force chain") {
  for (const auto kind : {MatrixKind::Uniform, MatrixKind::Mask, MatrixKind::MaskUniform}) {
    const auto m = make_model(kind, 5, 12);
    const int total = m.total_categories();
    for (const int stride : {1, 3, 5, 12}) {
      for (int t = stride; t <= 12; t += 3) {
        const int s = t - stride;
        Eigen::MatrixXd window = Eigen::MatrixXd::Identity(total, total);
        for (int u = s + 1; u <= t; ++u) window = m.dense_matrix(u) * window;
        for (int x0 = 0; x0 < 5; ++x0) {
          const auto prior = m.cumulative_distribution(x0, s);
          for (int x_t = 0; x_t < total; ++x_t) {
            double evidence = 0.0;
            std::vector<double> want(total, 0.0);
            for (int k = 0; k < total; ++k) {
              want[k] = window(x_t, k) * prior.probs[k];
              evidence += want[k];
            }
            if (evidence <= 0.0) {
              CHECK_THROWS_AS(strided_posterior(m, x_t, x0, t, stride), std::domain_error);
              continue;
            }
            for (double& w : want) w /= evidence;
            const auto got = strided_posterior(m, x_t, x0, t, stride);
            for (int k = 0; k < total; ++k) CHECK(std::abs(got.probs[k] - want[k]) < 1e-10);
          }
        }
      }
    }
  }
}

TEST_CASE("reverse_step degenerate and oracle cases") {
  const auto m = make_model(MatrixKind::MaskUniform, 5, 10);
  SUBCASE("stride t jumps to the denoiser output embedded over non-mask tokens") {
    DenoiserOutput out;
    out.probs = {{0.1, 0.2, 0.3, 0.25, 0.15}};
    const int t = 7;
    const auto rows = reverse_step(m, out, {m.mask_token()}, t, t);
    for (int k = 0; k < 5; ++k) {
      CHECK(rows[0].probs[k] == doctest::Approx(out.probs[0][k]).epsilon(1e-10));
    }
    CHECK(rows[0].probs[m.mask_token()] == 0.0);
  }
  SUBCASE("one-hot output reproduces the exact posterior") {
    const int x0 = 2;
    DenoiserOutput out;
    out.probs = {{0.0, 0.0, 1.0, 0.0, 0.0}};
    for (int t = 1; t <= 10; ++t) {
      const auto evidence = m.cumulative_distribution(x0, t);
      for (int x_t = 0; x_t < m.total_categories(); ++x_t) {
        if (evidence.probs[x_t] <= 0.0) continue;
        const auto rows = reverse_step(m, out, {x_t}, t, 1);
        const auto want = posterior(m, x_t, x0, t);
        for (int k = 0; k < m.total_categories(); ++k) {
          CHECK(rows[0].probs[k] == doctest::Approx(want.probs[k]).epsilon(1e-12));
        }
      }
    }
  }
  SUBCASE("random output matches a brute-force mixture") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> unif(0.01, 1.0);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> row(5);
      double z = 0.0;
      for (double& v : row) z += (v = unif(rng));
      for (double& v : row) v /= z;
      DenoiserOutput out;
      out.probs = {row};
      const int t = 2 + static_cast<int>(rng() % 8);
      const int stride = 1 + static_cast<int>(rng() % t);
      const int x_t = static_cast<int>(rng() % m.total_categories());
      std::vector<double> want(m.total_categories(), 0.0);
      double weight = 0.0;
      for (int j = 0; j < 5; ++j) {
        if (m.cumulative_prob(j, x_t, t) <= 0.0) continue;
        const auto col = strided_posterior(m, x_t, j, t, stride);
        weight += row[j];
        for (int k = 0; k < m.total_categories(); ++k) want[k] += row[j] * col.probs[k];
      }
      for (double& w : want) w /= weight;
      const auto rows = reverse_step(m, out, {x_t}, t, stride);
      for (int k = 0; k < m.total_categories(); ++k) {
        CHECK(std::abs(rows[0].probs[k] - want[k]) < 1e-10);
      }
      CHECK(std::abs(rows[0].sum() - 1.0) < 1e-9);
    }
  }
  SUBCASE("mixture with a vertex weight of 1 reproduces that vertex") {
    DenoiserOutput out;
    out.probs = {{0.0, 1.0, 0.0, 0.0, 0.0}};
    const auto rows = reverse_step(m, out, {1}, 4, 2);
    const auto vertex = strided_posterior(m, 1, 1, 4, 2);
    for (int k = 0; k < m.total_categories(); ++k) {
      CHECK(rows[0].probs[k] == doctest::Approx(vertex.probs[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("vlb_loss structure") {
  SUBCASE("posterior-perfect denoiser leaves only the prior term") {
    for (const auto kind : {MatrixKind::Uniform, MatrixKind::Mask, MatrixKind::MaskUniform}) {
      const auto m = make_model(kind, 3, 5);
      const TokenSequence x0{1, 2};
      const PosteriorPerfectDenoiser den(m, x0);
      const double loss = vlb_loss(m, den, x0, {0});
      CHECK(loss >= -1e-9);
      CHECK(loss <= 1e-6);  // saturated schedule: prior term vanishes too
    }
  }
  SUBCASE("uniform-output denoiser equals a hand enumeration on K=3, N=1, T=3") {
    const auto m = make_model(MatrixKind::Uniform, 3, 3);
    const FixedDenoiser den({1.0 / 3, 1.0 / 3, 1.0 / 3});
    const TokenSequence x0{1};
    double want = 0.0;
    for (int t = 1; t <= 2; ++t) {
      const auto q_t = m.cumulative_distribution(x0[0], t);
      for (int x_t = 0; x_t < 3; ++x_t) {
        if (q_t.probs[x_t] <= 0.0) continue;
        const auto q_post = posterior(m, x_t, x0[0], t);
        const auto p = reverse_step(m, den.predict({x_t}, t, {0}), {x_t}, t, 1);
        want += q_t.probs[x_t] * kl_divergence(q_post.probs, p[0].probs);
      }
    }
    want += kl_divergence(m.cumulative_distribution(x0[0], 3).probs,
                          m.stationary_distribution().probs);
    CHECK(vlb_loss(m, den, x0, {0}) == doctest::Approx(want).epsilon(1e-12));
  }
  SUBCASE("enumeration cap enforcement and Monte Carlo opt-in") {
    const auto m = make_model(MatrixKind::Uniform, 4, 4);
    const FixedDenoiser den({0.25, 0.25, 0.25, 0.25});
    const TokenSequence x0(8, 1);  // 4^8 = 65536 > 4096
    CHECK_THROWS_AS(vlb_loss(m, den, x0, {0}), std::invalid_argument);
    VlbOptions opts;
    opts.monte_carlo = true;
    opts.mc_samples = 4;
    CHECK_NOTHROW(vlb_loss(m, den, x0, {0}, opts));
  }
}

TEST_CASE("aux_loss values") {
  SUBCASE("one-hot correct output gives zero") {
    DenoiserOutput out;
    out.probs = {{0.0, 1.0, 0.0}};
    const auto a = aux_loss(out, {1});
    CHECK(a.value == 0.0);
    CHECK_FALSE(a.infinite);
  }
  SUBCASE("uniform output over K=4 gives log 4") {
    DenoiserOutput out;
    out.probs = {{0.25, 0.25, 0.25, 0.25}};
    CHECK(aux_loss(out, {2}).value == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("mixed two-position mean") {
    DenoiserOutput out;
    out.probs = {{0.5, 0.5}, {0.25, 0.75}};
    const double want = (-std::log(0.5) - std::log(0.25)) / 2.0;
    CHECK(aux_loss(out, {0, 0}).value == doctest::Approx(want).epsilon(1e-10));
    CHECK(aux_loss(out, {0, 0}).value == doctest::Approx(1.0397).epsilon(1e-4));
  }
  SUBCASE("zero probability at the true token raises the infinite flag") {
    DenoiserOutput out;
    out.probs = {{0.0, 1.0}};
    const auto a = aux_loss(out, {0});
    CHECK(a.infinite);
    CHECK(std::isinf(a.value));
  }
}

TEST_CASE("total_loss arithmetic") {
  CHECK(total_loss(2.0, 10.0, 0.1).total == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(total_loss(2.0, 10.0, 0.0).total == 2.0);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    const double vlb = unif(rng);
    const double aux = unif(rng);
    const auto r = total_loss(vlb, aux);
    CHECK(r.lambda == kDefaultLossWeight);
    CHECK(std::abs(r.total - (vlb + 1e-4 * aux)) < 1e-12);
  }
  CHECK_THROWS_AS(total_loss(1.0, 1.0, -0.5), std::invalid_argument);
}

TEST_CASE("train basic behaviors") {
  const auto m = make_model(MatrixKind::MaskUniform, 3, 6);
  SUBCASE("loss decreases on a single-sequence dataset") {
    TabularDenoiser den(1, 6, m.total_categories(), 3, 0.5);
    std::mt19937_64 rng(1);
    const auto trace = train(m, den, {{{0}, {1, 2}}}, 200, rng);
    REQUIRE(trace.size() == 200);
    CHECK(trace.back().mean_total < trace.front().mean_total);
  }
  SUBCASE("zero learning rate leaves parameters bit-identical") {
    TabularDenoiser den(1, 6, m.total_categories(), 3, 0.0);
    const auto before = den.parameters();
    std::mt19937_64 rng(1);
    train(m, den, {{{0}, {1, 2}}}, 5, rng);
    CHECK(den.parameters() == before);
  }
  SUBCASE("degenerate K=2 single-token dataset trains to near-certainty") {
    const auto m2 = make_model(MatrixKind::Uniform, 2, 4);
    TabularDenoiser den(1, 4, 2, 2, 1.0);
    std::mt19937_64 rng(9);
    train(m2, den, {{{0}, {1}}}, 3000, rng);
    for (int x_t = 0; x_t < 2; ++x_t) {
      const auto out = den.predict({x_t}, 1, {0});
      CHECK(out.probs[0][1] > 0.99);
    }
  }
  SUBCASE("empty dataset and masked tokens rejected") {
    TabularDenoiser den(1, 6, m.total_categories(), 3, 0.5);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS(train(m, den, {}, 1, rng), std::invalid_argument);
    CHECK_THROWS_AS(train(m, den, {{{0}, {m.mask_token()}}}, 1, rng), std::invalid_argument);
  }
}

TEST_CASE("stride_schedule visits T, T-stride, ..., 0 with a shortened final step") {
  const auto ts = stride_schedule(100, 7);
  REQUIRE(ts.size() == 16);
  CHECK(ts.front() == 100);
  CHECK(ts[1] == 93);
  CHECK(ts[ts.size() - 2] == 2);
  CHECK(ts.back() == 0);
  CHECK(stride_schedule(10, 1).size() == 11);
  CHECK(stride_schedule(10, 10) == std::vector<int>{10, 0});
  CHECK(stride_schedule(10, 99) == std::vector<int>{10, 0});
  CHECK_THROWS_AS(stride_schedule(10, 0), std::invalid_argument);
}

TEST_CASE("infer produces mask-free deterministic output") {
  const auto m = make_model(MatrixKind::MaskUniform, 4, 10);
  std::vector<OracleDenoiser::Entry> entries{{{0}, {1, 2}, 0.5}, {{0}, {3, 0}, 0.5}};
  const OracleDenoiser den(m, entries, /*joint_mode=*/true);
  std::mt19937_64 a(4), b(4);
  const auto xa = infer(m, den, {0}, 2, 3, a);
  const auto xb = infer(m, den, {0}, 2, 3, b);
  CHECK(xa == xb);
  for (int tok : xa) CHECK(tok < 4);
}

TEST_CASE("infer with the joint oracle recovers the data distribution") {
  const auto m = make_model(MatrixKind::MaskUniform, 3, 8);
  std::vector<OracleDenoiser::Entry> entries{
      {{0}, {0, 1, 2}, 0.6}, {{0}, {2, 2, 0}, 0.3}, {{0}, {1, 0, 1}, 0.1}};
  const OracleDenoiser den(m, entries, true);
  for (const int stride : {1, 3, 8}) {
    std::mt19937_64 rng(12);
    std::map<TokenSequence, double> hist;
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) hist[infer(m, den, {0}, 3, stride, rng)] += 1.0 / draws;
    double tv = 0.0;
    for (const auto& e : entries) tv += std::abs(hist[e.tokens] - e.weight);
    double extra = 0.0;
    for (const auto& [seq, p] : hist) {
      bool in_data = false;
      for (const auto& e : entries) in_data |= (e.tokens == seq);
      if (!in_data) extra += p;
    }
    CHECK(0.5 * (tv + extra) < 0.05);
  }
}
