#include "catdiff/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace catdiff {

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite entries");
}

Eigen::VectorXd column_mean(const Eigen::MatrixXd& x) { return x.colwise().mean(); }

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x) {
  const long n = x.rows();
  const long d = x.cols();
  if (n < 2) throw std::invalid_argument("covariance: need at least 2 samples");
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(n - 1);
  if (n <= d) {
    c += 1e-6 * Eigen::MatrixXd::Identity(d, d);
  }
  return c;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void FeatureSet::validate() const {
  if (features.rows() < 2 || features.cols() < 1) {
    throw std::invalid_argument("FeatureSet: need N >= 2 and d >= 1");
  }
  check_finite(features, "FeatureSet");
}

void ProbSet::validate() const {
  check_finite(probs, "ProbSet");
  for (long i = 0; i < probs.rows(); ++i) {
    if (probs.row(i).minCoeff() < -1e-9 || std::abs(probs.row(i).sum() - 1.0) > 1e-9) {
      throw std::invalid_argument("ProbSet: row is not a distribution");
    }
  }
}

double fid(const FeatureSet& real, const FeatureSet& fake) {
  real.validate();
  fake.validate();
  if (real.features.cols() != fake.features.cols()) {
    throw std::invalid_argument("fid: feature dimension mismatch");
  }
  const Eigen::VectorXd mr = column_mean(real.features);
  const Eigen::VectorXd mf = column_mean(fake.features);
  const Eigen::MatrixXd cr = covariance(real.features);
  const Eigen::MatrixXd cf = covariance(fake.features);

  const Eigen::MatrixXd cr_half = psd_sqrt(cr);
  const Eigen::MatrixXd inner = cr_half * cf * cr_half;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
  const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

  const double value = (mr - mf).squaredNorm() + cr.trace() + cf.trace() - 2.0 * tr_sqrt;
  if (value < -1e-6) {
    throw std::domain_error("fid: implausibly negative distance");
  }
  return std::max(value, 0.0);
}

double kl_score(const ProbSet& real, const ProbSet& fake) {
  real.validate();
  fake.validate();
  if (real.probs.rows() != fake.probs.rows() || real.probs.cols() != fake.probs.cols()) {
    throw std::invalid_argument("kl_score: shape mismatch");
  }
  constexpr double eps = 1e-10;
  const long n = real.probs.rows();
  const long c = real.probs.cols();
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    const double z = 1.0 + c * eps;  // renormalization of the smoothed row
    for (long j = 0; j < c; ++j) {
      const double p = real.probs(i, j);
      if (p <= 0.0) continue;
      const double q = (fake.probs(i, j) + eps) / z;
      acc += p * std::log(p / q);
    }
  }
  return acc / static_cast<double>(n);
}

DisturbanceKind disturbance_kind_from_string(const std::string& name) {
  if (name == "noise") return DisturbanceKind::Noise;
  if (name == "mask") return DisturbanceKind::Mask;
  if (name == "mix") return DisturbanceKind::Mix;
  throw std::invalid_argument("unknown disturbance kind: " + name);
}

std::vector<DisturbanceResult> disturbance_suite(DisturbanceKind kind,
                                                 const std::vector<double>& levels,
                                                 int n_samples, int feature_dim, int classes,
                                                 std::mt19937_64& rng) {
  if (levels.size() < 2) throw std::invalid_argument("disturbance_suite: need >= 2 levels");
  if (levels.front() != 0.0) {
    throw std::invalid_argument("disturbance_suite: level 0 must be included first");
  }
  if (!std::is_sorted(levels.begin(), levels.end())) {
    throw std::invalid_argument("disturbance_suite: levels must be ascending");
  }
  if (n_samples < 2 || feature_dim < 1 || classes < 2) {
    throw std::invalid_argument("disturbance_suite: bad synthetic-set shape");
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  auto randn = [&](int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
    return m;
  };

  const Eigen::MatrixXd base = randn(n_samples, feature_dim);
  const Eigen::MatrixXd noise = randn(n_samples, feature_dim);
  const Eigen::MatrixXd interferer =
      (2.0 * randn(n_samples, feature_dim).array() + 1.0).matrix();

  // Per-sample class distributions: softmax of random logits, plus a fixed
  // interfering distribution per sample.
  Eigen::MatrixXd base_probs(n_samples, classes);
  Eigen::MatrixXd interferer_probs(n_samples, classes);
  for (int i = 0; i < n_samples; ++i) {
    Eigen::VectorXd l = randn(classes, 1);
    Eigen::VectorXd e = (l.array() - l.maxCoeff()).exp();
    base_probs.row(i) = (e / e.sum()).transpose();
    Eigen::VectorXd l2 = randn(classes, 1);
    Eigen::VectorXd e2 = (l2.array() - l2.maxCoeff()).exp();
    interferer_probs.row(i) = (e2 / e2.sum()).transpose();
  }

  const FeatureSet real{base};
  const ProbSet real_probs{base_probs};

  std::vector<DisturbanceResult> out;
  for (double level : levels) {
    Eigen::MatrixXd f = base;
    Eigen::MatrixXd p = base_probs;
    const double w = level / (1.0 + level);  // blend weight in [0, 1)
    switch (kind) {
      case DisturbanceKind::Noise:
        f += level * noise;
        p = (1.0 - w) * base_probs +
            w * Eigen::MatrixXd::Constant(n_samples, classes, 1.0 / classes);
        break;
      case DisturbanceKind::Mask: {
        const double frac = std::clamp(level, 0.0, 1.0);
        const int zeroed = static_cast<int>(std::ceil(frac * feature_dim));
        f.leftCols(zeroed).setZero();
        p = (1.0 - frac) * base_probs +
            frac * Eigen::MatrixXd::Constant(n_samples, classes, 1.0 / classes);
        break;
      }
      case DisturbanceKind::Mix:
        f += level * interferer;
        p = (1.0 - w) * base_probs + w * interferer_probs;
        break;
    }
    DisturbanceResult r;
    r.level = level;
    r.fid = fid(real, FeatureSet{f});
    r.kl = kl_score(real_probs, ProbSet{p});
    out.push_back(r);
  }
  return out;
}

std::string feature_set_to_csv(const FeatureSet& fs) {
  std::ostringstream out;
  out.precision(17);
  for (long j = 0; j < fs.features.cols(); ++j) {
    out << (j ? "," : "") << "d" << j;
  }
  out << '\n';
  for (long i = 0; i < fs.features.rows(); ++i) {
    for (long j = 0; j < fs.features.cols(); ++j) {
      out << (j ? "," : "") << fs.features(i, j);
    }
    out << '\n';
  }
  return out.str();
}

namespace {

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("csv: empty input");
  // Header row carries the dimension labels.
  const long cols = static_cast<long>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    long seen = 0;
    while (std::getline(row, cell, ',')) {
      values.push_back(std::stod(cell));
      ++seen;
    }
    if (seen != cols) throw std::invalid_argument("csv: ragged row");
    ++rows;
  }
  Eigen::MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < cols; ++j) m(i, j) = values[i * cols + j];
  }
  return m;
}

}  // namespace

FeatureSet feature_set_from_csv(const std::string& text) {
  FeatureSet fs{matrix_from_csv(text)};
  fs.validate();
  return fs;
}

ProbSet prob_set_from_csv(const std::string& text) {
  ProbSet ps{matrix_from_csv(text)};
  ps.validate();
  return ps;
}

nlohmann::json score_json(const std::string& metric, double value, long n_real, long n_fake,
                          nlohmann::json metadata) {
  return nlohmann::json{{"metric", metric},
                        {"value", value},
                        {"n_real", n_real},
                        {"n_fake", n_fake},
                        {"metadata", std::move(metadata)}};
}

}  // namespace catdiff
