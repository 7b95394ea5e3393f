#include "catdiff/codebook.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace catdiff {

void Codebook::validate() const {
  if (size() < 2) throw std::invalid_argument("Codebook: K must be >= 2");
  if (dim < 1) throw std::invalid_argument("Codebook: dim must be positive");
  for (const auto& e : entries) {
    if (static_cast<int>(e.size()) != dim) {
      throw std::invalid_argument("Codebook: entry dimension mismatch");
    }
    for (double v : e) {
      if (!std::isfinite(v)) throw std::invalid_argument("Codebook: non-finite entry");
    }
  }
  for (int a = 0; a < size(); ++a) {
    for (int b = a + 1; b < size(); ++b) {
      double d2 = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double diff = entries[a][k] - entries[b][k];
        d2 += diff * diff;
      }
      if (d2 <= 1e-24) throw std::invalid_argument("Codebook: duplicate entries");
    }
  }
}

nlohmann::json Codebook::to_json() const {
  return nlohmann::json{{"K", size()}, {"n_z", dim}, {"entries", entries}};
}

Codebook Codebook::from_json(const nlohmann::json& j) {
  Codebook cb;
  cb.dim = j.at("n_z").get<int>();
  cb.entries = j.at("entries").get<std::vector<std::vector<double>>>();
  if (j.at("K").get<int>() != cb.size()) {
    throw std::invalid_argument("Codebook::from_json: K disagrees with entry count");
  }
  cb.validate();
  return cb;
}

FeatureGrid FeatureGrid::zeros(int rows, int cols, int dim) {
  FeatureGrid g;
  g.rows = rows;
  g.cols = cols;
  g.dim = dim;
  g.data.assign(static_cast<std::size_t>(rows) * cols * dim, 0.0);
  return g;
}

void FeatureGrid::validate() const {
  if (rows < 1 || cols < 1 || dim < 1) {
    throw std::invalid_argument("FeatureGrid: dimensions must be positive");
  }
  if (data.size() != static_cast<std::size_t>(rows) * cols * dim) {
    throw std::invalid_argument("FeatureGrid: data size mismatch");
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw std::invalid_argument("FeatureGrid: non-finite entry");
  }
}

std::vector<std::vector<int>> quantize(const FeatureGrid& grid, const Codebook& cb) {
  grid.validate();
  cb.validate();
  if (grid.dim != cb.dim) throw std::invalid_argument("quantize: vector dimension mismatch");
  std::vector<std::vector<int>> tokens(grid.rows, std::vector<int>(grid.cols, 0));
  for (int i = 0; i < grid.rows; ++i) {
    for (int j = 0; j < grid.cols; ++j) {
      int best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int k = 0; k < cb.size(); ++k) {
        double d2 = 0.0;
        for (int d = 0; d < grid.dim; ++d) {
          const double diff = grid.at(i, j, d) - cb.entries[k][d];
          d2 += diff * diff;
        }
        if (d2 < best_d2) {  // strict: ties keep the lowest index
          best_d2 = d2;
          best = k;
        }
      }
      tokens[i][j] = best;
    }
  }
  return tokens;
}

VqLossComponents vq_loss(const FeatureGrid& s, const FeatureGrid& s_hat,
                         const FeatureGrid& z_enc, const FeatureGrid& quantized) {
  if (s.rows != s_hat.rows || s.cols != s_hat.cols || s.dim != s_hat.dim) {
    throw std::invalid_argument("vq_loss: spectrogram shape mismatch");
  }
  if (z_enc.rows != quantized.rows || z_enc.cols != quantized.cols ||
      z_enc.dim != quantized.dim) {
    throw std::invalid_argument("vq_loss: latent shape mismatch");
  }
  VqLossComponents out;
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    out.recon_l1 += std::abs(s.data[i] - s_hat.data[i]);
  }
  out.recon_l1 /= static_cast<double>(s.data.size());

  const int cells = z_enc.rows * z_enc.cols;
  double sq = 0.0;
  for (std::size_t i = 0; i < z_enc.data.size(); ++i) {
    const double diff = z_enc.data[i] - quantized.data[i];
    sq += diff * diff;
  }
  sq /= static_cast<double>(cells);
  out.codebook_term = sq;
  out.commit_term = sq;
  return out;
}

double adversarial_total(double vq_loss_total, double d_real, double d_fake, double lambda_d) {
  if (!(d_real > 0.0 && d_real < 1.0 && d_fake > 0.0 && d_fake < 1.0)) {
    throw std::invalid_argument("adversarial_total: discriminator outputs must lie in (0, 1)");
  }
  if (!(lambda_d >= 0.0)) {
    throw std::invalid_argument("adversarial_total: lambda_d must be nonnegative");
  }
  return vq_loss_total + lambda_d * (std::log(d_real) + std::log(1.0 - d_fake));
}

}  // namespace catdiff
