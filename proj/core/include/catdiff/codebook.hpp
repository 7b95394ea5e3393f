#pragma once

#include <vector>

#include <nlohmann/json.hpp>

namespace catdiff {

/// Finite set of embedding vectors defining the discrete token alphabet.
struct Codebook {
  int dim = 0;
  std::vector<std::vector<double>> entries;  // K vectors of length dim

  int size() const { return static_cast<int>(entries.size()); }

  void validate() const;

  nlohmann::json to_json() const;
  static Codebook from_json(const nlohmann::json& j);
};

/// Rows x cols grid of dim-dimensional vectors. dim = 1 covers the
/// original-grid role (spectrogram stand-ins).
struct FeatureGrid {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  std::vector<double> data;  // rows*cols*dim, cell-major

  static FeatureGrid zeros(int rows, int cols, int dim);

  double& at(int i, int j, int d) { return data[(static_cast<std::size_t>(i) * cols + j) * dim + d]; }
  double at(int i, int j, int d) const {
    return data[(static_cast<std::size_t>(i) * cols + j) * dim + d];
  }

  void validate() const;
};

/// Nearest codebook entry per cell in squared Euclidean distance, ties broken
/// by lowest index.
std::vector<std::vector<int>> quantize(const FeatureGrid& grid, const Codebook& cb);

struct VqLossComponents {
  double recon_l1 = 0.0;
  // Numerically equal in evaluation mode; the stop-gradient detachment only
  // affects gradient flow, which this module does not model.
  double codebook_term = 0.0;
  double commit_term = 0.0;

  double total() const { return recon_l1 + codebook_term + commit_term; }
};

VqLossComponents vq_loss(const FeatureGrid& s, const FeatureGrid& s_hat,
                         const FeatureGrid& z_enc, const FeatureGrid& quantized);

/// Adds the patch-discriminator term to a quantizer loss total.
double adversarial_total(double vq_loss_total, double d_real, double d_fake, double lambda_d);

}  // namespace catdiff
