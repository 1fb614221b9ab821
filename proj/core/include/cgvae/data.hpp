#pragma once

#include <array>
#include <string>
#include <vector>

#include "cgvae/rng.hpp"
#include "cgvae/tensor.hpp"

namespace cgvae {

enum class Split : int { kTrain = 0, kValid = 1, kTest = 2 };

struct Dataset {
  Tensor items;                      // N x D, values in [0,1]
  std::vector<std::size_t> item_shape;  // per-item dims, e.g. {28,28}
  std::vector<int> split_label;      // empty until split() assigns
  std::string provenance;

  std::size_t count() const { return items.empty() ? 0 : items.rows(); }
  std::size_t dim() const { return items.empty() ? 0 : items.cols(); }

  std::vector<std::size_t> indices_of(Split s) const;
};

/// Reads an IDX image file (magic 0x00000803, big-endian dims, unsigned
/// bytes), scaling pixels to [0,1]. count_limit 0 means no limit.
Dataset load_idx(const std::string& path, std::size_t count_limit = 0);

/// Re-emits a [0,1]-scaled dataset as an IDX image file (byte-faithful
/// inverse of load_idx).
void save_idx(const Dataset& data, const std::string& path);

/// Random split with exact proportions up to rounding; deterministic given
/// the rng seed. Zero-weight splits are allowed and come out empty.
Dataset split(Dataset data, const std::array<double, 3>& ratios, Rng& rng);

/// Desk-scale stand-in for MNIST: 8x8 binary prototype glyphs with iid
/// pixel-flip noise.
Dataset synth_grid_digits(int n_per_class, double noise, Rng& rng);

}  // namespace cgvae
