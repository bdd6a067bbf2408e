#pragma once

// Independent reference implementations used as test oracles. None of these
// share code paths with the library kernels they check.

#include <cstdint>
#include <span>
#include <vector>

#include "pnnet/tensor.hpp"

namespace pnnet::testing {

/// Six nested loops over (b, o, y, x, c, i, j); accumulates in double.
Tensor naive_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Scans each 2x2 window; returns the maxima and the winning row-major cell.
struct WindowMax {
  Tensor output;
  std::vector<std::uint8_t> winner;
};
WindowMax window_max(const Tensor& input);

/// Exhaustive L2 nearest neighbour with lowest-index tie break.
struct BruteMatch {
  std::size_t index;
  double distance;
};
std::vector<BruteMatch> brute_force_nn(const Tensor& left, const Tensor& right);

/// For each candidate threshold t, counts accepted (distance <= t) positives
/// and negatives with a full pass over the data.
struct RecountPoint {
  double threshold;
  double fpr;
  double tpr;
};
std::vector<RecountPoint> roc_recount(std::span<const double> distances, std::span<const int> labels);

}  // namespace pnnet::testing
