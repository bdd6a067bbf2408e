#pragma once

// Loss-and-gradient evaluation of a batch of triplets or labelled pairs
// through the descriptor network. Results are sums over the examples so that
// chunks of one batch can be reduced in a fixed order before averaging.

#include <span>

#include "pnnet/losses.hpp"
#include "pnnet/model.hpp"

namespace pnnet {

template <typename T>
struct ObjectiveSum {
  double loss_sum = 0;
  std::size_t examples = 0;
  BasicNetworkParams<T> grad_sum;
};

/// p1, p2, n: [K,1,32,32]. `kind` must be a triplet loss.
template <typename T>
ObjectiveSum<T> triplet_objective(const BasicNetworkParams<T>& params, const BasicTensor<T>& p1,
                                  const BasicTensor<T>& p2, const BasicTensor<T>& n, LossKind kind);

/// left, right: [K,1,32,32], one label per row.
template <typename T>
ObjectiveSum<T> pair_objective(const BasicNetworkParams<T>& params, const BasicTensor<T>& left,
                               const BasicTensor<T>& right, std::span<const PairLabel> labels,
                               const HingeConfig& hinge);

/// Stacks equally shaped [K,...] tensors along the batch axis.
template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>* const> parts);

}  // namespace pnnet
