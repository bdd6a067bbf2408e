#include "pnnet/objective.hpp"

#include <algorithm>

namespace pnnet {

template <typename T>
BasicTensor<T> concat_batch(std::span<const BasicTensor<T>* const> parts) {
  if (parts.empty()) throw ShapeError("concat_batch", "no inputs");
  const Shape& first = parts.front()->shape();
  std::size_t batch = 0;
  for (const BasicTensor<T>* part : parts) {
    require_rank("concat_batch", part->shape(), first.rank());
    for (std::size_t axis = 1; axis < first.rank(); ++axis) {
      require_extent("concat_batch", "inner", first[axis], part->dim(axis));
    }
    batch += part->dim(0);
  }
  std::vector<std::size_t> extents(first.extents().begin(), first.extents().end());
  extents[0] = batch;
  BasicTensor<T> out{Shape(std::span<const std::size_t>(extents))};
  T* dst = out.raw();
  for (const BasicTensor<T>* part : parts) dst = std::copy(part->data().begin(), part->data().end(), dst);
  return out;
}

template <typename T>
ObjectiveSum<T> triplet_objective(const BasicNetworkParams<T>& params, const BasicTensor<T>& p1,
                                  const BasicTensor<T>& p2, const BasicTensor<T>& n, LossKind kind) {
  if (!uses_triplets(kind)) throw ConfigError("triplet_objective: loss '" + std::string(loss_name(kind)) + "' needs pairs");
  require_extent("triplet_objective", "batch", p1.dim(0), p2.dim(0));
  require_extent("triplet_objective", "batch", p1.dim(0), n.dim(0));
  const std::size_t k = p1.dim(0);
  const BasicTensor<T>* parts[] = {&p1, &p2, &n};
  const ForwardCache<T> cache = forward(params, concat_batch<T>(parts));
  const std::size_t dim = params.descriptor_dim();
  const BasicTensor<T>& desc = cache.output;
  BasicTensor<T> grad_desc(desc.shape());

  auto row = [&](const BasicTensor<T>& t, std::size_t r) { return std::span<const T>(t.raw() + r * dim, dim); };
  auto grad_row = [&](std::size_t r) { return std::span<T>(grad_desc.raw() + r * dim, dim); };

  ObjectiveSum<T> result;
  result.examples = k;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = i, b = k + i, c = 2 * k + i;
    TripletDistances t;
    t.d_pos = l2_distance(row(desc, a), row(desc, b));
    t.d_neg1 = l2_distance(row(desc, a), row(desc, c));
    t.d_neg2 = l2_distance(row(desc, b), row(desc, c));
    TripletDistanceGrads g;
    if (kind == LossKind::SoftPn) {
      result.loss_sum += softpn_loss(t);
      g = softpn_backward(t);
    } else {
      result.loss_sum += softmax_ratio_loss(t);
      g = softmax_ratio_backward(t);
    }
    if (g.d_pos != 0) l2_distance_backward(row(desc, a), row(desc, b), t.d_pos, g.d_pos, grad_row(a), grad_row(b));
    if (g.d_neg1 != 0) l2_distance_backward(row(desc, a), row(desc, c), t.d_neg1, g.d_neg1, grad_row(a), grad_row(c));
    if (g.d_neg2 != 0) l2_distance_backward(row(desc, b), row(desc, c), t.d_neg2, g.d_neg2, grad_row(b), grad_row(c));
  }
  result.grad_sum = backward(params, cache, grad_desc);
  return result;
}

template <typename T>
ObjectiveSum<T> pair_objective(const BasicNetworkParams<T>& params, const BasicTensor<T>& left,
                               const BasicTensor<T>& right, std::span<const PairLabel> labels,
                               const HingeConfig& hinge) {
  require_extent("pair_objective", "batch", left.dim(0), right.dim(0));
  require_extent("pair_objective", "labels", left.dim(0), labels.size());
  const std::size_t k = left.dim(0);
  const BasicTensor<T>* parts[] = {&left, &right};
  const ForwardCache<T> cache = forward(params, concat_batch<T>(parts));
  const std::size_t dim = params.descriptor_dim();
  const BasicTensor<T>& desc = cache.output;
  BasicTensor<T> grad_desc(desc.shape());

  ObjectiveSum<T> result;
  result.examples = k;
  for (std::size_t i = 0; i < k; ++i) {
    std::span<const T> a(desc.raw() + i * dim, dim);
    std::span<const T> b(desc.raw() + (k + i) * dim, dim);
    const double d = l2_distance(a, b);
    result.loss_sum += hinge_embedding_loss(d, labels[i], hinge);
    const double g = hinge_embedding_backward(d, labels[i], hinge);
    if (g != 0) {
      l2_distance_backward(a, b, d, g, std::span<T>(grad_desc.raw() + i * dim, dim),
                           std::span<T>(grad_desc.raw() + (k + i) * dim, dim));
    }
  }
  result.grad_sum = backward(params, cache, grad_desc);
  return result;
}

#define PNNET_INSTANTIATE_OBJECTIVE(T)                                                                     \
  template BasicTensor<T> concat_batch(std::span<const BasicTensor<T>* const>);                          \
  template ObjectiveSum<T> triplet_objective(const BasicNetworkParams<T>&, const BasicTensor<T>&,        \
                                             const BasicTensor<T>&, const BasicTensor<T>&, LossKind);    \
  template ObjectiveSum<T> pair_objective(const BasicNetworkParams<T>&, const BasicTensor<T>&,           \
                                          const BasicTensor<T>&, std::span<const PairLabel>,             \
                                          const HingeConfig&);

PNNET_INSTANTIATE_OBJECTIVE(float)
PNNET_INSTANTIATE_OBJECTIVE(double)

#undef PNNET_INSTANTIATE_OBJECTIVE

}  // namespace pnnet
