#pragma once

// The descriptor network:
//
//   input 1x32x32
//   conv 7x7 -> C1 x 26 x 26, tanh
//   maxpool 2x2 -> C1 x 13 x 13
//   conv 6x6 -> C2 x 8 x 8, tanh
//   flatten (C2*64) -> linear -> D, tanh
//
// With C1 = 32, C2 = 64 the flatten stage carries 4096 values. Smaller channel
// counts give a "smoke" network with identical ops for quick tests.

#include <cstdint>
#include <filesystem>
#include <optional>

#include "pnnet/ops.hpp"
#include "pnnet/tensor.hpp"

namespace pnnet {

struct NetworkShape {
  static constexpr std::size_t kInputSize = 32;
  static constexpr std::size_t kConv1Kernel = 7;
  static constexpr std::size_t kConv2Kernel = 6;
  static constexpr std::size_t kConv1Out = kInputSize - kConv1Kernel + 1;  // 26
  static constexpr std::size_t kPooled = kConv1Out / 2;                    // 13
  static constexpr std::size_t kConv2Out = kPooled - kConv2Kernel + 1;     // 8

  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 64;
  std::size_t descriptor_dim = 128;

  std::size_t flatten_size() const { return conv2_channels * kConv2Out * kConv2Out; }

  /// Full-size network with descriptor dimension `dim` (128 or 256).
  static NetworkShape full(std::size_t dim) { return {32, 64, dim}; }
  /// Reduced channel counts for desk-scale training runs.
  static NetworkShape smoke(std::size_t dim) { return {8, 16, dim}; }

  bool operator==(const NetworkShape&) const = default;
};

/// Throws ConfigError when any extent is zero.
void validate(const NetworkShape& shape);

template <typename T>
struct BasicNetworkParams {
  NetworkShape shape;
  BasicTensor<T> conv1_w;  // [C1,1,7,7]
  BasicTensor<T> conv1_b;  // [C1]
  BasicTensor<T> conv2_w;  // [C2,C1,6,6]
  BasicTensor<T> conv2_b;  // [C2]
  BasicTensor<T> fc_w;     // [D,C2*64]
  BasicTensor<T> fc_b;     // [D]

  static BasicNetworkParams zeros(const NetworkShape& shape);

  std::size_t descriptor_dim() const { return shape.descriptor_dim; }
  std::size_t parameter_count() const;

  /// Visits the six tensors in declaration order.
  template <typename F>
  void for_each(F&& fn) {
    fn(conv1_w), fn(conv1_b), fn(conv2_w), fn(conv2_b), fn(fc_w), fn(fc_b);
  }
  template <typename F>
  void for_each(F&& fn) const {
    fn(conv1_w), fn(conv1_b), fn(conv2_w), fn(conv2_b), fn(fc_w), fn(fc_b);
  }

  bool all_finite() const;

  /// Concatenation of all tensors in declaration order, and its inverse.
  BasicTensor<T> flatten() const;
  static BasicNetworkParams unflatten(const NetworkShape& shape, const BasicTensor<T>& flat);

  template <typename U>
  BasicNetworkParams<U> cast() const {
    return {shape, conv1_w.template cast<U>(), conv1_b.template cast<U>(), conv2_w.template cast<U>(),
            conv2_b.template cast<U>(), fc_w.template cast<U>(), fc_b.template cast<U>()};
  }

  bool operator==(const BasicNetworkParams&) const = default;
};

using NetworkParams = BasicNetworkParams<float>;
using NetworkParamsD = BasicNetworkParams<double>;

/// Uniform in +-1/sqrt(fan_in) for every weight and bias; deterministic per seed.
NetworkParams init_params(std::uint64_t seed, const NetworkShape& shape);
NetworkParams init_params(std::uint64_t seed, std::size_t descriptor_dim);

/// Intermediate activations kept for the backward pass.
template <typename T>
struct ForwardCache {
  BasicTensor<T> input;
  BasicTensor<T> conv1_act;
  MaxPoolResult<T> pool;
  BasicTensor<T> conv2_act;
  BasicTensor<T> flat;
  BasicTensor<T> output;
};

template <typename T>
ForwardCache<T> forward(const BasicNetworkParams<T>& params, const BasicTensor<T>& patches);

/// Parameter gradients given dL/d(descriptors). The input gradient is not formed.
template <typename T>
BasicNetworkParams<T> backward(const BasicNetworkParams<T>& params, const ForwardCache<T>& cache,
                               const BasicTensor<T>& grad_output);

/// patches [B,1,32,32] -> descriptors [B,D], each entry in (-1,1).
template <typename T>
BasicTensor<T> describe(const BasicNetworkParams<T>& params, const BasicTensor<T>& patches);

template <typename T>
struct TripletDescriptors {
  BasicTensor<T> p1;
  BasicTensor<T> p2;
  BasicTensor<T> n;
};

/// Three passes through the one shared parameter set.
template <typename T>
TripletDescriptors<T> describe_triplet(const BasicNetworkParams<T>& params, const BasicTensor<T>& p1,
                                       const BasicTensor<T>& p2, const BasicTensor<T>& n);

// Checkpoint file, little-endian:
//   "PNNETCKP" | u8 version | u32 D | u32 C1 | u32 C2 | u64 seed | u32 epoch |
//   u8 has_velocity | f32 params... | f32 velocity... | u32 crc32 of all preceding bytes
inline constexpr std::uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams params;
  std::optional<NetworkParams> velocity;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;  // completed training epochs
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Loads and validates a checkpoint. When `expected_dim` is given a mismatch
/// raises ShapeError before anything is returned.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::size_t> expected_dim = std::nullopt);

/// CRC-32 of the checkpoint file's bytes; recorded as provenance in descriptor files.
std::uint32_t checkpoint_hash(const std::filesystem::path& path);

extern template struct BasicNetworkParams<float>;
extern template struct BasicNetworkParams<double>;

}  // namespace pnnet
