#pragma once

// Forward and backward kernels for the descriptor network's layer stack:
// valid stride-1 cross-correlation, tanh, 2x2 max pooling, fully connected
// layers and the L2 distance between descriptors.
//
// Every kernel is templated on the scalar type. Training runs in float; the
// gradient checker instantiates the same code in double.

#include <cstdint>
#include <span>
#include <vector>

#include "pnnet/tensor.hpp"

namespace pnnet {

template <typename T>
struct Conv2dGrads {
  BasicTensor<T> grad_input;  // empty when not requested
  BasicTensor<T> grad_weight;
  BasicTensor<T> grad_bias;
};

/// input [B,Cin,H,W], weight [Cout,Cin,kH,kW], bias [Cout] -> [B,Cout,H-kH+1,W-kW+1].
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias);

/// Gradients of conv2d_forward given dL/d(output). The input gradient is
/// skipped when `need_input_grad` is false (first layer of a network).
template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& upstream, bool need_input_grad = true);

template <typename T>
BasicTensor<T> tanh_forward(const BasicTensor<T>& x);

/// upstream * (1 - y_out^2), where y_out is the forward output.
template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& y_out, const BasicTensor<T>& upstream);

/// Winning cell of every 2x2 window, stored as 0..3 in row-major window order.
struct ArgmaxMap {
  Shape input_shape;
  Shape output_shape;
  std::vector<std::uint8_t> winner;
};

template <typename T>
struct MaxPoolResult {
  BasicTensor<T> output;
  ArgmaxMap argmax;
};

/// 2x2 window, stride 2. Ties go to the first cell in row-major window order.
template <typename T>
MaxPoolResult<T> maxpool2_forward(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> maxpool2_backward(const ArgmaxMap& argmax, const BasicTensor<T>& upstream);

template <typename T>
struct LinearGrads {
  BasicTensor<T> grad_input;
  BasicTensor<T> grad_weight;
  BasicTensor<T> grad_bias;
};

/// x [B,F], weight [O,F], bias [O] -> x * weight^T + bias.
template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& upstream, bool need_input_grad = true);

/// Denominator clamp of the distance gradient at coincident points.
inline constexpr double kL2GradEpsilon = 1e-8;

/// ||a - b||_2, accumulated in double.
template <typename T>
double l2_distance(std::span<const T> a, std::span<const T> b);

template <typename T>
double l2_distance(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Adds upstream * (a - b) / max(distance, eps) into grad_a and its negation
/// into grad_b (either may be empty to skip).
template <typename T>
void l2_distance_backward(std::span<const T> a, std::span<const T> b, double distance, double upstream,
                          std::span<T> grad_a, std::span<T> grad_b);

/// Gradient of ||a - b|| with respect to a.
template <typename T>
BasicTensor<T> l2_distance_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, double upstream);

}  // namespace pnnet
