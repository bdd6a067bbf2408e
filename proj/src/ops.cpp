#include "pnnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pnnet {

namespace {

// Fixed-order dot product with eight independent partial sums so the
// compiler can vectorize it without reassociating.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

struct ConvGeometry {
  std::size_t batch, in_ch, height, width;
  std::size_t out_ch, k_h, k_w;
  std::size_t out_h, out_w;

  std::size_t patch_len() const { return in_ch * k_h * k_w; }
  std::size_t out_len() const { return out_h * out_w; }
};

template <typename T>
ConvGeometry conv_geometry(const char* op, const BasicTensor<T>& input, const BasicTensor<T>& weight) {
  require_rank(op, input.shape(), 4);
  require_rank(op, weight.shape(), 4);
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_ch = input.dim(1);
  g.height = input.dim(2);
  g.width = input.dim(3);
  g.out_ch = weight.dim(0);
  g.k_h = weight.dim(2);
  g.k_w = weight.dim(3);
  require_extent(op, "channels", weight.dim(1), g.in_ch);
  if (g.height < g.k_h) throw ShapeError(op, "rows", g.k_h, g.height);
  if (g.width < g.k_w) throw ShapeError(op, "cols", g.k_w, g.width);
  g.out_h = g.height - g.k_h + 1;
  g.out_w = g.width - g.k_w + 1;
  return g;
}

// col[k][p] with k = (c*kH + i)*kW + j and p = y*outW + x.
template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* col) {
  const std::size_t plen = g.out_len();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t i = 0; i < g.k_h; ++i) {
      for (std::size_t j = 0; j < g.k_w; ++j) {
        T* row = col + ((c * g.k_h + i) * g.k_w + j) * plen;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          const T* src = image + (c * g.height + y + i) * g.width + j;
          T* dst = row + y * g.out_w;
          for (std::size_t x = 0; x < g.out_w; ++x) dst[x] = src[x];
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* image) {
  const std::size_t plen = g.out_len();
  for (std::size_t c = 0; c < g.in_ch; ++c) {
    for (std::size_t i = 0; i < g.k_h; ++i) {
      for (std::size_t j = 0; j < g.k_w; ++j) {
        const T* row = col + ((c * g.k_h + i) * g.k_w + j) * plen;
        for (std::size_t y = 0; y < g.out_h; ++y) {
          T* dst = image + (c * g.height + y + i) * g.width + j;
          const T* src = row + y * g.out_w;
          for (std::size_t x = 0; x < g.out_w; ++x) dst[x] += src[x];
        }
      }
    }
  }
}

// Register-blocked kernels. Each output keeps the summation order of the
// plain loops (bias, then k ascending for the forward pass; o ascending for
// the input gradient; dot() lanes for the weight gradient), so blocking does
// not change results.

constexpr std::size_t kLanes = 16;

// kLanes values of T as one GCC vector; element-wise arithmetic only, so lane
// results are the same as the scalar loops they replace.
template <typename T>
struct Lanes {
  typedef T type __attribute__((vector_size(kLanes * sizeof(T))));
};
template <typename T>
using Vec = typename Lanes<T>::type;

template <typename T>
Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <typename T>
void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof v);
}

template <typename T>
Vec<T> splat(T x) {
  return Vec<T>{} + x;
}

template <typename T>
T lane_sum(const Vec<T>& acc) {
  T r[kLanes / 2];
  for (std::size_t i = 0; i < kLanes / 2; ++i) r[i] = acc[2 * i] + acc[2 * i + 1];
  return ((r[0] + r[1]) + (r[2] + r[3])) + ((r[4] + r[5]) + (r[6] + r[7]));
}

// out[o][p] = bias[o] + sum_k w[o][k] * col[k][p] for o in [o0, o0+OB) and
// PV vectors of p starting at p0.
template <std::size_t OB, std::size_t PV, typename T>
void conv_tile(const T* w, const T* bias, const T* col, std::size_t klen, std::size_t plen, std::size_t o0,
               std::size_t p0, T* out) {
  Vec<T> acc[OB][PV];
  for (std::size_t ob = 0; ob < OB; ++ob) {
    for (std::size_t v = 0; v < PV; ++v) acc[ob][v] = splat<T>(bias[o0 + ob]);
  }
  for (std::size_t k = 0; k < klen; ++k) {
    Vec<T> c[PV];
    for (std::size_t v = 0; v < PV; ++v) c[v] = load<T>(col + k * plen + p0 + v * kLanes);
    for (std::size_t ob = 0; ob < OB; ++ob) {
      const Vec<T> wv = splat<T>(w[(o0 + ob) * klen + k]);
      for (std::size_t v = 0; v < PV; ++v) acc[ob][v] += wv * c[v];
    }
  }
  for (std::size_t ob = 0; ob < OB; ++ob) {
    for (std::size_t v = 0; v < PV; ++v) store(out + (o0 + ob) * plen + p0 + v * kLanes, acc[ob][v]);
  }
}

template <std::size_t OB, typename T>
void conv_rows(const T* w, const T* bias, const T* col, std::size_t klen, std::size_t plen, std::size_t o0,
               T* out) {
  std::size_t p = 0;
  for (; p + 2 * kLanes <= plen; p += 2 * kLanes) conv_tile<OB, 2>(w, bias, col, klen, plen, o0, p, out);
  for (; p + kLanes <= plen; p += kLanes) conv_tile<OB, 1>(w, bias, col, klen, plen, o0, p, out);
  for (; p < plen; ++p) {
    for (std::size_t ob = 0; ob < OB; ++ob) {
      T acc = bias[o0 + ob];
      for (std::size_t k = 0; k < klen; ++k) acc += w[(o0 + ob) * klen + k] * col[k * plen + p];
      out[(o0 + ob) * plen + p] = acc;
    }
  }
}

template <typename T>
void conv_gemm(const T* w, const T* bias, const T* col, std::size_t out_ch, std::size_t klen, std::size_t plen,
               T* out) {
  std::size_t o = 0;
  for (; o + 8 <= out_ch; o += 8) conv_rows<8>(w, bias, col, klen, plen, o, out);
  for (; o + 4 <= out_ch; o += 4) conv_rows<4>(w, bias, col, klen, plen, o, out);
  for (; o < out_ch; ++o) conv_rows<1>(w, bias, col, klen, plen, o, out);
}

// Weight gradient partial sums for one output channel: lanes[k] and tails[k]
// accumulate go . col[k] across the batch; lane_sum(lanes[k]) + tails[k] is
// the final value.
template <std::size_t KB, typename T>
void weight_grad_rows(const T* go, const T* col, std::size_t plen, std::size_t k0, Vec<T>* lanes, T* tails) {
  Vec<T> acc[KB];
  for (std::size_t kb = 0; kb < KB; ++kb) acc[kb] = lanes[k0 + kb];
  std::size_t p = 0;
  for (; p + kLanes <= plen; p += kLanes) {
    const Vec<T> g = load<T>(go + p);
    for (std::size_t kb = 0; kb < KB; ++kb) acc[kb] += g * load<T>(col + (k0 + kb) * plen + p);
  }
  for (std::size_t kb = 0; kb < KB; ++kb) {
    lanes[k0 + kb] = acc[kb];
    for (std::size_t q = p; q < plen; ++q) tails[k0 + kb] += go[q] * col[(k0 + kb) * plen + q];
  }
}

template <typename T>
void weight_grad(const T* go, const T* col, std::size_t klen, std::size_t plen, Vec<T>* lanes, T* tails) {
  std::size_t k = 0;
  for (; k + 8 <= klen; k += 8) weight_grad_rows<8>(go, col, plen, k, lanes, tails);
  for (; k < klen; ++k) weight_grad_rows<1>(go, col, plen, k, lanes, tails);
}

// grad_col[k][p] = sum_o w[o][k] * go[o][p] for k in [k0, k0+KB) and PV
// vectors of p starting at p0.
template <std::size_t KB, std::size_t PV, typename T>
void input_grad_tile(const T* w, const T* go, std::size_t out_ch, std::size_t klen, std::size_t plen,
                     std::size_t k0, std::size_t p0, T* grad_col) {
  Vec<T> acc[KB][PV] = {};
  for (std::size_t o = 0; o < out_ch; ++o) {
    Vec<T> g[PV];
    for (std::size_t v = 0; v < PV; ++v) g[v] = load<T>(go + o * plen + p0 + v * kLanes);
    for (std::size_t kb = 0; kb < KB; ++kb) {
      const Vec<T> wv = splat<T>(w[o * klen + k0 + kb]);
      for (std::size_t v = 0; v < PV; ++v) acc[kb][v] += wv * g[v];
    }
  }
  for (std::size_t kb = 0; kb < KB; ++kb) {
    for (std::size_t v = 0; v < PV; ++v) store(grad_col + (k0 + kb) * plen + p0 + v * kLanes, acc[kb][v]);
  }
}

template <std::size_t KB, typename T>
void input_grad_rows(const T* w, const T* go, std::size_t out_ch, std::size_t klen, std::size_t plen,
                     std::size_t k0, T* grad_col) {
  std::size_t p = 0;
  for (; p + 2 * kLanes <= plen; p += 2 * kLanes) input_grad_tile<KB, 2>(w, go, out_ch, klen, plen, k0, p, grad_col);
  for (; p + kLanes <= plen; p += kLanes) input_grad_tile<KB, 1>(w, go, out_ch, klen, plen, k0, p, grad_col);
  for (; p < plen; ++p) {
    for (std::size_t kb = 0; kb < KB; ++kb) {
      T acc = 0;
      for (std::size_t o = 0; o < out_ch; ++o) acc += w[o * klen + k0 + kb] * go[o * plen + p];
      grad_col[(k0 + kb) * plen + p] = acc;
    }
  }
}

template <typename T>
void input_grad(const T* w, const T* go, std::size_t out_ch, std::size_t klen, std::size_t plen, T* grad_col) {
  std::size_t k = 0;
  for (; k + 8 <= klen; k += 8) input_grad_rows<8>(w, go, out_ch, klen, plen, k, grad_col);
  for (; k < klen; ++k) input_grad_rows<1>(w, go, out_ch, klen, plen, k, grad_col);
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias) {
  const ConvGeometry g = conv_geometry("conv2d_forward", input, weight);
  require_rank("conv2d_forward", bias.shape(), 1);
  require_extent("conv2d_forward", "bias", g.out_ch, bias.dim(0));

  BasicTensor<T> out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
  const std::size_t klen = g.patch_len();
  const std::size_t plen = g.out_len();
  std::vector<T> col(klen * plen);
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(input.raw() + b * g.in_ch * g.height * g.width, g, col.data());
    conv_gemm(weight.raw(), bias.raw(), col.data(), g.out_ch, klen, plen, out.raw() + b * g.out_ch * plen);
  }
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& upstream, bool need_input_grad) {
  const ConvGeometry g = conv_geometry("conv2d_backward", input, weight);
  require_rank("conv2d_backward", upstream.shape(), 4);
  require_extent("conv2d_backward", "batch", g.batch, upstream.dim(0));
  require_extent("conv2d_backward", "channels", g.out_ch, upstream.dim(1));
  require_extent("conv2d_backward", "rows", g.out_h, upstream.dim(2));
  require_extent("conv2d_backward", "cols", g.out_w, upstream.dim(3));

  Conv2dGrads<T> grads;
  grads.grad_weight = BasicTensor<T>(weight.shape());
  grads.grad_bias = BasicTensor<T>(Shape{g.out_ch});
  if (need_input_grad) grads.grad_input = BasicTensor<T>(input.shape());

  const std::size_t klen = g.patch_len();
  const std::size_t plen = g.out_len();
  std::vector<T> col(klen * plen);
  std::vector<T> grad_col(need_input_grad ? klen * plen : 0);
  std::vector<Vec<T>> lanes(g.out_ch * klen, Vec<T>{});
  std::vector<T> tails(g.out_ch * klen, T{0});
  for (std::size_t b = 0; b < g.batch; ++b) {
    im2col(input.raw() + b * g.in_ch * g.height * g.width, g, col.data());
    const T* gout = upstream.raw() + b * g.out_ch * plen;
    for (std::size_t o = 0; o < g.out_ch; ++o) {
      const T* go = gout + o * plen;
      T bias_sum = 0;
      for (std::size_t p = 0; p < plen; ++p) bias_sum += go[p];
      grads.grad_bias[o] += bias_sum;
      weight_grad(go, col.data(), klen, plen, lanes.data() + o * klen, tails.data() + o * klen);
    }
    if (need_input_grad) {
      input_grad(weight.raw(), gout, g.out_ch, klen, plen, grad_col.data());
      col2im_add(grad_col.data(), g, grads.grad_input.raw() + b * g.in_ch * g.height * g.width);
    }
  }
  for (std::size_t i = 0; i < lanes.size(); ++i) grads.grad_weight[i] = lane_sum<T>(lanes[i]) + tails[i];
  return grads;
}

// Rational approximation of tanh on [-7.9, 7.9] (odd degree 13 over even
// degree 6), accurate to a few ulp in single precision; saturates beyond.
// Written on vectors so it works lane-wise; a scalar goes through lane 0.
inline Vec<float> fast_tanh(Vec<float> in) {
  const Vec<float> clamp = splat(7.90531110763549805f);
  Vec<float> x = in > clamp ? clamp : in;
  x = x < -clamp ? -clamp : x;
  const Vec<float> x2 = x * x;
  Vec<float> p = splat(-2.76076847742355e-16f);
  p = p * x2 + 2.00018790482477e-13f;
  p = p * x2 + -8.60467152213735e-11f;
  p = p * x2 + 5.12229709037114e-08f;
  p = p * x2 + 1.48572235717979e-05f;
  p = p * x2 + 6.37261928875436e-04f;
  p = p * x2 + 4.89352455891786e-03f;
  p = p * x;
  Vec<float> q = splat(1.19825839466702e-06f);
  q = q * x2 + 1.18534705686654e-04f;
  q = q * x2 + 2.26843463243900e-03f;
  q = q * x2 + 4.89352518554385e-03f;
  const Vec<float> r = p / q;
  const Vec<float> tiny = splat(0.0004f);
  return (in < tiny && in > -tiny) ? in : r;
}

inline void tanh_array(const double* src, double* dst, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] = std::tanh(src[i]);
}

inline void tanh_array(const float* src, float* dst, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) store(dst + i, fast_tanh(load(src + i)));
  for (; i < n; ++i) dst[i] = fast_tanh(splat(src[i]))[0];
}

template <typename T>
BasicTensor<T> tanh_forward(const BasicTensor<T>& x) {
  BasicTensor<T> y(x.shape());
  tanh_array(x.raw(), y.raw(), x.size());
  return y;
}

template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& y_out, const BasicTensor<T>& upstream) {
  if (!(y_out.shape() == upstream.shape())) {
    throw ShapeError("tanh_backward", "output " + y_out.shape().str() + " vs upstream " +
                                          upstream.shape().str());
  }
  BasicTensor<T> g(y_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = upstream[i] * (T{1} - y_out[i] * y_out[i]);
  return g;
}

template <typename T>
MaxPoolResult<T> maxpool2_forward(const BasicTensor<T>& input) {
  require_rank("maxpool2_forward", input.shape(), 4);
  const std::size_t batch = input.dim(0), ch = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h % 2 != 0) throw ShapeError("maxpool2_forward", "rows must be even, got " + std::to_string(h));
  if (w % 2 != 0) throw ShapeError("maxpool2_forward", "cols must be even, got " + std::to_string(w));
  const std::size_t oh = h / 2, ow = w / 2;

  MaxPoolResult<T> result{BasicTensor<T>(Shape{batch, ch, oh, ow}), {}};
  result.argmax.input_shape = input.shape();
  result.argmax.output_shape = result.output.shape();
  result.argmax.winner.resize(result.output.size());

  std::size_t out_idx = 0;
  for (std::size_t plane = 0; plane < batch * ch; ++plane) {
    const T* src = input.raw() + plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++out_idx) {
        const T* top = src + (2 * y) * w + 2 * x;
        const T cells[4] = {top[0], top[1], top[w], top[w + 1]};
        std::uint8_t best = 0;
        for (std::uint8_t c = 1; c < 4; ++c) {
          if (cells[c] > cells[best]) best = c;
        }
        result.output[out_idx] = cells[best];
        result.argmax.winner[out_idx] = best;
      }
    }
  }
  return result;
}

template <typename T>
BasicTensor<T> maxpool2_backward(const ArgmaxMap& argmax, const BasicTensor<T>& upstream) {
  if (!(upstream.shape() == argmax.output_shape) || argmax.winner.size() != upstream.size()) {
    throw ShapeError("maxpool2_backward", "argmax map for " + argmax.output_shape.str() +
                                              " does not match upstream " + upstream.shape().str());
  }
  const Shape& in = argmax.input_shape;
  const std::size_t h = in[2], w = in[3];
  const std::size_t oh = h / 2, ow = w / 2;
  BasicTensor<T> grad(in);
  std::size_t out_idx = 0;
  for (std::size_t plane = 0; plane < in[0] * in[1]; ++plane) {
    T* dst = grad.raw() + plane * h * w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x, ++out_idx) {
        const std::uint8_t c = argmax.winner[out_idx];
        dst[(2 * y + c / 2) * w + 2 * x + c % 2] = upstream[out_idx];
      }
    }
  }
  return grad;
}

template <typename T>
BasicTensor<T> linear_forward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                              const BasicTensor<T>& bias) {
  require_rank("linear_forward", x.shape(), 2);
  require_rank("linear_forward", weight.shape(), 2);
  require_rank("linear_forward", bias.shape(), 1);
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  require_extent("linear_forward", "features", weight.dim(1), in);
  require_extent("linear_forward", "bias", out_dim, bias.dim(0));

  BasicTensor<T> out(Shape{batch, out_dim});
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = x.raw() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      out.at(b, o) = bias[o] + dot(row, weight.raw() + o * in, in);
    }
  }
  return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                               const BasicTensor<T>& upstream, bool need_input_grad) {
  require_rank("linear_backward", x.shape(), 2);
  require_rank("linear_backward", weight.shape(), 2);
  require_rank("linear_backward", upstream.shape(), 2);
  const std::size_t batch = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  require_extent("linear_backward", "features", weight.dim(1), in);
  require_extent("linear_backward", "batch", batch, upstream.dim(0));
  require_extent("linear_backward", "outputs", out_dim, upstream.dim(1));

  LinearGrads<T> grads;
  grads.grad_weight = BasicTensor<T>(weight.shape());
  grads.grad_bias = BasicTensor<T>(Shape{out_dim});
  if (need_input_grad) grads.grad_input = BasicTensor<T>(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const T* row = x.raw() + b * in;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const T g = upstream.at(b, o);
      grads.grad_bias[o] += g;
      axpy(g, row, grads.grad_weight.raw() + o * in, in);
      if (need_input_grad) axpy(g, weight.raw() + o * in, grads.grad_input.raw() + b * in, in);
    }
  }
  return grads;
}

template <typename T>
double l2_distance(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw ShapeError("l2_distance", "length", a.size(), b.size());
  double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

template <typename T>
double l2_distance(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("l2_distance", a.shape().str() + " vs " + b.shape().str());
  }
  return l2_distance<T>(a.data(), b.data());
}

template <typename T>
void l2_distance_backward(std::span<const T> a, std::span<const T> b, double distance, double upstream,
                          std::span<T> grad_a, std::span<T> grad_b) {
  if (a.size() != b.size()) throw ShapeError("l2_distance_backward", "length", a.size(), b.size());
  if (!grad_a.empty()) require_extent("l2_distance_backward", "grad_a", a.size(), grad_a.size());
  if (!grad_b.empty()) require_extent("l2_distance_backward", "grad_b", a.size(), grad_b.size());
  const double scale = upstream / std::max(distance, kL2GradEpsilon);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double g = scale * (static_cast<double>(a[i]) - static_cast<double>(b[i]));
    if (!grad_a.empty()) grad_a[i] += static_cast<T>(g);
    if (!grad_b.empty()) grad_b[i] -= static_cast<T>(g);
  }
}

template <typename T>
BasicTensor<T> l2_distance_backward(const BasicTensor<T>& a, const BasicTensor<T>& b, double upstream) {
  const double d = l2_distance(a, b);
  BasicTensor<T> grad(a.shape());
  l2_distance_backward<T>(a.data(), b.data(), d, upstream, grad.data(), {});
  return grad;
}

#define PNNET_INSTANTIATE_OPS(T)                                                                        \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                         const BasicTensor<T>&);                                       \
  template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&,               \
                                          const BasicTensor<T>&, bool);                                \
  template BasicTensor<T> tanh_forward(const BasicTensor<T>&);                                         \
  template BasicTensor<T> tanh_backward(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template MaxPoolResult<T> maxpool2_forward(const BasicTensor<T>&);                                   \
  template BasicTensor<T> maxpool2_backward(const ArgmaxMap&, const BasicTensor<T>&);                  \
  template BasicTensor<T> linear_forward(const BasicTensor<T>&, const BasicTensor<T>&,                 \
                                         const BasicTensor<T>&);                                       \
  template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&,                \
                                          const BasicTensor<T>&, bool);                                \
  template double l2_distance(std::span<const T>, std::span<const T>);                                 \
  template double l2_distance(const BasicTensor<T>&, const BasicTensor<T>&);                           \
  template void l2_distance_backward(std::span<const T>, std::span<const T>, double, double,           \
                                     std::span<T>, std::span<T>);                                      \
  template BasicTensor<T> l2_distance_backward(const BasicTensor<T>&, const BasicTensor<T>&, double);

PNNET_INSTANTIATE_OPS(float)
PNNET_INSTANTIATE_OPS(double)

#undef PNNET_INSTANTIATE_OPS

}  // namespace pnnet
