#include "pnnet/model.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "binary_io.hpp"

namespace pnnet {

namespace {

constexpr char kCheckpointMagic[] = "PNNETCKP";
constexpr std::size_t kMagicLen = 8;

Shape conv1_w_shape(const NetworkShape& s) {
  return {s.conv1_channels, 1, NetworkShape::kConv1Kernel, NetworkShape::kConv1Kernel};
}
Shape conv2_w_shape(const NetworkShape& s) {
  return {s.conv2_channels, s.conv1_channels, NetworkShape::kConv2Kernel, NetworkShape::kConv2Kernel};
}
Shape fc_w_shape(const NetworkShape& s) { return {s.descriptor_dim, s.flatten_size()}; }

template <typename T>
void check_params(const BasicNetworkParams<T>& p) {
  const NetworkShape& s = p.shape;
  validate(s);
  auto expect = [](const char* name, const Shape& want, const Shape& got) {
    if (!(want == got)) throw ShapeError("NetworkParams", std::string(name) + " expected " + want.str() + ", got " + got.str());
  };
  expect("conv1_w", conv1_w_shape(s), p.conv1_w.shape());
  expect("conv1_b", Shape{s.conv1_channels}, p.conv1_b.shape());
  expect("conv2_w", conv2_w_shape(s), p.conv2_w.shape());
  expect("conv2_b", Shape{s.conv2_channels}, p.conv2_b.shape());
  expect("fc_w", fc_w_shape(s), p.fc_w.shape());
  expect("fc_b", Shape{s.descriptor_dim}, p.fc_b.shape());
}

template <typename T>
void check_patches(const char* op, const BasicTensor<T>& patches) {
  require_rank(op, patches.shape(), 4);
  require_extent(op, "channels", 1, patches.dim(1));
  require_extent(op, "rows", NetworkShape::kInputSize, patches.dim(2));
  require_extent(op, "cols", NetworkShape::kInputSize, patches.dim(3));
}

}  // namespace

void validate(const NetworkShape& shape) {
  if (shape.conv1_channels < 1 || shape.conv2_channels < 1 || shape.descriptor_dim < 1) {
    throw ConfigError("network shape: channel counts and descriptor dimension must be >= 1");
  }
}

template <typename T>
BasicNetworkParams<T> BasicNetworkParams<T>::zeros(const NetworkShape& s) {
  validate(s);
  return {s,
          BasicTensor<T>(conv1_w_shape(s)),
          BasicTensor<T>(Shape{s.conv1_channels}),
          BasicTensor<T>(conv2_w_shape(s)),
          BasicTensor<T>(Shape{s.conv2_channels}),
          BasicTensor<T>(fc_w_shape(s)),
          BasicTensor<T>(Shape{s.descriptor_dim})};
}

template <typename T>
std::size_t BasicNetworkParams<T>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const BasicTensor<T>& t) { n += t.size(); });
  return n;
}

template <typename T>
bool BasicNetworkParams<T>::all_finite() const {
  bool ok = true;
  for_each([&](const BasicTensor<T>& t) { ok = ok && t.all_finite(); });
  return ok;
}

template <typename T>
BasicTensor<T> BasicNetworkParams<T>::flatten() const {
  std::vector<T> flat;
  flat.reserve(parameter_count());
  for_each([&](const BasicTensor<T>& t) { flat.insert(flat.end(), t.data().begin(), t.data().end()); });
  const Shape shape{flat.size()};
  return BasicTensor<T>(shape, std::move(flat));
}

template <typename T>
BasicNetworkParams<T> BasicNetworkParams<T>::unflatten(const NetworkShape& shape, const BasicTensor<T>& flat) {
  BasicNetworkParams p = zeros(shape);
  require_extent("unflatten", "parameters", p.parameter_count(), flat.size());
  std::size_t pos = 0;
  p.for_each([&](BasicTensor<T>& t) {
    std::copy_n(flat.raw() + pos, t.size(), t.raw());
    pos += t.size();
  });
  return p;
}

NetworkParams init_params(std::uint64_t seed, const NetworkShape& shape) {
  NetworkParams p = NetworkParams::zeros(shape);
  std::mt19937_64 rng(seed);
  auto fill = [&](Tensor& t, std::size_t fan_in) {
    const float bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
    std::uniform_real_distribution<float> dist(-bound, bound);
    for (float& v : t.data()) v = dist(rng);
  };
  const std::size_t fan1 = NetworkShape::kConv1Kernel * NetworkShape::kConv1Kernel;
  const std::size_t fan2 = shape.conv1_channels * NetworkShape::kConv2Kernel * NetworkShape::kConv2Kernel;
  fill(p.conv1_w, fan1);
  fill(p.conv1_b, fan1);
  fill(p.conv2_w, fan2);
  fill(p.conv2_b, fan2);
  fill(p.fc_w, shape.flatten_size());
  fill(p.fc_b, shape.flatten_size());
  return p;
}

NetworkParams init_params(std::uint64_t seed, std::size_t descriptor_dim) {
  if (descriptor_dim < 1) throw ConfigError("descriptor dimension must be >= 1");
  return init_params(seed, NetworkShape::full(descriptor_dim));
}

template <typename T>
ForwardCache<T> forward(const BasicNetworkParams<T>& params, const BasicTensor<T>& patches) {
  check_patches("describe", patches);
  check_params(params);
  const std::size_t batch = patches.dim(0);
  ForwardCache<T> cache;
  cache.input = patches;
  cache.conv1_act = tanh_forward(conv2d_forward(patches, params.conv1_w, params.conv1_b));
  cache.pool = maxpool2_forward(cache.conv1_act);
  cache.conv2_act = tanh_forward(conv2d_forward(cache.pool.output, params.conv2_w, params.conv2_b));
  cache.flat = cache.conv2_act.reshaped(Shape{batch, params.shape.flatten_size()});
  cache.output = tanh_forward(linear_forward(cache.flat, params.fc_w, params.fc_b));
  return cache;
}

template <typename T>
BasicNetworkParams<T> backward(const BasicNetworkParams<T>& params, const ForwardCache<T>& cache,
                               const BasicTensor<T>& grad_output) {
  if (!(grad_output.shape() == cache.output.shape())) {
    throw ShapeError("backward", "upstream " + grad_output.shape().str() + " vs descriptors " +
                                     cache.output.shape().str());
  }
  BasicNetworkParams<T> grads;
  grads.shape = params.shape;

  const BasicTensor<T> g_fc = tanh_backward(cache.output, grad_output);
  LinearGrads<T> lin = linear_backward(cache.flat, params.fc_w, g_fc);
  grads.fc_w = std::move(lin.grad_weight);
  grads.fc_b = std::move(lin.grad_bias);

  const BasicTensor<T> g_conv2 = tanh_backward(cache.conv2_act, lin.grad_input.reshaped(cache.conv2_act.shape()));
  Conv2dGrads<T> c2 = conv2d_backward(cache.pool.output, params.conv2_w, g_conv2);
  grads.conv2_w = std::move(c2.grad_weight);
  grads.conv2_b = std::move(c2.grad_bias);

  const BasicTensor<T> g_pool = maxpool2_backward(cache.pool.argmax, c2.grad_input);
  const BasicTensor<T> g_conv1 = tanh_backward(cache.conv1_act, g_pool);
  Conv2dGrads<T> c1 = conv2d_backward(cache.input, params.conv1_w, g_conv1, /*need_input_grad=*/false);
  grads.conv1_w = std::move(c1.grad_weight);
  grads.conv1_b = std::move(c1.grad_bias);
  return grads;
}

template <typename T>
BasicTensor<T> describe(const BasicNetworkParams<T>& params, const BasicTensor<T>& patches) {
  return forward(params, patches).output;
}

template <typename T>
TripletDescriptors<T> describe_triplet(const BasicNetworkParams<T>& params, const BasicTensor<T>& p1,
                                       const BasicTensor<T>& p2, const BasicTensor<T>& n) {
  check_patches("describe_triplet", p1);
  check_patches("describe_triplet", p2);
  check_patches("describe_triplet", n);
  require_extent("describe_triplet", "batch", p1.dim(0), p2.dim(0));
  require_extent("describe_triplet", "batch", p1.dim(0), n.dim(0));
  return {describe(params, p1), describe(params, p2), describe(params, n)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  check_params(ckpt.params);
  if (!ckpt.params.all_finite()) throw NumericError("save_checkpoint: non-finite parameters");
  if (ckpt.velocity) {
    check_params(*ckpt.velocity);
    if (!(ckpt.velocity->shape == ckpt.params.shape)) {
      throw ShapeError("save_checkpoint", "velocity shape does not mirror the parameters");
    }
  }
  const NetworkShape& s = ckpt.params.shape;
  detail::ByteWriter w;
  w.put_chars(std::string_view(kCheckpointMagic, kMagicLen));
  w.put_u8(kCheckpointVersion);
  w.put_u32(static_cast<std::uint32_t>(s.descriptor_dim));
  w.put_u32(static_cast<std::uint32_t>(s.conv1_channels));
  w.put_u32(static_cast<std::uint32_t>(s.conv2_channels));
  w.put_u64(ckpt.seed);
  w.put_u32(ckpt.epoch);
  w.put_u8(ckpt.velocity ? 1 : 0);
  ckpt.params.for_each([&](const Tensor& t) { w.put_f32s(t.data()); });
  if (ckpt.velocity) ckpt.velocity->for_each([&](const Tensor& t) { w.put_f32s(t.data()); });
  w.put_u32(detail::crc32_of(w.bytes()));
  detail::write_file_atomic(path, w.bytes());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  const std::vector<std::uint8_t> bytes = detail::read_file(path);
  const std::string what = "checkpoint " + path.string();
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kCheckpointMagic, kMagicLen) != 0) {
    throw FormatError(what + ": bad magic");
  }
  if (bytes.size() < kMagicLen + 1 + 4) throw FormatError(what + ": truncated file");
  const std::uint8_t version = bytes[kMagicLen];
  if (version != kCheckpointVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  const std::span<const std::uint8_t> body(bytes.data(), bytes.size() - 4);
  detail::ByteReader trailer(std::span<const std::uint8_t>(bytes).subspan(bytes.size() - 4), what);
  const std::uint32_t stored_crc = trailer.get_u32();

  detail::ByteReader r(body, what);
  r.get_chars(kMagicLen);
  r.get_u8();
  NetworkShape shape;
  shape.descriptor_dim = r.get_u32();
  shape.conv1_channels = r.get_u32();
  shape.conv2_channels = r.get_u32();
  Checkpoint out;
  out.seed = r.get_u64();
  out.epoch = r.get_u32();
  const std::uint8_t has_velocity = r.get_u8();
  if (has_velocity > 1) throw FormatError(what + ": corrupt header");
  validate(shape);
  if (expected_dim && *expected_dim != shape.descriptor_dim) {
    throw ShapeError("load_checkpoint", "descriptor_dim", *expected_dim, shape.descriptor_dim);
  }

  NetworkParams params = NetworkParams::zeros(shape);
  const std::size_t payload = 4 * params.parameter_count() * (has_velocity ? 2 : 1);
  if (r.remaining() != payload) {
    throw FormatError(what + ": expected " + std::to_string(payload) + " payload bytes, found " +
                      std::to_string(r.remaining()));
  }
  if (detail::crc32_of(body) != stored_crc) throw FormatError(what + ": checksum mismatch");

  params.for_each([&](Tensor& t) { r.get_f32s(t.data()); });
  out.params = std::move(params);
  if (has_velocity) {
    NetworkParams velocity = NetworkParams::zeros(shape);
    velocity.for_each([&](Tensor& t) { r.get_f32s(t.data()); });
    out.velocity = std::move(velocity);
  }
  return out;
}

std::uint32_t checkpoint_hash(const std::filesystem::path& path) {
  return detail::crc32_of(detail::read_file(path));
}

template struct BasicNetworkParams<float>;
template struct BasicNetworkParams<double>;

#define PNNET_INSTANTIATE_MODEL(T)                                                                          \
  template ForwardCache<T> forward(const BasicNetworkParams<T>&, const BasicTensor<T>&);                  \
  template BasicNetworkParams<T> backward(const BasicNetworkParams<T>&, const ForwardCache<T>&,           \
                                          const BasicTensor<T>&);                                          \
  template BasicTensor<T> describe(const BasicNetworkParams<T>&, const BasicTensor<T>&);                  \
  template TripletDescriptors<T> describe_triplet(const BasicNetworkParams<T>&, const BasicTensor<T>&,    \
                                                  const BasicTensor<T>&, const BasicTensor<T>&);

PNNET_INSTANTIATE_MODEL(float)
PNNET_INSTANTIATE_MODEL(double)

#undef PNNET_INSTANTIATE_MODEL

}  // namespace pnnet
