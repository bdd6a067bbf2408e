#include "pnnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pnnet/error.hpp"

namespace pnnet {

namespace {

void require_finite(const TripletDistances& t, const char* op) {
  if (!std::isfinite(t.d_pos) || !std::isfinite(t.d_neg1) || !std::isfinite(t.d_neg2)) {
    throw NumericError(std::string(op) + ": non-finite distance");
  }
}

void require_distance(double d, const char* op) {
  if (!std::isfinite(d) || d < 0) throw NumericError(std::string(op) + ": distance must be finite and >= 0");
}

struct Softmax2 {
  double pos;
  double neg;
};

Softmax2 softmax2(double d_pos, double d_neg) {
  const double shift = std::max(d_pos, d_neg);
  const double e_pos = std::exp(d_pos - shift);
  const double e_neg = std::exp(d_neg - shift);
  const double z = e_pos + e_neg;
  return {e_pos / z, e_neg / z};
}

}  // namespace

PairLabel PairLabel::from_int(int value) {
  if (value != 1 && value != -1) {
    throw ConfigError("pair label must be -1 or +1, got " + std::to_string(value));
  }
  return PairLabel(value);
}

SoftPnTerms softpn_terms(double d_pos, double d_neg) {
  const Softmax2 s = softmax2(d_pos, d_neg);
  const double neg_gap = s.neg - 1.0;
  return {s.pos * s.pos, neg_gap * neg_gap};
}

double softpn_terms_grad(double d_pos, double d_neg) {
  // ds_pos/dd_pos = s_pos*s_neg and ds_neg/dd_pos = -s_pos*s_neg.
  const Softmax2 s = softmax2(d_pos, d_neg);
  const double cross = s.pos * s.neg;
  return 2.0 * s.pos * cross - 2.0 * (s.neg - 1.0) * cross;
}

double softpn_loss(const TripletDistances& t) {
  require_finite(t, "softpn_loss");
  return softpn_terms(t.d_pos, std::min(t.d_neg1, t.d_neg2)).loss();
}

TripletDistanceGrads softpn_backward(const TripletDistances& t) {
  require_finite(t, "softpn_backward");
  const bool first = t.d_neg1 <= t.d_neg2;
  const double g = softpn_terms_grad(t.d_pos, first ? t.d_neg1 : t.d_neg2);
  TripletDistanceGrads out;
  out.d_pos = g;
  (first ? out.d_neg1 : out.d_neg2) = -g;
  return out;
}

double softmax_ratio_loss(const TripletDistances& t) {
  require_finite(t, "softmax_ratio_loss");
  return softpn_terms(t.d_pos, t.d_neg1).loss();
}

TripletDistanceGrads softmax_ratio_backward(const TripletDistances& t) {
  require_finite(t, "softmax_ratio_backward");
  const double g = softpn_terms_grad(t.d_pos, t.d_neg1);
  return {g, -g, 0.0};
}

double hinge_embedding_loss(double distance, PairLabel label, const HingeConfig& cfg) {
  require_distance(distance, "hinge_embedding_loss");
  if (label.is_positive()) return distance;
  return std::max(0.0, cfg.margin - distance);
}

double hinge_embedding_backward(double distance, PairLabel label, const HingeConfig& cfg) {
  require_distance(distance, "hinge_embedding_backward");
  if (label.is_positive()) return 1.0;
  return distance < cfg.margin ? -1.0 : 0.0;
}

double batch_loss(std::span<const double> losses) {
  if (losses.empty()) throw ConfigError("batch_loss: empty batch");
  return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "softpn") return LossKind::SoftPn;
  if (name == "softmax-ratio") return LossKind::SoftMaxRatio;
  if (name == "hinge") return LossKind::Hinge;
  throw ConfigError("unknown loss '" + std::string(name) + "' (expected softpn, softmax-ratio or hinge)");
}

std::string_view loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::SoftPn:
      return "softpn";
    case LossKind::SoftMaxRatio:
      return "softmax-ratio";
    case LossKind::Hinge:
      return "hinge";
  }
  return "unknown";
}

}  // namespace pnnet
