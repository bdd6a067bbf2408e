#pragma once

#include <span>
#include <string>
#include <string_view>

namespace pnnet {

/// The three L2 distances of a triplet (p1, p2, n).
struct TripletDistances {
  double d_pos = 0;   // ||D(p1) - D(p2)||
  double d_neg1 = 0;  // ||D(p1) - D(n)||
  double d_neg2 = 0;  // ||D(p2) - D(n)||
};

/// Loss derivatives with respect to each triplet distance.
struct TripletDistanceGrads {
  double d_pos = 0;
  double d_neg1 = 0;
  double d_neg2 = 0;
};

/// -1 for a non-matching pair, +1 for a matching one.
class PairLabel {
 public:
  static PairLabel positive() { return PairLabel(1); }
  static PairLabel negative() { return PairLabel(-1); }
  /// Throws ConfigError unless value is -1 or +1.
  static PairLabel from_int(int value);

  int value() const noexcept { return value_; }
  bool is_positive() const noexcept { return value_ > 0; }
  bool operator==(const PairLabel&) const = default;

 private:
  explicit PairLabel(int v) : value_(v) {}
  int value_;
};

struct HingeConfig {
  double margin = 2.0;
};

/// The two squared terms of the soft-positive/negative objective, evaluated
/// at the positive distance and a single negative distance.
struct SoftPnTerms {
  double positive_term = 0;  // (e^dp / (e^dn + e^dp))^2
  double negative_term = 0;  // (e^dn / (e^dn + e^dp) - 1)^2
  double loss() const { return positive_term + negative_term; }
};

/// Both terms at (d_pos, d_neg) with a max-shifted softmax.
SoftPnTerms softpn_terms(double d_pos, double d_neg);

/// d/d(d_pos) of softpn_terms(d_pos, d_neg).loss(); the derivative with respect
/// to d_neg is its negation.
double softpn_terms_grad(double d_pos, double d_neg);

/// SoftPN: the two-term objective at (d_pos, min(d_neg1, d_neg2)).
double softpn_loss(const TripletDistances& t);

/// Subgradient of softpn_loss. Only the smaller negative receives gradient;
/// a tie routes it to d_neg1.
TripletDistanceGrads softpn_backward(const TripletDistances& t);

/// SoftMax-ratio baseline: the same objective with d_neg1 as the negative;
/// d_neg2 is ignored.
double softmax_ratio_loss(const TripletDistances& t);
TripletDistanceGrads softmax_ratio_backward(const TripletDistances& t);

/// Pairwise hinge embedding: distance for positives, max(0, margin - distance)
/// for negatives.
double hinge_embedding_loss(double distance, PairLabel label, const HingeConfig& cfg);
double hinge_embedding_backward(double distance, PairLabel label, const HingeConfig& cfg);

/// Mean of per-example losses. Throws ConfigError on an empty batch.
double batch_loss(std::span<const double> losses);

enum class LossKind { SoftPn, SoftMaxRatio, Hinge };

/// Accepts "softpn", "softmax-ratio" and "hinge".
LossKind parse_loss_kind(std::string_view name);
std::string_view loss_name(LossKind kind);

/// True for the losses trained on triplets rather than labelled pairs.
inline bool uses_triplets(LossKind kind) { return kind != LossKind::Hinge; }

}  // namespace pnnet
