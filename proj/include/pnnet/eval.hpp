#pragma once

// Pair-classification ROC (false positive rate at 95% recall) and
// nearest-neighbour matching precision/recall.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pnnet/losses.hpp"
#include "pnnet/tensor.hpp"

namespace pnnet {

struct ScoredPair {
  double distance = 0;
  PairLabel label = PairLabel::negative();
};

/// One operating point. For ROC curves x = FPR and y = TPR; for PR curves
/// x = recall and y = precision.
struct CurvePoint {
  double threshold = 0;
  double x = 0;
  double y = 0;
};

struct EvalCurve {
  std::vector<CurvePoint> points;  // thresholds ascending
  double summary = 0;              // fpr_at_95 or average precision
};

/// FPR at the smallest threshold t (pairs with distance <= t accepted) whose
/// TPR reaches 0.95. Throws ConfigError without both classes and
/// NumericError on a negative or non-finite distance.
double fpr_at_95_tpr(std::span<const ScoredPair> pairs);

/// (-inf, 0, 0) followed by one point per distinct distance, ascending.
EvalCurve roc_curve(std::span<const ScoredPair> pairs);

struct NnMatch {
  std::size_t index = 0;
  double distance = 0;
};

/// Exact L2 nearest neighbour in `right` (row-major, `dim` columns) for every
/// row of `left`; ties go to the lowest index.
std::vector<NnMatch> nn_match(std::span<const float> left, std::span<const float> right, std::size_t dim);
std::vector<NnMatch> nn_match(const Tensor& left, const Tensor& right);

/// Correspondences (left, right) between the regions of one image pair.
class OverlapGroundTruth {
 public:
  /// Returns false when the pair was already present.
  bool insert(std::size_t left, std::size_t right);
  bool contains(std::size_t left, std::size_t right) const;
  std::size_t size() const { return pairs_.size(); }
  /// Number of distinct left indices with at least one correspondence.
  std::size_t matchable_left() const;
  std::size_t max_left() const;
  std::size_t max_right() const;
  const std::vector<std::pair<std::size_t, std::size_t>>& pairs() const { return pairs_; }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pairs_;  // sorted, unique
};

struct GroundTruthLoad {
  OverlapGroundTruth gt;
  std::size_t rejected = 0;    // rows with overlap error >= 0.5
  std::size_t duplicates = 0;  // repeated (left, right) rows
};

/// Rows "left_index right_index overlap_error". Malformed rows raise
/// ParseError with their line number.
GroundTruthLoad load_overlap_gt(const std::filesystem::path& path);

/// Precision/recall over acceptance thresholds on the NN distance. A match
/// (i -> j) is correct iff (i, j) is in `gt`; recall is relative to the left
/// patches with at least one correspondence. Starts at (recall 0,
/// precision 1); summary is the trapezoidal area under the curve.
EvalCurve pr_curve(std::span<const NnMatch> matches, const OverlapGroundTruth& gt, std::size_t right_count);

struct ApRow {
  std::string sequence;
  std::string image_pair;
  double ap = 0;
};

struct MapTable {
  std::vector<std::pair<std::string, double>> per_sequence;  // first-appearance order
  double overall = 0;                                          // mean over all image pairs
};

MapTable mean_ap(std::span<const ApRow> rows);

// CSV writers. Each starts with a "# pnnet <version>" line, then a column row.
void write_roc_csv(std::ostream& out, const EvalCurve& roc);
void write_pr_csv(std::ostream& out, const EvalCurve& pr);
void write_map_csv(std::ostream& out, std::span<const ApRow> rows, const MapTable& table);

}  // namespace pnnet
