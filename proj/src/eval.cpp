#include "pnnet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "pnnet/error.hpp"
#include "pnnet/ops.hpp"
#include "pnnet/version.hpp"

namespace pnnet {

namespace {

struct SortedPairs {
  std::vector<ScoredPair> pairs;  // ascending distance
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

SortedPairs sort_pairs(const char* op, std::span<const ScoredPair> pairs) {
  SortedPairs s{std::vector<ScoredPair>(pairs.begin(), pairs.end()), 0, 0};
  for (const ScoredPair& p : s.pairs) {
    if (!std::isfinite(p.distance) || p.distance < 0) {
      throw NumericError(std::string(op) + ": distances must be finite and non-negative");
    }
    (p.label.is_positive() ? s.positives : s.negatives) += 1;
  }
  if (s.positives == 0 || s.negatives == 0) {
    throw ConfigError(std::string(op) + ": needs at least one positive and one negative pair");
  }
  std::stable_sort(s.pairs.begin(), s.pairs.end(),
                   [](const ScoredPair& a, const ScoredPair& b) { return a.distance < b.distance; });
  return s;
}

// Calls fn(threshold, tp, fp) once per distinct distance, ascending, with
// counts that include every pair at that distance.
template <typename Fn>
void sweep(const SortedPairs& s, Fn&& fn) {
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < s.pairs.size();) {
    const double t = s.pairs[i].distance;
    for (; i < s.pairs.size() && s.pairs[i].distance == t; ++i) (s.pairs[i].label.is_positive() ? tp : fp) += 1;
    if (!fn(t, tp, fp)) return;
  }
}

std::string number(double v) {
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void version_line(std::ostream& out) { out << "# pnnet " << kVersion << '\n'; }

}  // namespace

double fpr_at_95_tpr(std::span<const ScoredPair> pairs) {
  const SortedPairs s = sort_pairs("fpr_at_95_tpr", pairs);
  double result = 1.0;
  sweep(s, [&](double, std::size_t tp, std::size_t fp) {
    // TPR >= 0.95 in integers: 20 * tp >= 19 * P.
    if (20 * tp >= 19 * s.positives) {
      result = static_cast<double>(fp) / static_cast<double>(s.negatives);
      return false;
    }
    return true;
  });
  return result;
}

EvalCurve roc_curve(std::span<const ScoredPair> pairs) {
  const SortedPairs s = sort_pairs("roc_curve", pairs);
  EvalCurve curve;
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 0.0});
  sweep(s, [&](double t, std::size_t tp, std::size_t fp) {
    curve.points.push_back({t, static_cast<double>(fp) / static_cast<double>(s.negatives),
                            static_cast<double>(tp) / static_cast<double>(s.positives)});
    return true;
  });
  curve.summary = fpr_at_95_tpr(pairs);
  return curve;
}

std::vector<NnMatch> nn_match(std::span<const float> left, std::span<const float> right, std::size_t dim) {
  if (dim == 0) throw ShapeError("nn_match", "descriptor dimension is zero");
  if (left.size() % dim != 0) throw ShapeError("nn_match", "left descriptors are not a whole number of rows");
  if (right.size() % dim != 0) throw ShapeError("nn_match", "right descriptors are not a whole number of rows");
  const std::size_t nl = left.size() / dim, nr = right.size() / dim;
  if (nr == 0) throw ConfigError("nn_match: right descriptor set is empty");
  std::vector<NnMatch> out(nl);
  for (std::size_t i = 0; i < nl; ++i) {
    const auto a = left.subspan(i * dim, dim);
    NnMatch best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t j = 0; j < nr; ++j) {
      const double d = l2_distance<float>(a, right.subspan(j * dim, dim));
      if (d < best.distance) best = {j, d};
    }
    out[i] = best;
  }
  return out;
}

std::vector<NnMatch> nn_match(const Tensor& left, const Tensor& right) {
  require_rank("nn_match", left.shape(), 2);
  require_rank("nn_match", right.shape(), 2);
  require_extent("nn_match", "descriptor_dim", left.dim(1), right.dim(1));
  return nn_match(left.data(), right.data(), left.dim(1));
}

bool OverlapGroundTruth::insert(std::size_t left, std::size_t right) {
  const std::pair<std::size_t, std::size_t> key{left, right};
  const auto it = std::lower_bound(pairs_.begin(), pairs_.end(), key);
  if (it != pairs_.end() && *it == key) return false;
  pairs_.insert(it, key);
  return true;
}

bool OverlapGroundTruth::contains(std::size_t left, std::size_t right) const {
  return std::binary_search(pairs_.begin(), pairs_.end(), std::pair<std::size_t, std::size_t>{left, right});
}

std::size_t OverlapGroundTruth::matchable_left() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < pairs_.size(); ++i) count += i == 0 || pairs_[i].first != pairs_[i - 1].first;
  return count;
}

std::size_t OverlapGroundTruth::max_left() const { return pairs_.empty() ? 0 : pairs_.back().first; }

std::size_t OverlapGroundTruth::max_right() const {
  std::size_t m = 0;
  for (const auto& p : pairs_) m = std::max(m, p.second);
  return m;
}

GroundTruthLoad load_overlap_gt(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ground truth file " + path.string());
  GroundTruthLoad load;
  std::string line;
  // Collected first so insertion is a single sort.
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    long long left = -1, right = -1;
    double overlap = 0;
    std::string extra;
    std::istringstream row(line);
    if (!(row >> left >> right >> overlap) || (row >> extra) || left < 0 || right < 0) {
      throw ParseError(path.string(), line_no, "expected 'left_index right_index overlap_error'");
    }
    if (!std::isfinite(overlap) || overlap < 0) throw ParseError(path.string(), line_no, "overlap error must be >= 0");
    if (overlap >= 0.5) {
      ++load.rejected;
      continue;
    }
    rows.emplace_back(static_cast<std::size_t>(left), static_cast<std::size_t>(right));
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i] == rows[i - 1]) {
      ++load.duplicates;
    } else {
      load.gt.insert(rows[i].first, rows[i].second);
    }
  }
  return load;
}

EvalCurve pr_curve(std::span<const NnMatch> matches, const OverlapGroundTruth& gt, std::size_t right_count) {
  const std::size_t matchable = gt.matchable_left();
  if (matchable == 0) throw ConfigError("pr_curve: ground truth has no matchable left patches");
  if (gt.max_left() >= matches.size()) {
    throw ConfigError("pr_curve: ground truth left index " + std::to_string(gt.max_left()) + " out of range for " +
                      std::to_string(matches.size()) + " matches");
  }
  if (gt.max_right() >= right_count) {
    throw ConfigError("pr_curve: ground truth right index " + std::to_string(gt.max_right()) + " out of range for " +
                      std::to_string(right_count) + " right patches");
  }
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].index >= right_count) {
      throw ConfigError("pr_curve: match index " + std::to_string(matches[i].index) + " out of range");
    }
    if (!std::isfinite(matches[i].distance)) throw NumericError("pr_curve: non-finite match distance");
    scored.emplace_back(matches[i].distance, gt.contains(i, matches[i].index));
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  EvalCurve curve;
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 0.0, 1.0});
  std::size_t tp = 0, accepted = 0;
  for (std::size_t i = 0; i < scored.size();) {
    const double t = scored[i].first;
    for (; i < scored.size() && scored[i].first == t; ++i, ++accepted) tp += scored[i].second;
    curve.points.push_back({t, static_cast<double>(tp) / static_cast<double>(matchable),
                            static_cast<double>(tp) / static_cast<double>(accepted)});
  }
  double area = 0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const CurvePoint& a = curve.points[i - 1];
    const CurvePoint& b = curve.points[i];
    area += (b.x - a.x) * (a.y + b.y) / 2.0;
  }
  curve.summary = area;
  return curve;
}

MapTable mean_ap(std::span<const ApRow> rows) {
  if (rows.empty()) throw ConfigError("mean_ap: no image pairs");
  MapTable table;
  std::vector<std::size_t> counts;
  double total = 0;
  for (const ApRow& r : rows) {
    auto it = std::find_if(table.per_sequence.begin(), table.per_sequence.end(),
                           [&](const auto& e) { return e.first == r.sequence; });
    if (it == table.per_sequence.end()) {
      table.per_sequence.emplace_back(r.sequence, 0.0);
      counts.push_back(0);
      it = table.per_sequence.end() - 1;
    }
    const auto k = static_cast<std::size_t>(it - table.per_sequence.begin());
    it->second += r.ap;
    ++counts[k];
    total += r.ap;
  }
  for (std::size_t k = 0; k < counts.size(); ++k) table.per_sequence[k].second /= static_cast<double>(counts[k]);
  table.overall = total / static_cast<double>(rows.size());
  return table;
}

void write_roc_csv(std::ostream& out, const EvalCurve& roc) {
  version_line(out);
  out << "# fpr_at_95=" << number(roc.summary) << '\n';
  out << "threshold,fpr,tpr\n";
  for (const CurvePoint& p : roc.points) out << number(p.threshold) << ',' << number(p.x) << ',' << number(p.y) << '\n';
}

void write_pr_csv(std::ostream& out, const EvalCurve& pr) {
  version_line(out);
  out << "# recall denominator: left patches with at least one correspondence\n";
  out << "# average_precision=" << number(pr.summary) << '\n';
  out << "threshold,recall,precision\n";
  for (const CurvePoint& p : pr.points) out << number(p.threshold) << ',' << number(p.x) << ',' << number(p.y) << '\n';
}

void write_map_csv(std::ostream& out, std::span<const ApRow> rows, const MapTable& table) {
  version_line(out);
  out << "sequence,image_pair,ap\n";
  for (const ApRow& r : rows) out << r.sequence << ',' << r.image_pair << ',' << number(r.ap) << '\n';
  for (const auto& [seq, m] : table.per_sequence) out << seq << ",mean," << number(m) << '\n';
  out << "all,mean," << number(table.overall) << '\n';
}

}  // namespace pnnet
