#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "pnnet/losses.hpp"
#include "pnnet/tensor.hpp"

namespace pnnet {

inline constexpr std::size_t kStoredPatchSize = 64;
inline constexpr std::size_t kPatchPixels = kStoredPatchSize * kStoredPatchSize;

/// One stored patch: grayscale pixels in [0,1] and the 3D point it depicts.
struct PatchRecord {
  std::size_t patch_id = 0;
  std::int64_t point_id = 0;
  Tensor pixels;  // [1,64,64]
};

/// Immutable-after-build collection of 64x64 8-bit patches indexed 0..N-1,
/// grouped by point id.
class PatchCorpus {
 public:
  /// Appends a patch; `pixels` holds 64*64 bytes, row-major.
  void add(std::int64_t point_id, std::span<const std::uint8_t> pixels);

  std::size_t size() const { return point_ids_.size(); }
  bool empty() const { return point_ids_.empty(); }
  std::int64_t point_id(std::size_t patch) const { return point_ids_.at(patch); }
  std::span<const std::uint8_t> raw_pixels(std::size_t patch) const;
  PatchRecord record(std::size_t patch) const;

  /// Patch indices of each distinct point id, in order of first appearance.
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  /// Index into groups() of the point that owns `patch`.
  std::size_t group_of(std::size_t patch) const { return group_of_.at(patch); }
  /// Indices into groups() of points holding at least two patches.
  std::vector<std::size_t> matchable_groups() const;

 private:
  std::vector<std::int64_t> point_ids_;
  std::vector<std::uint8_t> pixels_;
  std::vector<std::size_t> group_of_;
  std::vector<std::vector<std::size_t>> groups_;
  std::unordered_map<std::int64_t, std::size_t> group_lookup_;
};

/// Reads a Photo Tour style directory: 1024x1024 bitmap sheets named
/// patches*.bmp holding 16x16 grids of 64x64 patches (sheet order, then
/// row-major), plus info.txt whose i-th line starts with patch i's point id.
PatchCorpus load_phototour(const std::filesystem::path& dir);

/// Writes `corpus` in the layout load_phototour reads.
void save_phototour(const std::filesystem::path& dir, const PatchCorpus& corpus);

/// Two patch indices and whether they share a point.
struct LabeledPair {
  std::size_t left = 0;
  std::size_t right = 0;
  PairLabel label = PairLabel::negative();
};

/// Rows "patchID1 pointID1 _ patchID2 pointID2 _"; the label is +1 iff the
/// point ids agree. With `corpus_size` set, ids must be below it.
std::vector<LabeledPair> load_pairs_file(const std::filesystem::path& path,
                                         std::optional<std::size_t> corpus_size = std::nullopt);

void save_pairs_file(const std::filesystem::path& path, const PatchCorpus& corpus,
                     std::span<const LabeledPair> pairs);

/// 2x2 average to 32x32, then per-patch zero mean / unit deviation
/// (deviation clamped at 1e-6, so a constant patch becomes all zeros).
Tensor normalize_patch(const Tensor& pixels);

/// Normalized network input [K,1,32,32] for the listed patches.
Tensor gather_normalized(const PatchCorpus& corpus, std::span<const std::size_t> patches);

/// Normalized 32x32 network inputs for a corpus, precomputed when the corpus
/// is small enough and recomputed on demand otherwise.
class NormalizedPatches {
 public:
  static constexpr std::size_t kDefaultCacheLimit = 32768;  // patches (4 KiB each)

  explicit NormalizedPatches(const PatchCorpus& corpus, std::size_t cache_limit = kDefaultCacheLimit);

  const PatchCorpus& corpus() const { return corpus_; }
  /// Writes the 1024 normalized values of `patch` to `dst`.
  void copy_to(std::size_t patch, float* dst) const;
  /// [K,1,32,32] for the listed patches.
  Tensor gather(std::span<const std::size_t> patches) const;

 private:
  const PatchCorpus& corpus_;
  std::vector<float> cache_;
};

/// (p1, p2) from one point, n from another; fields are patch indices.
struct Triplet {
  std::size_t p1 = 0;
  std::size_t p2 = 0;
  std::size_t n = 0;
};

/// Uniform matchable point, uniform distinct pair inside it, uniform negative
/// among patches of every other point. Owns its RNG; not shareable across threads.
class TripletSampler {
 public:
  TripletSampler(const PatchCorpus& corpus, std::uint64_t seed);
  Triplet next();

 private:
  const PatchCorpus& corpus_;
  std::vector<std::size_t> matchable_;
  std::mt19937_64 rng_;
};

/// Labelled pairs: positives as a triplet's (p1, p2), negatives as its (p1, n).
class PairSampler {
 public:
  PairSampler(const PatchCorpus& corpus, std::uint64_t seed, double positive_fraction = 1.0 / 3.0);
  LabeledPair next();

 private:
  const PatchCorpus& corpus_;
  std::vector<std::size_t> matchable_;
  std::mt19937_64 rng_;
  double positive_fraction_;
};

std::vector<Triplet> sample_triplets(const PatchCorpus& corpus, std::size_t count, std::uint64_t seed);
std::vector<LabeledPair> sample_pairs(const PatchCorpus& corpus, std::size_t count, std::uint64_t seed,
                                      double positive_fraction = 1.0 / 3.0);

/// Synthetic stand-in for a patch dataset: every point is a random texture
/// (sinusoids plus Gaussian blobs) and its patches are jittered views of it.
struct ToyCorpusSpec {
  std::size_t num_points = 128;
  std::size_t patches_per_point = 8;
  double translation_px = 4.0;  // uniform shift in +-pixels (64x64 frame)
  double rotation_deg = 20.0;   // uniform rotation in +-degrees about the centre
  double brightness = 0.2;      // uniform gain in 1 +- fraction
  double noise = 0.03;          // additive Gaussian pixel noise, std dev
  std::uint64_t seed = 1;
};

/// Throws ConfigError on fewer than 2 points or 2 patches per point, or a negative jitter.
void validate(const ToyCorpusSpec& spec);

PatchCorpus make_toy_corpus(const ToyCorpusSpec& spec);

}  // namespace pnnet
