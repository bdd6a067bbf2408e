#include "pnnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "bmp.hpp"

namespace pnnet {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSheetSize = 1024;
constexpr std::size_t kGrid = kSheetSize / kStoredPatchSize;  // 16
constexpr std::size_t kPatchesPerSheet = kGrid * kGrid;        // 256
constexpr std::size_t kNetworkInput = kStoredPatchSize / 2;    // 32

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  return tokens;
}

template <typename Int>
bool parse_int(const std::string& tok, Int& out) {
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<fs::path> sheet_files(const fs::path& dir) {
  std::vector<fs::path> sheets;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("patches", 0) == 0 && entry.path().extension() == ".bmp") {
      sheets.push_back(entry.path());
    }
  }
  std::sort(sheets.begin(), sheets.end());
  return sheets;
}

}  // namespace

void PatchCorpus::add(std::int64_t point_id, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != kPatchPixels) {
    throw ShapeError("PatchCorpus::add", "pixels", kPatchPixels, pixels.size());
  }
  const std::size_t patch = point_ids_.size();
  point_ids_.push_back(point_id);
  pixels_.insert(pixels_.end(), pixels.begin(), pixels.end());
  auto [it, inserted] = group_lookup_.try_emplace(point_id, groups_.size());
  if (inserted) groups_.emplace_back();
  groups_[it->second].push_back(patch);
  group_of_.push_back(it->second);
}

std::span<const std::uint8_t> PatchCorpus::raw_pixels(std::size_t patch) const {
  if (patch >= size()) throw ConfigError("patch index " + std::to_string(patch) + " out of range");
  return std::span<const std::uint8_t>(pixels_).subspan(patch * kPatchPixels, kPatchPixels);
}

PatchRecord PatchCorpus::record(std::size_t patch) const {
  const auto raw = raw_pixels(patch);
  Tensor pixels(Shape{1, kStoredPatchSize, kStoredPatchSize});
  for (std::size_t i = 0; i < kPatchPixels; ++i) pixels[i] = static_cast<float>(raw[i]) / 255.0f;
  return {patch, point_ids_[patch], std::move(pixels)};
}

std::vector<std::size_t> PatchCorpus::matchable_groups() const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].size() >= 2) out.push_back(g);
  }
  return out;
}

PatchCorpus load_phototour(const fs::path& dir) {
  const fs::path info_path = dir / "info.txt";
  std::ifstream info(info_path);
  if (!info) throw IoError("missing info file " + info_path.string());
  std::vector<std::int64_t> point_ids;
  std::string line;
  for (std::size_t line_no = 1; std::getline(info, line); ++line_no) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    std::int64_t id = 0;
    if (!parse_int(tokens[0], id)) throw ParseError(info_path.string(), line_no, "expected an integer point id");
    point_ids.push_back(id);
  }

  const std::vector<fs::path> sheets = sheet_files(dir);
  const std::size_t needed = (point_ids.size() + kPatchesPerSheet - 1) / kPatchesPerSheet;
  if (sheets.size() != needed) {
    throw FormatError("patch count mismatch in " + dir.string() + ": info lists " + std::to_string(point_ids.size()) +
                      " patches, which needs " + std::to_string(needed) + " sheets, found " +
                      std::to_string(sheets.size()));
  }

  PatchCorpus corpus;
  std::vector<std::uint8_t> patch(kPatchPixels);
  std::size_t next = 0;
  for (const fs::path& sheet_path : sheets) {
    const detail::GrayImage sheet = detail::read_bmp(sheet_path);
    if (sheet.width != kSheetSize || sheet.height != kSheetSize) {
      throw FormatError(sheet_path.string() + ": expected a 1024x1024 sheet");
    }
    for (std::size_t cell = 0; cell < kPatchesPerSheet && next < point_ids.size(); ++cell, ++next) {
      const std::size_t x0 = (cell % kGrid) * kStoredPatchSize, y0 = (cell / kGrid) * kStoredPatchSize;
      for (std::size_t y = 0; y < kStoredPatchSize; ++y) {
        for (std::size_t x = 0; x < kStoredPatchSize; ++x) patch[y * kStoredPatchSize + x] = sheet.at(x0 + x, y0 + y);
      }
      corpus.add(point_ids[next], patch);
    }
  }
  return corpus;
}

void save_phototour(const fs::path& dir, const PatchCorpus& corpus) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  const std::size_t sheets = (corpus.size() + kPatchesPerSheet - 1) / kPatchesPerSheet;
  for (std::size_t s = 0; s < sheets; ++s) {
    detail::GrayImage img{kSheetSize, kSheetSize, std::vector<std::uint8_t>(kSheetSize * kSheetSize, 0)};
    for (std::size_t cell = 0; cell < kPatchesPerSheet; ++cell) {
      const std::size_t patch = s * kPatchesPerSheet + cell;
      if (patch >= corpus.size()) break;
      const auto raw = corpus.raw_pixels(patch);
      const std::size_t x0 = (cell % kGrid) * kStoredPatchSize, y0 = (cell / kGrid) * kStoredPatchSize;
      for (std::size_t y = 0; y < kStoredPatchSize; ++y) {
        std::copy_n(raw.data() + y * kStoredPatchSize, kStoredPatchSize, img.pixels.data() + (y0 + y) * kSheetSize + x0);
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "patches%04zu.bmp", s);
    detail::write_bmp(dir / name, img);
  }
  std::ofstream info(dir / "info.txt", std::ios::trunc);
  if (!info) throw IoError("cannot write " + (dir / "info.txt").string());
  for (std::size_t i = 0; i < corpus.size(); ++i) info << corpus.point_id(i) << " 0\n";
  if (!info) throw IoError("write failed: " + (dir / "info.txt").string());
}

std::vector<LabeledPair> load_pairs_file(const fs::path& path, std::optional<std::size_t> corpus_size) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pairs file " + path.string());
  std::vector<LabeledPair> pairs;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (tokens.size() != 6) {
      throw ParseError(path.string(), line_no, "expected 6 columns, found " + std::to_string(tokens.size()));
    }
    std::size_t left = 0, right = 0;
    std::int64_t left_point = 0, right_point = 0;
    if (!parse_int(tokens[0], left) || !parse_int(tokens[1], left_point) || !parse_int(tokens[3], right) ||
        !parse_int(tokens[4], right_point)) {
      throw ParseError(path.string(), line_no, "malformed row");
    }
    if (corpus_size && (left >= *corpus_size || right >= *corpus_size)) {
      throw ParseError(path.string(), line_no,
                       "patch id " + std::to_string(std::max(left, right)) + " outside corpus of " +
                           std::to_string(*corpus_size));
    }
    pairs.push_back({left, right, left_point == right_point ? PairLabel::positive() : PairLabel::negative()});
  }
  return pairs;
}

void save_pairs_file(const fs::path& path, const PatchCorpus& corpus, std::span<const LabeledPair> pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const LabeledPair& p : pairs) {
    out << p.left << ' ' << corpus.point_id(p.left) << " 0 " << p.right << ' ' << corpus.point_id(p.right) << " 0\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Tensor normalize_patch(const Tensor& pixels) {
  require_rank("normalize_patch", pixels.shape(), 3);
  require_extent("normalize_patch", "channels", 1, pixels.dim(0));
  require_extent("normalize_patch", "rows", kStoredPatchSize, pixels.dim(1));
  require_extent("normalize_patch", "cols", kStoredPatchSize, pixels.dim(2));
  std::vector<double> small(kNetworkInput * kNetworkInput);
  double mean = 0;
  for (std::size_t y = 0; y < kNetworkInput; ++y) {
    for (std::size_t x = 0; x < kNetworkInput; ++x) {
      const float* top = pixels.raw() + (2 * y) * kStoredPatchSize + 2 * x;
      const double v = (static_cast<double>(top[0]) + top[1] + top[kStoredPatchSize] + top[kStoredPatchSize + 1]) / 4.0;
      small[y * kNetworkInput + x] = v;
      mean += v;
    }
  }
  mean /= static_cast<double>(small.size());
  double var = 0;
  for (double v : small) var += (v - mean) * (v - mean);
  const double sigma = std::max(std::sqrt(var / static_cast<double>(small.size())), 1e-6);
  Tensor out(Shape{1, kNetworkInput, kNetworkInput});
  for (std::size_t i = 0; i < small.size(); ++i) out[i] = static_cast<float>((small[i] - mean) / sigma);
  return out;
}

Tensor gather_normalized(const PatchCorpus& corpus, std::span<const std::size_t> patches) {
  if (patches.empty()) throw ShapeError("gather_normalized", "empty patch list");
  const std::size_t plane = kNetworkInput * kNetworkInput;
  Tensor batch(Shape{patches.size(), 1, kNetworkInput, kNetworkInput});
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const Tensor n = normalize_patch(corpus.record(patches[i]).pixels);
    std::copy(n.data().begin(), n.data().end(), batch.raw() + i * plane);
  }
  return batch;
}

NormalizedPatches::NormalizedPatches(const PatchCorpus& corpus, std::size_t cache_limit) : corpus_(corpus) {
  if (corpus.size() > cache_limit) return;
  const std::size_t plane = kNetworkInput * kNetworkInput;
  cache_.resize(corpus.size() * plane);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const Tensor n = normalize_patch(corpus.record(i).pixels);
    std::copy(n.data().begin(), n.data().end(), cache_.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
}

void NormalizedPatches::copy_to(std::size_t patch, float* dst) const {
  const std::size_t plane = kNetworkInput * kNetworkInput;
  if (!cache_.empty()) {
    if (patch >= corpus_.size()) throw ConfigError("patch index " + std::to_string(patch) + " out of range");
    std::copy_n(cache_.data() + patch * plane, plane, dst);
    return;
  }
  const Tensor n = normalize_patch(corpus_.record(patch).pixels);
  std::copy(n.data().begin(), n.data().end(), dst);
}

Tensor NormalizedPatches::gather(std::span<const std::size_t> patches) const {
  if (patches.empty()) throw ShapeError("NormalizedPatches::gather", "empty patch list");
  const std::size_t plane = kNetworkInput * kNetworkInput;
  Tensor batch(Shape{patches.size(), 1, kNetworkInput, kNetworkInput});
  for (std::size_t i = 0; i < patches.size(); ++i) copy_to(patches[i], batch.raw() + i * plane);
  return batch;
}

namespace {

std::vector<std::size_t> require_sampling_corpus(const PatchCorpus& corpus, const char* who) {
  if (corpus.groups().size() < 2) throw ConfigError(std::string(who) + ": corpus needs at least two point groups");
  std::vector<std::size_t> matchable = corpus.matchable_groups();
  if (matchable.empty()) throw ConfigError(std::string(who) + ": corpus has no point with two or more patches");
  return matchable;
}

std::size_t draw(std::mt19937_64& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }

// Uniform positive pair from a uniform matchable point.
std::pair<std::size_t, std::size_t> draw_positive(std::mt19937_64& rng, const PatchCorpus& corpus,
                                                  const std::vector<std::size_t>& matchable) {
  const auto& members = corpus.groups()[matchable[draw(rng, matchable.size())]];
  const std::size_t i = draw(rng, members.size());
  std::size_t j = draw(rng, members.size() - 1);
  if (j >= i) ++j;
  return {members[i], members[j]};
}

std::size_t draw_negative(std::mt19937_64& rng, const PatchCorpus& corpus, std::size_t anchor) {
  const std::size_t group = corpus.group_of(anchor);
  for (;;) {
    const std::size_t n = draw(rng, corpus.size());
    if (corpus.group_of(n) != group) return n;
  }
}

}  // namespace

TripletSampler::TripletSampler(const PatchCorpus& corpus, std::uint64_t seed)
    : corpus_(corpus), matchable_(require_sampling_corpus(corpus, "TripletSampler")), rng_(seed) {}

Triplet TripletSampler::next() {
  const auto [p1, p2] = draw_positive(rng_, corpus_, matchable_);
  return {p1, p2, draw_negative(rng_, corpus_, p1)};
}

PairSampler::PairSampler(const PatchCorpus& corpus, std::uint64_t seed, double positive_fraction)
    : corpus_(corpus),
      matchable_(require_sampling_corpus(corpus, "PairSampler")),
      rng_(seed),
      positive_fraction_(positive_fraction) {
  if (!(positive_fraction >= 0.0 && positive_fraction <= 1.0)) {
    throw ConfigError("positive_fraction must lie in [0,1]");
  }
}

LabeledPair PairSampler::next() {
  const bool positive = std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < positive_fraction_;
  const auto [p1, p2] = draw_positive(rng_, corpus_, matchable_);
  if (positive) return {p1, p2, PairLabel::positive()};
  return {p1, draw_negative(rng_, corpus_, p1), PairLabel::negative()};
}

std::vector<Triplet> sample_triplets(const PatchCorpus& corpus, std::size_t count, std::uint64_t seed) {
  TripletSampler sampler(corpus, seed);
  std::vector<Triplet> out(count);
  for (auto& t : out) t = sampler.next();
  return out;
}

std::vector<LabeledPair> sample_pairs(const PatchCorpus& corpus, std::size_t count, std::uint64_t seed,
                                      double positive_fraction) {
  PairSampler sampler(corpus, seed, positive_fraction);
  std::vector<LabeledPair> out(count);
  for (auto& p : out) p = sampler.next();
  return out;
}

void validate(const ToyCorpusSpec& spec) {
  if (spec.num_points < 2) throw ConfigError("toy corpus needs at least 2 points");
  if (spec.patches_per_point < 2) throw ConfigError("toy corpus needs at least 2 patches per point");
  for (double j : {spec.translation_px, spec.rotation_deg, spec.brightness, spec.noise}) {
    if (!(j >= 0.0) || !std::isfinite(j)) throw ConfigError("toy corpus jitter values must be finite and >= 0");
  }
}

namespace {

// Sum of random plane waves with wavelengths between 6 and 24 pixels,
// scaled to unit variance.
// A stationary wave field plus a fixed layout of Gaussian blobs, in pixels of
// the 64x64 frame with the origin at the patch centre.
struct Texture {
  static constexpr std::size_t kWaves = 16;
  static constexpr std::size_t kBlobs = 24;
  static constexpr double kBlobSpread = 40.0;  // blob centres within +-40 px
  static constexpr double kBlobWeight = 1.2;
  struct Wave {
    double kx, ky, phase;
  };
  struct Blob {
    double x, y, sigma, sign;
  };
  std::vector<Wave> waves;
  std::vector<Blob> blobs;

  static Texture random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Texture t;
    for (std::size_t i = 0; i < kWaves; ++i) {
      const double wavelength = 6.0 + 18.0 * unit(rng);
      const double angle = 2 * std::numbers::pi * unit(rng);
      const double k = 2 * std::numbers::pi / wavelength;
      t.waves.push_back({k * std::cos(angle), k * std::sin(angle), 2 * std::numbers::pi * unit(rng)});
    }
    for (std::size_t i = 0; i < kBlobs; ++i) {
      const double x = kBlobSpread * (2 * unit(rng) - 1);
      const double y = kBlobSpread * (2 * unit(rng) - 1);
      const double sigma = 3.0 + 9.0 * unit(rng);
      t.blobs.push_back({x, y, sigma, unit(rng) < 0.5 ? -1.0 : 1.0});
    }
    return t;
  }

  double operator()(double u, double v) const {
    double field = 0;
    for (const Wave& w : waves) field += std::cos(w.kx * u + w.ky * v + w.phase);
    double bumps = 0;
    for (const Blob& b : blobs) {
      const double du = u - b.x, dv = v - b.y;
      bumps += b.sign * std::exp(-(du * du + dv * dv) / (2 * b.sigma * b.sigma));
    }
    return field / std::sqrt(kWaves / 2.0) + kBlobWeight * bumps;
  }
};

}  // namespace

PatchCorpus make_toy_corpus(const ToyCorpusSpec& spec) {
  validate(spec);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr double kCentre = (kStoredPatchSize - 1) / 2.0;

  PatchCorpus corpus;
  std::vector<std::uint8_t> pixels(kPatchPixels);
  for (std::size_t point = 0; point < spec.num_points; ++point) {
    const Texture texture = Texture::random(rng);
    for (std::size_t k = 0; k < spec.patches_per_point; ++k) {
      const double tx = spec.translation_px * sym(rng);
      const double ty = spec.translation_px * sym(rng);
      const double theta = spec.rotation_deg * sym(rng) * std::numbers::pi / 180.0;
      const double gain = 1.0 + spec.brightness * sym(rng);
      const double c = std::cos(theta), s = std::sin(theta);
      for (std::size_t y = 0; y < kStoredPatchSize; ++y) {
        for (std::size_t x = 0; x < kStoredPatchSize; ++x) {
          const double dx = static_cast<double>(x) - kCentre, dy = static_cast<double>(y) - kCentre;
          const double u = c * dx - s * dy + tx, v = s * dx + c * dy + ty;
          double value = gain * (0.5 + 0.2 * texture(u, v));
          if (spec.noise > 0) value += spec.noise * gauss(rng);
          pixels[y * kStoredPatchSize + x] =
              static_cast<std::uint8_t>(std::lround(std::clamp(value, 0.0, 1.0) * 255.0));
        }
      }
      corpus.add(static_cast<std::int64_t>(point), pixels);
    }
  }
  return corpus;
}

}  // namespace pnnet
