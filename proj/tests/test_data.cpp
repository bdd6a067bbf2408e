#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "bmp.hpp"
#include "pnnet/data.hpp"
#include "support/random.hpp"

using namespace pnnet;
using namespace pnnet::testing;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pnnet_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One 1024x1024 sheet filled with a position-dependent pattern.
detail::GrayImage fixture_sheet() {
  detail::GrayImage img{1024, 1024, std::vector<std::uint8_t>(1024 * 1024)};
  for (std::size_t y = 0; y < 1024; ++y) {
    for (std::size_t x = 0; x < 1024; ++x) img.pixels[y * 1024 + x] = static_cast<std::uint8_t>((x * 7 + y * 13) % 251);
  }
  return img;
}

fs::path write_fixture(const std::string& name, const std::string& info) {
  const fs::path dir = scratch_dir(name);
  detail::write_bmp(dir / "patches0000.bmp", fixture_sheet());
  std::ofstream(dir / "info.txt") << info;
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

PatchCorpus grid_corpus(std::size_t points, std::size_t per_point) {
  PatchCorpus c;
  std::vector<std::uint8_t> px(kPatchPixels);
  for (std::size_t p = 0; p < points; ++p) {
    for (std::size_t k = 0; k < per_point; ++k) {
      px[0] = static_cast<std::uint8_t>(k);
      c.add(static_cast<std::int64_t>(100 + p), px);
    }
  }
  return c;
}

}  // namespace

TEST_CASE("load_phototour reads a four patch fixture") {
  const fs::path dir = write_fixture("four", "0 0\n0 0\n1 0\n1 0\n");
  const PatchCorpus c = load_phototour(dir);
  REQUIRE(c.size() == 4);
  CHECK(c.groups().size() == 2);
  CHECK(c.matchable_groups().size() == 2);
  CHECK(c.point_id(2) == 1);

  const detail::GrayImage sheet = fixture_sheet();
  for (std::size_t i = 0; i < 4; ++i) {
    const PatchRecord r = c.record(i);
    CHECK(r.patch_id == i);
    CHECK(r.pixels.shape() == Shape{1, 64, 64});
    bool same = true;
    for (std::size_t y = 0; y < 64; ++y) {
      for (std::size_t x = 0; x < 64; ++x) {
        const std::uint8_t want = sheet.at(i * 64 + x, y);
        same &= c.raw_pixels(i)[y * 64 + x] == want;
        same &= r.pixels.at(0, y, x) == static_cast<float>(want) / 255.0f;
      }
    }
    CHECK(same);
  }
}

TEST_CASE("load_phototour errors") {
  std::string long_info;
  for (int i = 0; i < 300; ++i) long_info += "0 0\n";
  CHECK_THROWS_WITH_AS(load_phototour(write_fixture("long", long_info)), doctest::Contains("count mismatch"),
                       FormatError);

  const fs::path no_info = scratch_dir("noinfo");
  detail::write_bmp(no_info / "patches0000.bmp", fixture_sheet());
  CHECK_THROWS_AS(load_phototour(no_info), IoError);

  const fs::path bad = write_fixture("badimg", "0 0\n");
  write_text(bad / "patches0000.bmp", "not a bitmap");
  CHECK_THROWS_AS(load_phototour(bad), FormatError);
}

TEST_CASE("save_phototour round trips through the loader") {
  const PatchCorpus c = make_toy_corpus({.num_points = 40, .patches_per_point = 7, .seed = 3});
  const fs::path dir = scratch_dir("roundtrip");
  save_phototour(dir, c);
  const PatchCorpus back = load_phototour(dir);
  REQUIRE(back.size() == 280);
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back.point_id(i) == c.point_id(i));
    CHECK(std::ranges::equal(back.raw_pixels(i), c.raw_pixels(i)));
  }
}

TEST_CASE("pairs file labels follow point ids") {
  const fs::path dir = scratch_dir("pairs");
  auto one = load_pairs_file(write_text(dir / "pos.txt", "0 7 0 3 7 0\n"));
  REQUIRE(one.size() == 1);
  CHECK(one[0].left == 0);
  CHECK(one[0].right == 3);
  CHECK(one[0].label.is_positive());
  CHECK_FALSE(load_pairs_file(write_text(dir / "neg.txt", "0 7 0 3 9 0\n"))[0].label.is_positive());

  // Hand count: rows 1, 3 and 6 share point ids.
  const auto six = load_pairs_file(write_text(dir / "six.txt",
                                              "1 5 0 2 5 0\n"
                                              "1 5 0 4 6 0\n"
                                              "3 6 0 4 6 0\n"
                                              "0 2 0 5 8 0\n"
                                              "2 5 0 7 9 0\n"
                                              "6 9 0 7 9 0\n"));
  REQUIRE(six.size() == 6);
  int positives = 0;
  for (const auto& p : six) positives += p.label.is_positive();
  CHECK(positives == 3);
  CHECK(six[2].label.is_positive());

  try {
    load_pairs_file(write_text(dir / "range.txt", "0 1 0 1 1 0\n0 1 0 12 2 0\n"), 10);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(load_pairs_file(write_text(dir / "short.txt", "0 1 0 1\n")), ParseError);
  CHECK_THROWS_AS(load_pairs_file(write_text(dir / "junk.txt", "a b c d e f\n")), ParseError);
  CHECK_THROWS_AS(load_pairs_file(dir / "missing.txt"), IoError);
}

TEST_CASE("normalize_patch") {
  const Tensor constant(Shape{1, 64, 64}, 0.37f);
  const Tensor zeroed = normalize_patch(constant);
  for (float v : zeroed.data()) CHECK(v == 0.0f);

  Tensor checker(Shape{1, 64, 64});
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) checker.at(0, y, x) = static_cast<float>((x + y) % 2);
  }
  const Tensor flat = normalize_patch(checker);
  CHECK(flat.shape() == Shape{1, 32, 32});
  for (float v : flat.data()) CHECK(v == 0.0f);

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Tensor out = normalize_patch(random_tensor<float>(Shape{1, 64, 64}, rng, 0.0, 1.0));
    double mean = 0, sq = 0;
    for (float v : out.data()) mean += v;
    mean /= 1024.0;
    for (float v : out.data()) sq += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-5);
    CHECK(std::abs(std::sqrt(sq / 1024.0) - 1.0) < 1e-4);
  }

  // 2x2 averaging, checked on a patch whose blocks are distinct.
  Tensor blocks(Shape{1, 64, 64});
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) blocks.at(0, y, x) = static_cast<float>((x / 2) % 2) * 0.5f + 0.25f * (x % 2);
  }
  // Block averages alternate 0.125 / 0.625, so the standardized values are -1 / +1.
  const Tensor b = normalize_patch(blocks);
  CHECK(b.at(0, 3, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(b.at(0, 3, 1) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK_THROWS_AS(normalize_patch(Tensor(Shape{1, 32, 32})), ShapeError);
}

TEST_CASE("gather_normalized stacks patches in order") {
  const PatchCorpus c = make_toy_corpus({.num_points = 3, .patches_per_point = 2, .seed = 9});
  const std::vector<std::size_t> ids{4, 0, 4};
  const Tensor batch = gather_normalized(c, ids);
  CHECK(batch.shape() == Shape{3, 1, 32, 32});
  const Tensor p4 = normalize_patch(c.record(4).pixels);
  for (std::size_t i = 0; i < 1024; ++i) {
    REQUIRE(batch[i] == p4[i]);
    REQUIRE(batch[2 * 1024 + i] == p4[i]);
  }
}

TEST_CASE("triplet sampler invariants") {
  const PatchCorpus two = grid_corpus(2, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const Triplet& t : sample_triplets(two, 200, seed)) {
      REQUIRE(t.p1 < two.size());
      REQUIRE(t.p2 < two.size());
      REQUIRE(t.n < two.size());
      CHECK(t.p1 != t.p2);
      CHECK(two.point_id(t.p1) == two.point_id(t.p2));
      CHECK(two.point_id(t.n) != two.point_id(t.p1));
    }
  }

  // Singletons are never drawn as positives.
  PatchCorpus mixed = grid_corpus(3, 3);
  mixed.add(7, std::vector<std::uint8_t>(kPatchPixels));
  for (const Triplet& t : sample_triplets(mixed, 2000, 5)) CHECK(mixed.point_id(t.p1) != 7);

  CHECK_THROWS_AS(TripletSampler(grid_corpus(1, 5), 1), ConfigError);
  CHECK_THROWS_AS(TripletSampler(grid_corpus(4, 1), 1), ConfigError);
}

TEST_CASE("samplers are deterministic per seed") {
  const PatchCorpus c = grid_corpus(6, 4);
  const auto a = sample_triplets(c, 500, 11), b = sample_triplets(c, 500, 11), d = sample_triplets(c, 500, 12);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same &= a[i].p1 == b[i].p1 && a[i].p2 == b[i].p2 && a[i].n == b[i].n;
    differs |= a[i].p1 != d[i].p1 || a[i].n != d[i].n;
  }
  CHECK(same);
  CHECK(differs);

  const auto pa = sample_pairs(c, 500, 3), pb = sample_pairs(c, 500, 3);
  for (std::size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i].left == pb[i].left);
    REQUIRE(pa[i].right == pb[i].right);
    REQUIRE(pa[i].label == pb[i].label);
  }
}

TEST_CASE("triplet sampler picks points uniformly") {
  // Unequal group sizes: point selection must still be uniform.
  PatchCorpus c;
  std::vector<std::uint8_t> px(kPatchPixels);
  for (std::size_t p = 0; p < 10; ++p) {
    for (std::size_t k = 0; k < 2 + p; ++k) c.add(static_cast<std::int64_t>(p), px);
  }
  constexpr std::size_t kDraws = 100000;
  std::vector<std::size_t> hits(10, 0);
  for (const Triplet& t : sample_triplets(c, kDraws, 21)) ++hits[static_cast<std::size_t>(c.point_id(t.p1))];
  const double expected = kDraws / 10.0, sigma = std::sqrt(kDraws * 0.1 * 0.9);
  for (std::size_t h : hits) CHECK(std::abs(static_cast<double>(h) - expected) < 3 * sigma);
}

TEST_CASE("pair sampler labels") {
  const PatchCorpus c = grid_corpus(5, 3);
  for (const LabeledPair& p : sample_pairs(c, 1000, 1, 1.0)) {
    CHECK(p.label.is_positive());
    CHECK(p.left != p.right);
  }
  for (const LabeledPair& p : sample_pairs(c, 1000, 1, 0.0)) {
    CHECK_FALSE(p.label.is_positive());
    CHECK(c.point_id(p.left) != c.point_id(p.right));
  }
  constexpr std::size_t kDraws = 100000;
  std::size_t positives = 0;
  for (const LabeledPair& p : sample_pairs(c, kDraws, 8)) {
    positives += p.label.is_positive();
    REQUIRE(p.label.is_positive() == (c.point_id(p.left) == c.point_id(p.right)));
  }
  const double q = 1.0 / 3.0, sigma = std::sqrt(kDraws * q * (1 - q));
  CHECK(std::abs(static_cast<double>(positives) - kDraws * q) < 3 * sigma);
  CHECK_THROWS_AS(PairSampler(c, 1, 1.5), ConfigError);
}

TEST_CASE("toy corpus") {
  const ToyCorpusSpec still{.num_points = 4, .patches_per_point = 3, .translation_px = 0, .rotation_deg = 0,
                            .brightness = 0, .noise = 0, .seed = 2};
  const PatchCorpus s = make_toy_corpus(still);
  REQUIRE(s.size() == 12);
  for (const auto& members : s.groups()) {
    for (std::size_t m : members) CHECK(std::ranges::equal(s.raw_pixels(m), s.raw_pixels(members[0])));
  }

  const ToyCorpusSpec spec{.num_points = 30, .patches_per_point = 4, .seed = 5};
  const PatchCorpus a = make_toy_corpus(spec), b = make_toy_corpus(spec);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::ranges::equal(a.raw_pixels(i), b.raw_pixels(i)));

  auto dist = [&](std::size_t i, std::size_t j) {
    double s2 = 0;
    for (std::size_t k = 0; k < kPatchPixels; ++k) {
      const double d = double(a.raw_pixels(i)[k]) - double(a.raw_pixels(j)[k]);
      s2 += d * d;
    }
    return std::sqrt(s2);
  };
  double within = 0, between = 0;
  std::size_t nw = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a.point_id(i) == a.point_id(j)) {
        within += dist(i, j), ++nw;
      } else {
        between += dist(i, j), ++nb;
      }
    }
  }
  CHECK(within / nw < between / nb);

  CHECK_THROWS_AS(make_toy_corpus({.num_points = 1}), ConfigError);
  CHECK_THROWS_AS(make_toy_corpus({.patches_per_point = 1}), ConfigError);
  CHECK_THROWS_AS(make_toy_corpus({.noise = -0.1}), ConfigError);
}
