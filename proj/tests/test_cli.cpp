#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "cli.hpp"
#include "pnnet/data.hpp"
#include "pnnet/descriptor_file.hpp"
#include "pnnet/error.hpp"
#include "pnnet/eval.hpp"
#include "pnnet/model.hpp"
#include "support/random.hpp"

using namespace pnnet;
using namespace pnnet::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run pnnet_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pnnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pnnet_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string p(const fs::path& path) { return path.string(); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) { std::ofstream(path) << text; }

// Loss column of a training log.
std::vector<std::string> loss_column(const fs::path& log) {
  std::vector<std::string> col;
  std::istringstream in(read_text(log));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) continue;
    const auto a = line.find(',');
    col.push_back(line.substr(a + 1, line.find(',', a + 1) - a - 1));
  }
  return col;
}

fs::path small_checkpoint(const fs::path& dir, std::size_t dim = 8) {
  const fs::path path = dir / "net.ckpt";
  save_checkpoint(path, Checkpoint{init_params(3, NetworkShape::smoke(dim)), std::nullopt, 3, 0});
  return path;
}

fs::path small_toy(const fs::path& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args{"make-toy", "-o", p(dir), "--points", "6", "--per-point", "3"};
  args.insert(args.end(), extra.begin(), extra.end());
  REQUIRE(pnnet_cli(args).code == 0);
  return dir;
}

}  // namespace

TEST_CASE("scalars print as plain decimals") {
  CHECK(cli::format_scalar(0.0) == "0.0");
  CHECK(cli::format_scalar(1.0) == "1.0");
  CHECK(cli::format_scalar(0.25) == "0.25");
  CHECK(std::stod(cli::format_scalar(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(pnnet_cli({}).code == 2);
  CHECK(pnnet_cli({"frobnicate"}).code == 2);
  const Run missing = pnnet_cli({"train", "/nonexistent/train.cfg"});
  CHECK(missing.code == 2);
  CHECK(missing.out.empty());
  CHECK(pnnet_cli({"train"}).code == 2);
  CHECK(pnnet_cli({"extract", "--out", "x"}).code == 2);
  CHECK(pnnet_cli({"eval-roc", "--pairs", "/nonexistent"}).code == 2);
  CHECK(pnnet_cli({"--help"}).code == 0);
  CHECK(pnnet_cli({"train", "--help"}).code == 0);
}

TEST_CASE("descriptor files round trip bit exactly") {
  const fs::path dir = scratch_dir("descfile");
  Rng rng(1);
  DescriptorFile f{5, 3, 0xdeadbeef, {}};
  for (int i = 0; i < 15; ++i) f.values.push_back(static_cast<float>(uniform(rng, -1, 1)));
  f.values[4] = -0.0f;
  write_descriptor_file(dir / "a.bin", f);
  CHECK(fs::file_size(dir / "a.bin") == kDescriptorHeaderBytes + 4 * 15);
  const DescriptorFile back = read_descriptor_file(dir / "a.bin");
  CHECK(back == f);
  CHECK(std::signbit(back.values[4]));

  const DescriptorFile empty{0, 128, 7, {}};
  write_descriptor_file(dir / "empty.bin", empty);
  CHECK(fs::file_size(dir / "empty.bin") == kDescriptorHeaderBytes);
  CHECK(read_descriptor_file(dir / "empty.bin") == empty);

  CHECK_THROWS_AS(write_descriptor_file(dir / "bad.bin", DescriptorFile{2, 3, 0, {1, 2}}), ShapeError);

  std::vector<std::uint8_t> bytes = detail::read_file(dir / "a.bin");
  bytes.pop_back();
  detail::write_file_atomic(dir / "short.bin", bytes);
  CHECK_THROWS_AS(read_descriptor_file(dir / "short.bin"), FormatError);
  bytes = detail::read_file(dir / "a.bin");
  bytes[0] = 'Q';
  detail::write_file_atomic(dir / "magic.bin", bytes);
  CHECK_THROWS_AS(read_descriptor_file(dir / "magic.bin"), FormatError);
  bytes = detail::read_file(dir / "a.bin");
  bytes[8] = 2;
  detail::write_file_atomic(dir / "version.bin", bytes);
  CHECK_THROWS_WITH_AS(read_descriptor_file(dir / "version.bin"), doctest::Contains("version"), FormatError);

  std::ostringstream text;
  dump_descriptor_file(text, f);
  std::istringstream lines(text.str());
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) rows += line[0] != '#';
  CHECK(rows == 5);
}

TEST_CASE("make-toy writes a loadable corpus") {
  const fs::path a = scratch_dir("toy_a"), b = scratch_dir("toy_b");
  small_toy(a, {"--seed", "4", "--pairs", "30"});
  small_toy(b, {"--seed", "4"});
  const PatchCorpus corpus = load_phototour(a);
  CHECK(corpus.size() == 18);
  CHECK(corpus.groups().size() == 6);
  for (const auto& g : corpus.groups()) CHECK(g.size() == 3);
  CHECK(detail::read_file(a / "patches0000.bmp") == detail::read_file(b / "patches0000.bmp"));
  CHECK(read_text(a / "info.txt") == read_text(b / "info.txt"));
  CHECK(load_pairs_file(a / "pairs.txt", corpus.size()).size() == 30);

  const fs::path still = scratch_dir("toy_still");
  small_toy(still, {"--translation", "0", "--rotation", "0", "--brightness", "0", "--noise", "0"});
  const PatchCorpus flat = load_phototour(still);
  for (const auto& g : flat.groups()) {
    for (std::size_t i = 1; i < g.size(); ++i) {
      const auto x = flat.raw_pixels(g[0]), y = flat.raw_pixels(g[i]);
      CHECK(std::equal(x.begin(), x.end(), y.begin(), y.end()));
    }
  }
  CHECK(pnnet_cli({"make-toy", "-o", p(a / "info.txt" / "x")}).code == 1);
  CHECK(pnnet_cli({"make-toy", "-o", p(a), "--points", "1"}).code == 1);
}

TEST_CASE("train runs a config and is repeatable") {
  const fs::path dir = scratch_dir("train");
  const std::string cfg =
      "descriptor_dim = 8\nconv1_channels = 4\nconv2_channels = 4\n"
      "triplets_per_epoch = 40\nbatch_size = 16\nepochs = 1\n"
      "toy.num_points = 6\ntoy.patches_per_point = 3\n";
  write_text(dir / "a.cfg", cfg + "checkpoint_dir = run_a\n");
  write_text(dir / "b.cfg", cfg + "checkpoint_dir = run_b\n");
  const Run a = pnnet_cli({"train", p(dir / "a.cfg")});
  REQUIRE(a.code == 0);
  CHECK(a.out.empty());
  CHECK(fs::exists(dir / "run_a" / "epoch-0001.ckpt"));
  CHECK(loss_column(dir / "run_a" / "train_log.csv").size() == 1);
  REQUIRE(pnnet_cli({"train", p(dir / "b.cfg"), "--threads", "2"}).code == 0);
  CHECK(loss_column(dir / "run_a" / "train_log.csv") == loss_column(dir / "run_b" / "train_log.csv"));
  CHECK(detail::read_file(dir / "run_a" / "epoch-0001.ckpt") == detail::read_file(dir / "run_b" / "epoch-0001.ckpt"));

  write_text(dir / "bad.cfg", "epochs = 1\nloss = nope\n");
  const Run bad = pnnet_cli({"train", p(dir / "bad.cfg"), "--single-thread"});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.cfg:2") != std::string::npos);
}

TEST_CASE("extract is order preserving and independent of batch size") {
  const fs::path dir = scratch_dir("extract");
  small_toy(dir / "toy");
  const fs::path ckpt = small_checkpoint(dir);
  REQUIRE(pnnet_cli({"extract", "--checkpoint", p(ckpt), "--patches", p(dir / "toy"), "-o", p(dir / "b1.bin"),
                     "--batch-size", "1"})
              .code == 0);
  REQUIRE(pnnet_cli({"extract", "--checkpoint", p(ckpt), "--patches", p(dir / "toy"), "-o", p(dir / "b128.bin"),
                     "--batch-size", "128"})
              .code == 0);
  REQUIRE(pnnet_cli({"extract", "--checkpoint", p(ckpt), "--patches", p(dir / "toy"), "-o", p(dir / "again.bin"),
                     "--batch-size", "128"})
              .code == 0);
  CHECK(detail::read_file(dir / "b1.bin") == detail::read_file(dir / "b128.bin"));
  CHECK(detail::read_file(dir / "again.bin") == detail::read_file(dir / "b128.bin"));

  const DescriptorFile f = read_descriptor_file(dir / "b1.bin");
  CHECK(f.count == 18);
  CHECK(f.dim == 8);
  CHECK(f.checkpoint_hash == checkpoint_hash(ckpt));
  const PatchCorpus corpus = load_phototour(dir / "toy");
  const Checkpoint net = load_checkpoint(ckpt);
  const std::vector<std::size_t> ids{7};
  const Tensor d7 = describe(net.params, gather_normalized(corpus, ids));
  for (std::size_t k = 0; k < 8; ++k) CHECK(f.row(7)[k] == d7.raw()[k]);

  const Run dumped = pnnet_cli(
      {"extract", "--checkpoint", p(ckpt), "--patches", p(dir / "toy"), "-o", p(dir / "d.bin"), "--dump"});
  CHECK(dumped.code == 0);
  CHECK(dumped.out.find("\n17 ") != std::string::npos);

  // A directory with no patches gives a header-only file.
  fs::create_directories(dir / "none");
  write_text(dir / "none" / "info.txt", "");
  REQUIRE(pnnet_cli({"extract", "--checkpoint", p(ckpt), "--patches", p(dir / "none"), "-o", p(dir / "none.bin")})
              .code == 0);
  CHECK(fs::file_size(dir / "none.bin") == kDescriptorHeaderBytes);
  CHECK(read_descriptor_file(dir / "none.bin").count == 0);
}

TEST_CASE("eval-roc prints fpr at 95% tpr") {
  const fs::path dir = scratch_dir("roc");
  // Rows 0,1 coincide, row 2 is far away: positives (0,1), negatives (0,2), (1,2).
  write_descriptor_file(dir / "sep.bin", DescriptorFile{3, 2, 0, {0, 0, 0, 0, 1, 1}});
  write_text(dir / "pairs.txt", "0 10 0 1 10 0\n0 10 0 2 11 0\n1 10 0 2 11 0\n");
  const Run sep = pnnet_cli(
      {"eval-roc", "--descriptors", p(dir / "sep.bin"), "--pairs", p(dir / "pairs.txt"), "--curve", p(dir / "c.csv")});
  CHECK(sep.code == 0);
  CHECK(sep.out == "0.0\n");
  const std::string csv = read_text(dir / "c.csv");
  CHECK(csv.rfind("# pnnet ", 0) == 0);
  CHECK(csv.find("threshold,fpr,tpr") != std::string::npos);

  write_text(dir / "absent.txt", "0 10 0 1 10 0\n0 10 0 9 11 0\n");
  const Run absent = pnnet_cli({"eval-roc", "--descriptors", p(dir / "sep.bin"), "--pairs", p(dir / "absent.txt")});
  CHECK(absent.code == 1);
  CHECK(absent.out.empty());
  CHECK(absent.err.find("absent.txt:2") != std::string::npos);

  // Same number as the library on extracted descriptors.
  small_toy(dir / "toy", {"--pairs", "60"});
  const fs::path ckpt = small_checkpoint(dir);
  const Run fromckpt = pnnet_cli({"eval-roc", "--checkpoint", p(ckpt), "--patches", p(dir / "toy"), "--pairs",
                                  p(dir / "toy" / "pairs.txt")});
  REQUIRE(fromckpt.code == 0);
  const PatchCorpus corpus = load_phototour(dir / "toy");
  const NetworkParams net = load_checkpoint(ckpt).params;
  std::vector<ScoredPair> scored;
  for (const LabeledPair& lp : load_pairs_file(dir / "toy" / "pairs.txt")) {
    const std::vector<std::size_t> ids{lp.left, lp.right};
    const Tensor d = describe(net, gather_normalized(corpus, ids));
    scored.push_back({l2_distance<float>(std::span<const float>(d.raw(), 8), std::span<const float>(d.raw() + 8, 8)),
                      lp.label});
  }
  CHECK(fromckpt.out == cli::format_scalar(fpr_at_95_tpr(scored)) + "\n");
  CHECK(pnnet_cli({"eval-roc", "--checkpoint", p(ckpt), "--pairs", p(dir / "pairs.txt")}).code == 2);
}

TEST_CASE("eval-match prints average precision") {
  const fs::path dir = scratch_dir("match");
  Rng rng(2);
  DescriptorFile left{20, 4, 0, {}};
  for (int i = 0; i < 80; ++i) left.values.push_back(static_cast<float>(uniform(rng, -1, 1)));
  write_descriptor_file(dir / "left.bin", left);
  write_descriptor_file(dir / "right.bin", left);
  std::string diag;
  for (int i = 0; i < 20; ++i) diag += std::to_string(i) + " " + std::to_string(i) + " 0.1\n";
  write_text(dir / "diag.txt", diag);
  const Run id = pnnet_cli({"eval-match", "--left", p(dir / "left.bin"), "--right", p(dir / "right.bin"), "--gt",
                            p(dir / "diag.txt"), "--curve", p(dir / "pr.csv")});
  CHECK(id.code == 0);
  CHECK(id.out == "1.0\n");
  CHECK(read_text(dir / "pr.csv").find("threshold,recall,precision") != std::string::npos);

  write_text(dir / "empty.txt", "");
  CHECK(pnnet_cli({"eval-match", "--left", p(dir / "left.bin"), "--right", p(dir / "right.bin"), "--gt",
                   p(dir / "empty.txt")})
            .code == 1);

  DescriptorFile right{25, 4, 0, {}};
  for (int i = 0; i < 100; ++i) right.values.push_back(static_cast<float>(uniform(rng, -1, 1)));
  write_descriptor_file(dir / "other.bin", right);
  std::string gt_text;
  OverlapGroundTruth gt;
  for (int i = 0; i < 20; ++i) {
    const std::size_t j = uniform_int(rng, 0, 24);
    gt_text += std::to_string(i) + " " + std::to_string(j) + " 0.3\n";
    gt.insert(static_cast<std::size_t>(i), j);
  }
  write_text(dir / "gt.txt", gt_text + "3 4 0.7\n");
  const Run r = pnnet_cli(
      {"eval-match", "--left", p(dir / "left.bin"), "--right", p(dir / "other.bin"), "--gt", p(dir / "gt.txt")});
  REQUIRE(r.code == 0);
  const auto matches = nn_match(left.values, right.values, 4);
  CHECK(r.out == cli::format_scalar(pr_curve(matches, gt, 25).summary) + "\n");
  CHECK(r.err.find("ignored 1 rows") != std::string::npos);

  write_descriptor_file(dir / "wide.bin", DescriptorFile{1, 5, 0, {1, 2, 3, 4, 5}});
  CHECK(pnnet_cli({"eval-match", "--left", p(dir / "left.bin"), "--right", p(dir / "wide.bin"), "--gt",
                   p(dir / "diag.txt")})
            .code == 1);
}

TEST_CASE("bench reports a stable csv") {
  const fs::path dir = scratch_dir("bench");
  const fs::path ckpt = small_checkpoint(dir);
  const Run one = pnnet_cli({"bench", "--checkpoint", p(ckpt), "--count", "1", "--batch-size", "1"});
  REQUIRE(one.code == 0);
  std::istringstream lines(one.out);
  std::string comment, header, row, extra;
  std::getline(lines, comment);
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(comment.rfind("# pnnet ", 0) == 0);
  CHECK(header == "batch_size,mean_us,throughput");
  CHECK(row.rfind("1,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));

  REQUIRE(pnnet_cli({"bench", "--checkpoint", p(ckpt), "--count", "5", "--batch-size", "1,2,4", "-o",
                     p(dir / "b.csv")})
              .code == 0);
  std::istringstream file(read_text(dir / "b.csv"));
  std::vector<std::string> rows;
  while (std::getline(file, row)) rows.push_back(row);
  REQUIRE(rows.size() == 5);
  CHECK(rows[2].rfind("1,", 0) == 0);
  CHECK(rows[3].rfind("2,", 0) == 0);
  CHECK(rows[4].rfind("4,", 0) == 0);
  CHECK(pnnet_cli({"bench", "--count", "0"}).code == 2);
}
