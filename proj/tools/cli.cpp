#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>

#include "pnnet/data.hpp"
#include "pnnet/descriptor_file.hpp"
#include "pnnet/error.hpp"
#include "pnnet/eval.hpp"
#include "pnnet/model.hpp"
#include "pnnet/trainer.hpp"
#include "pnnet/version.hpp"

namespace pnnet::cli {

namespace fs = std::filesystem;

std::string format_scalar(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ec == std::errc() ? end : buf);
  if (std::isfinite(v) && s.find_first_of(".e") == std::string::npos) s += ".0";
  return s;
}

namespace {

struct TrainArgs {
  std::string config;
  bool single_thread = false;
  std::size_t threads = 0;
  bool resume = false;
};

struct ExtractArgs {
  std::string checkpoint;
  std::string patches;
  std::string output;
  std::size_t batch_size = 256;
  bool dump = false;
};

struct EvalRocArgs {
  std::string descriptors;
  std::string checkpoint;
  std::string patches;
  std::string pairs;
  std::string curve;
  std::size_t batch_size = 256;
};

struct EvalMatchArgs {
  std::string left;
  std::string right;
  std::string gt;
  std::string curve;
};

struct BenchArgs {
  std::string checkpoint;
  std::size_t dim = 128;
  std::size_t count = 1000;
  std::vector<std::size_t> batch_sizes{1, 16, 128};
  std::uint64_t seed = 1;
  std::string output;
  bool single_thread = false;
};

struct MakeToyArgs {
  std::string output;
  ToyCorpusSpec spec;
  std::size_t pairs = 0;
  std::uint64_t pairs_seed = 1;
  double positive_fraction = 0.5;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

void finish_output(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

// Descriptors for all patches of `corpus`, in corpus order.
DescriptorFile extract_corpus(const std::string& checkpoint, const PatchCorpus& corpus, std::size_t batch_size) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const NormalizedPatches patches(corpus);
  std::vector<std::size_t> ids(corpus.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  DescriptorFile file;
  file.count = corpus.size();
  file.dim = ckpt.params.descriptor_dim();
  file.checkpoint_hash = checkpoint_hash(checkpoint);
  file.values = describe_patches(ckpt.params, patches, ids, batch_size);
  return file;
}

int cmd_train(const TrainArgs& a, std::ostream& err) {
  TrainConfig cfg = load_train_config(a.config);
  if (a.threads > 0) cfg.threads = a.threads;
  if (a.single_thread) cfg.threads = 1;
  if (a.resume) cfg.resume = true;
  validate(cfg);
  const TrainingData data = load_training_data(cfg);
  err << "training " << loss_name(cfg.loss) << " on " << data.corpus->size() << " patches, " << cfg.epochs
      << " epochs\n";
  const TrainResult r = run_training(cfg, *data.corpus, data.validation ? &*data.validation : nullptr, &err);
  if (r.first_epoch > cfg.epochs) err << "nothing to do: all " << cfg.epochs << " epochs already done\n";
  if (!cfg.checkpoint_dir.empty()) err << "checkpoints in " << cfg.checkpoint_dir.string() << '\n';
  return kExitOk;
}

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const PatchCorpus corpus = load_phototour(a.patches);
  const DescriptorFile file = extract_corpus(a.checkpoint, corpus, a.batch_size);
  write_descriptor_file(a.output, file);
  if (a.dump) dump_descriptor_file(out, file);
  return kExitOk;
}

int cmd_eval_roc(const EvalRocArgs& a, std::ostream& out) {
  DescriptorFile desc;
  if (!a.descriptors.empty()) {
    desc = read_descriptor_file(a.descriptors);
  } else {
    desc = extract_corpus(a.checkpoint, load_phototour(a.patches), a.batch_size);
  }
  const std::vector<LabeledPair> pairs = load_pairs_file(a.pairs, desc.count);
  std::vector<ScoredPair> scored;
  scored.reserve(pairs.size());
  for (const LabeledPair& p : pairs) scored.push_back({l2_distance<float>(desc.row(p.left), desc.row(p.right)), p.label});
  const EvalCurve roc = roc_curve(scored);
  if (!a.curve.empty()) {
    std::ofstream csv = open_output(a.curve);
    write_roc_csv(csv, roc);
    finish_output(csv, a.curve);
  }
  out << format_scalar(roc.summary) << '\n';
  return kExitOk;
}

int cmd_eval_match(const EvalMatchArgs& a, std::ostream& out, std::ostream& err) {
  const DescriptorFile left = read_descriptor_file(a.left);
  const DescriptorFile right = read_descriptor_file(a.right);
  if (left.dim != right.dim && left.count > 0 && right.count > 0) {
    throw ShapeError("eval-match", "descriptor_dim", left.dim, right.dim);
  }
  const GroundTruthLoad gt = load_overlap_gt(a.gt);
  if (gt.rejected > 0) err << "ignored " << gt.rejected << " rows with overlap error >= 0.5\n";
  if (gt.duplicates > 0) err << "ignored " << gt.duplicates << " duplicate rows\n";
  const std::vector<NnMatch> matches = nn_match(left.values, right.values, left.dim);
  const EvalCurve pr = pr_curve(matches, gt.gt, right.count);
  if (!a.curve.empty()) {
    std::ofstream csv = open_output(a.curve);
    write_pr_csv(csv, pr);
    finish_output(csv, a.curve);
  }
  out << format_scalar(pr.summary) << '\n';
  return kExitOk;
}

int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.count < 1) throw ConfigError("--count must be >= 1");
  const NetworkParams params =
      a.checkpoint.empty() ? init_params(a.seed, NetworkShape::full(a.dim)) : load_checkpoint(a.checkpoint).params;
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);

  std::ofstream file;
  if (!a.output.empty()) file = open_output(a.output);
  std::ostream& csv = a.output.empty() ? out : file;
  csv << "# pnnet " << kVersion << " bench: descriptor_dim " << params.descriptor_dim() << ", count " << a.count
      << '\n'
      << "batch_size,mean_us,throughput\n";
  for (std::size_t batch : a.batch_sizes) {
    if (batch < 1) throw ConfigError("--batch-size must be >= 1");
    Tensor patches(Shape{batch, 1, 32, 32});
    for (float& v : patches.data()) v = gauss(rng);
    std::optional<Tensor> tail;
    if (a.count % batch != 0) {
      tail.emplace(Shape{a.count % batch, 1, 32, 32});
      std::copy_n(patches.raw(), tail->size(), tail->raw());
    }
    (void)describe(params, patches);  // warm-up, not timed

    double seconds = 0;
    for (std::size_t done = 0; done < a.count;) {
      const std::size_t n = std::min(batch, a.count - done);
      const Tensor& input = n == batch ? patches : *tail;
      const auto start = std::chrono::steady_clock::now();
      const Tensor d = describe(params, input);
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (d.size() == 0) throw NumericError("empty descriptor batch");
      done += n;
    }
    const double mean_us = seconds * 1e6 / static_cast<double>(a.count);
    char row[96];
    std::snprintf(row, sizeof row, "%zu,%.3f,%.1f\n", batch, mean_us, static_cast<double>(a.count) / seconds);
    csv << row;
  }
  csv.flush();
  if (!csv) throw IoError("bench: write failed");
  return kExitOk;
}

int cmd_make_toy(const MakeToyArgs& a, std::ostream& err) {
  const PatchCorpus corpus = make_toy_corpus(a.spec);
  save_phototour(a.output, corpus);
  err << "wrote " << corpus.size() << " patches of " << a.spec.num_points << " points to " << a.output << '\n';
  if (a.pairs > 0) {
    const auto pairs = sample_pairs(corpus, a.pairs, a.pairs_seed, a.positive_fraction);
    save_pairs_file(fs::path(a.output) / "pairs.txt", corpus, pairs);
    err << "wrote " << pairs.size() << " pairs to " << (fs::path(a.output) / "pairs.txt").string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"pnnet: patch descriptor training and evaluation", "pnnet"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a network from a key = value config file");
  train_cmd->add_option("config", train.config, "Config file")->required()->check(CLI::ExistingFile);
  train_cmd->add_flag("--single-thread", train.single_thread, "Force one worker (bit-exact reference mode)");
  train_cmd->add_option("--threads", train.threads, "Worker threads, overriding the config");
  train_cmd->add_flag("--resume", train.resume, "Continue from the latest checkpoint");

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "Compute descriptors for every patch of a dataset");
  extract_cmd->add_option("--checkpoint", extract.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--patches", extract.patches, "Patch directory")->required()->check(CLI::ExistingDirectory);
  extract_cmd->add_option("-o,--out", extract.output, "Descriptor file to write")->required();
  extract_cmd->add_option("--batch-size", extract.batch_size, "Patches per forward pass")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  extract_cmd->add_flag("--dump", extract.dump, "Also print the descriptors as text");

  EvalRocArgs roc;
  auto* roc_cmd = app.add_subcommand("eval-roc", "FPR at 95% TPR over a labelled pair list");
  auto* roc_desc = roc_cmd->add_option("--descriptors", roc.descriptors, "Descriptor file")->check(CLI::ExistingFile);
  auto* roc_ckpt = roc_cmd->add_option("--checkpoint", roc.checkpoint, "Checkpoint file")->check(CLI::ExistingFile);
  auto* roc_patches =
      roc_cmd->add_option("--patches", roc.patches, "Patch directory")->check(CLI::ExistingDirectory);
  roc_desc->excludes(roc_ckpt)->excludes(roc_patches);
  roc_ckpt->needs(roc_patches);
  roc_patches->needs(roc_ckpt);
  roc_cmd->add_option("--pairs", roc.pairs, "Pair list")->required()->check(CLI::ExistingFile);
  roc_cmd->add_option("--curve", roc.curve, "ROC CSV to write");
  roc_cmd->add_option("--batch-size", roc.batch_size, "Patches per forward pass")->check(CLI::PositiveNumber);

  EvalMatchArgs match;
  auto* match_cmd = app.add_subcommand("eval-match", "Nearest-neighbour matching average precision");
  match_cmd->add_option("--left", match.left, "Left descriptor file")->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--right", match.right, "Right descriptor file")->required()->check(CLI::ExistingFile);
  match_cmd->add_option("--gt", match.gt, "Correspondences: left right overlap_error")
      ->required()
      ->check(CLI::ExistingFile);
  match_cmd->add_option("--curve", match.curve, "PR CSV to write");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Descriptor extraction throughput");
  bench_cmd->add_option("--checkpoint", bench.checkpoint, "Checkpoint file (default: random full network)")
      ->check(CLI::ExistingFile);
  bench_cmd->add_option("--dim", bench.dim, "Descriptor size without a checkpoint")->capture_default_str();
  bench_cmd->add_option("--count", bench.count, "Timed descriptors per batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  bench_cmd->add_option("--batch-size", bench.batch_sizes, "Batch sizes to time")
      ->check(CLI::PositiveNumber)
      ->delimiter(',')
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench.seed, "Seed for the random patches")->capture_default_str();
  bench_cmd->add_option("-o,--out", bench.output, "CSV file (default: standard output)");
  bench_cmd->add_flag("--single-thread", bench.single_thread, "Accepted for symmetry; extraction is single threaded");

  MakeToyArgs toy;
  auto* toy_cmd = app.add_subcommand("make-toy", "Write a synthetic corpus in Photo Tour layout");
  toy_cmd->add_option("-o,--out", toy.output, "Output directory")->required();
  toy_cmd->add_option("--points", toy.spec.num_points, "3D points")->capture_default_str();
  toy_cmd->add_option("--per-point", toy.spec.patches_per_point, "Patches per point")->capture_default_str();
  toy_cmd->add_option("--translation", toy.spec.translation_px, "Shift jitter, pixels")->capture_default_str();
  toy_cmd->add_option("--rotation", toy.spec.rotation_deg, "Rotation jitter, degrees")->capture_default_str();
  toy_cmd->add_option("--brightness", toy.spec.brightness, "Gain jitter, fraction")->capture_default_str();
  toy_cmd->add_option("--noise", toy.spec.noise, "Pixel noise std dev")->capture_default_str();
  toy_cmd->add_option("--seed", toy.spec.seed, "Corpus seed")->capture_default_str();
  toy_cmd->add_option("--pairs", toy.pairs, "Also write this many labelled pairs to pairs.txt");
  toy_cmd->add_option("--pairs-seed", toy.pairs_seed, "Seed for the pair list")->capture_default_str();
  toy_cmd->add_option("--positive-fraction", toy.positive_fraction, "Share of matching pairs")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train, err);
    if (*extract_cmd) return cmd_extract(extract, out);
    if (*roc_cmd) {
      if (roc.descriptors.empty() && roc.checkpoint.empty()) {
        err << "eval-roc: give --descriptors or --checkpoint with --patches\n";
        return kExitUsage;
      }
      return cmd_eval_roc(roc, out);
    }
    if (*match_cmd) return cmd_eval_match(match, out, err);
    if (*bench_cmd) return cmd_bench(bench, out);
    if (*toy_cmd) return cmd_make_toy(toy, err);
  } catch (const std::exception& e) {
    err << "pnnet: error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace pnnet::cli
