#pragma once

// Mini-batch SGD over triplets (or labelled pairs for the hinge baseline),
// with checkpointing, per-epoch CSV logging and bit-exact resume.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pnnet/data.hpp"
#include "pnnet/losses.hpp"
#include "pnnet/model.hpp"

namespace pnnet {

struct TrainConfig {
  LossKind loss = LossKind::SoftPn;
  std::size_t batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-6;
  std::size_t epochs = 1;
  std::size_t triplets_per_epoch = 20000;  // hinge runs draw three pairs per triplet
  std::uint64_t seed = 1;
  NetworkShape network = NetworkShape::full(128);
  HingeConfig hinge;
  std::filesystem::path checkpoint_dir;  // empty: no checkpoints or log file
  std::size_t eval_every = 1;            // epochs between checkpoints and validation
  std::size_t threads = 1;               // results do not depend on this
  bool resume = false;

  // Where the data comes from; read by load_training_data.
  std::string dataset = "toy";  // "toy" or a Photo Tour directory
  ToyCorpusSpec toy;
  std::string validation = "none";  // "none", "toy" or a Photo Tour directory
  std::uint64_t validation_seed = 2;
  std::size_t validation_pairs = 5000;         // toy validation only
  std::filesystem::path validation_pairs_file;  // Photo Tour validation only
};

/// Throws ConfigError unless batch_size >= 1, learning_rate > 0,
/// 0 <= momentum < 1, weight_decay >= 0, triplets_per_epoch >= 1,
/// eval_every >= 1, threads >= 1 and the network and toy specs are valid.
void validate(const TrainConfig& cfg);

/// "key = value" lines; '#' starts a comment. Unknown keys and bad values
/// raise ParseError with the line number. Relative paths are resolved against
/// `base_dir`. The result is validated.
TrainConfig parse_train_config(std::istream& in, const std::string& source_name,
                               const std::filesystem::path& base_dir = {});
TrainConfig load_train_config(const std::filesystem::path& path);

/// The config in the same "key = value" form parse_train_config reads.
std::string format_train_config(const TrainConfig& cfg);

/// Velocity for every parameter tensor, starting at zero.
struct OptimizerState {
  NetworkParams velocity;
  static OptimizerState zeros(const NetworkShape& shape) { return {NetworkParams::zeros(shape)}; }
};

/// g = grad + weight_decay * param; v = momentum * v + g; param -= learning_rate * v.
/// A non-finite gradient raises NumericError before anything is modified.
void sgd_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& state, const TrainConfig& cfg);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0;
  double seconds = 0;
  std::optional<double> val_fpr95;
};

/// Examples per batch are evaluated in fixed chunks of this many, reduced in
/// chunk order, so the result is independent of the thread count.
inline constexpr std::size_t kChunkExamples = 16;

/// Seed of the sampler for a (run seed, 1-based epoch) pair.
std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch);

/// One epoch: triplets_per_epoch triplets in batches of batch_size, the last
/// batch at its true size. Requires a triplet loss.
EpochLog train_epoch(NetworkParams& params, OptimizerState& state, TripletSampler& sampler,
                     const NormalizedPatches& patches, const TrainConfig& cfg, std::size_t epoch);

/// Hinge baseline epoch: 3 * triplets_per_epoch labelled pairs.
EpochLog train_epoch(NetworkParams& params, OptimizerState& state, PairSampler& sampler,
                     const NormalizedPatches& patches, const TrainConfig& cfg, std::size_t epoch);

/// Held-out pairs scored by FPR at 95% TPR.
struct Validation {
  const PatchCorpus* corpus = nullptr;
  std::vector<LabeledPair> pairs;
};

/// Descriptors [ids.size() x D] in row order, computed batch_size rows at a time.
std::vector<float> describe_patches(const NetworkParams& params, const NormalizedPatches& patches,
                                    std::span<const std::size_t> ids, std::size_t batch_size);

double validation_fpr95(const NetworkParams& params, const Validation& validation, std::size_t batch_size = 256);

struct TrainResult {
  NetworkParams params;
  OptimizerState state;
  std::vector<EpochLog> logs;  // every epoch of the run, including resumed ones read from the log
  std::size_t first_epoch = 1;  // first epoch trained by this call
};

inline constexpr const char* kTrainLogName = "train_log.csv";

/// Checkpoint file for a completed epoch, e.g. epoch-0003.ckpt.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch);
/// Highest-epoch checkpoint in `dir`, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir);

/// Trains cfg.epochs epochs. With a checkpoint_dir, writes a checkpoint every
/// eval_every epochs and after the last one, and the CSV epoch log. With
/// cfg.resume, continues from the latest checkpoint; the continued run is
/// bit-identical to an uninterrupted one.
TrainResult run_training(const TrainConfig& cfg, const PatchCorpus& corpus, const Validation* validation = nullptr,
                         std::ostream* progress = nullptr);

/// Corpus and optional validation set described by the config's data keys.
struct TrainingData {
  std::unique_ptr<PatchCorpus> corpus;
  std::unique_ptr<PatchCorpus> validation_corpus;
  std::optional<Validation> validation;
};
TrainingData load_training_data(const TrainConfig& cfg);

}  // namespace pnnet
