#include "pnnet/trainer.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "pnnet/error.hpp"
#include "pnnet/eval.hpp"
#include "pnnet/objective.hpp"
#include "pnnet/version.hpp"

namespace pnnet {

namespace fs = std::filesystem;

namespace {

std::array<Tensor*, 6> tensors_of(NetworkParams& p) {
  return {&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b, &p.fc_w, &p.fc_b};
}

std::array<const Tensor*, 6> tensors_of(const NetworkParams& p) {
  return {&p.conv1_w, &p.conv1_b, &p.conv2_w, &p.conv2_b, &p.fc_w, &p.fc_b};
}

void add_into(NetworkParams& acc, const NetworkParams& x) {
  const auto dst = tensors_of(acc);
  const auto src = tensors_of(x);
  for (std::size_t t = 0; t < dst.size(); ++t) {
    float* d = dst[t]->raw();
    const float* s = src[t]->raw();
    for (std::size_t i = 0, n = dst[t]->size(); i < n; ++i) d[i] += s[i];
  }
}

void divide(NetworkParams& p, float divisor) {
  for (Tensor* t : tensors_of(p)) {
    for (float& v : t->data()) v /= divisor;
  }
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Evaluates `count` chunks, on up to `threads` threads, returning results in
// chunk order.
std::vector<ObjectiveSum<float>> run_chunks(std::size_t count, std::size_t threads,
                                            const std::function<ObjectiveSum<float>(std::size_t)>& fn) {
  std::vector<ObjectiveSum<float>> results(count);
  const std::size_t workers = std::min(threads, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) results[i] = fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// Reduces chunk sums in order, averages and applies one SGD step.
double apply_batch(NetworkParams& params, OptimizerState& state, const TrainConfig& cfg,
                   std::vector<ObjectiveSum<float>>& chunks, std::size_t epoch, std::size_t batch_index) {
  double loss_sum = 0;
  std::size_t examples = 0;
  NetworkParams& grad = chunks.front().grad_sum;
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    loss_sum += chunks[c].loss_sum;
    examples += chunks[c].examples;
    if (c > 0) add_into(grad, chunks[c].grad_sum);
  }
  if (!std::isfinite(loss_sum)) {
    throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + ", batch " +
                       std::to_string(batch_index));
  }
  divide(grad, static_cast<float>(examples));
  sgd_step(params, grad, state, cfg);
  return loss_sum;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0) || !std::isfinite(cfg.learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (!(cfg.momentum >= 0 && cfg.momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(cfg.weight_decay >= 0) || !std::isfinite(cfg.weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (cfg.triplets_per_epoch < 1) throw ConfigError("triplets_per_epoch must be >= 1");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (!(cfg.hinge.margin > 0) || !std::isfinite(cfg.hinge.margin)) throw ConfigError("hinge_margin must be > 0");
  if (cfg.validation_pairs < 1) throw ConfigError("validation_pairs must be >= 1");
  validate(cfg.network);
  if (cfg.dataset == "toy" || cfg.validation == "toy") validate(cfg.toy);
}

namespace {

using Setter = std::function<void(TrainConfig&, const std::string&)>;

template <typename Int>
Int parse_integer(const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& v) {
  std::istringstream in(v);
  double out = 0;
  std::string rest;
  if (!(in >> out) || (in >> rest)) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

fs::path resolve(const fs::path& base, const std::string& v) {
  const fs::path p(v);
  return p.is_relative() && !base.empty() ? base / p : p;
}

std::string resolve_source(const fs::path& base, const std::string& v, const char* keyword) {
  return v == keyword || v == "none" ? v : resolve(base, v).string();
}

std::map<std::string, Setter> setters(const fs::path& base) {
  std::map<std::string, Setter> s;
  s["loss"] = [](TrainConfig& c, const std::string& v) { c.loss = parse_loss_kind(v); };
  s["batch_size"] = [](TrainConfig& c, const std::string& v) { c.batch_size = parse_integer<std::size_t>(v); };
  s["learning_rate"] = [](TrainConfig& c, const std::string& v) { c.learning_rate = parse_real(v); };
  s["momentum"] = [](TrainConfig& c, const std::string& v) { c.momentum = parse_real(v); };
  s["weight_decay"] = [](TrainConfig& c, const std::string& v) { c.weight_decay = parse_real(v); };
  s["epochs"] = [](TrainConfig& c, const std::string& v) { c.epochs = parse_integer<std::size_t>(v); };
  s["triplets_per_epoch"] = [](TrainConfig& c, const std::string& v) {
    c.triplets_per_epoch = parse_integer<std::size_t>(v);
  };
  s["seed"] = [](TrainConfig& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>(v); };
  s["descriptor_dim"] = [](TrainConfig& c, const std::string& v) {
    c.network.descriptor_dim = parse_integer<std::size_t>(v);
  };
  s["conv1_channels"] = [](TrainConfig& c, const std::string& v) {
    c.network.conv1_channels = parse_integer<std::size_t>(v);
  };
  s["conv2_channels"] = [](TrainConfig& c, const std::string& v) {
    c.network.conv2_channels = parse_integer<std::size_t>(v);
  };
  s["hinge_margin"] = [](TrainConfig& c, const std::string& v) { c.hinge.margin = parse_real(v); };
  s["checkpoint_dir"] = [base](TrainConfig& c, const std::string& v) { c.checkpoint_dir = resolve(base, v); };
  s["eval_every"] = [](TrainConfig& c, const std::string& v) { c.eval_every = parse_integer<std::size_t>(v); };
  s["threads"] = [](TrainConfig& c, const std::string& v) { c.threads = parse_integer<std::size_t>(v); };
  s["resume"] = [](TrainConfig& c, const std::string& v) { c.resume = parse_bool(v); };
  s["dataset"] = [base](TrainConfig& c, const std::string& v) { c.dataset = resolve_source(base, v, "toy"); };
  s["toy.num_points"] = [](TrainConfig& c, const std::string& v) { c.toy.num_points = parse_integer<std::size_t>(v); };
  s["toy.patches_per_point"] = [](TrainConfig& c, const std::string& v) {
    c.toy.patches_per_point = parse_integer<std::size_t>(v);
  };
  s["toy.translation_px"] = [](TrainConfig& c, const std::string& v) { c.toy.translation_px = parse_real(v); };
  s["toy.rotation_deg"] = [](TrainConfig& c, const std::string& v) { c.toy.rotation_deg = parse_real(v); };
  s["toy.brightness"] = [](TrainConfig& c, const std::string& v) { c.toy.brightness = parse_real(v); };
  s["toy.noise"] = [](TrainConfig& c, const std::string& v) { c.toy.noise = parse_real(v); };
  s["toy.seed"] = [](TrainConfig& c, const std::string& v) { c.toy.seed = parse_integer<std::uint64_t>(v); };
  s["validation"] = [base](TrainConfig& c, const std::string& v) { c.validation = resolve_source(base, v, "toy"); };
  s["validation_seed"] = [](TrainConfig& c, const std::string& v) {
    c.validation_seed = parse_integer<std::uint64_t>(v);
  };
  s["validation_pairs"] = [](TrainConfig& c, const std::string& v) {
    c.validation_pairs = parse_integer<std::size_t>(v);
  };
  s["validation_pairs_file"] = [base](TrainConfig& c, const std::string& v) {
    c.validation_pairs_file = resolve(base, v);
  };
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, const std::string& source_name, const fs::path& base_dir) {
  const auto table = setters(base_dir);
  TrainConfig cfg;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source_name, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) throw ParseError(source_name, line_no, "unknown key '" + key + "'");
    if (value.empty()) throw ParseError(source_name, line_no, "missing value for '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ParseError(source_name, line_no, key + ": " + e.what());
    }
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  return parse_train_config(in, path.string(), path.parent_path());
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o << "loss = " << loss_name(c.loss) << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "learning_rate = " << number(c.learning_rate) << '\n'
    << "momentum = " << number(c.momentum) << '\n'
    << "weight_decay = " << number(c.weight_decay) << '\n'
    << "epochs = " << c.epochs << '\n'
    << "triplets_per_epoch = " << c.triplets_per_epoch << '\n'
    << "seed = " << c.seed << '\n'
    << "descriptor_dim = " << c.network.descriptor_dim << '\n'
    << "conv1_channels = " << c.network.conv1_channels << '\n'
    << "conv2_channels = " << c.network.conv2_channels << '\n'
    << "hinge_margin = " << number(c.hinge.margin) << '\n';
  if (!c.checkpoint_dir.empty()) o << "checkpoint_dir = " << c.checkpoint_dir.string() << '\n';
  o << "eval_every = " << c.eval_every << '\n'
    << "threads = " << c.threads << '\n'
    << "resume = " << (c.resume ? "true" : "false") << '\n'
    << "dataset = " << c.dataset << '\n'
    << "toy.num_points = " << c.toy.num_points << '\n'
    << "toy.patches_per_point = " << c.toy.patches_per_point << '\n'
    << "toy.translation_px = " << number(c.toy.translation_px) << '\n'
    << "toy.rotation_deg = " << number(c.toy.rotation_deg) << '\n'
    << "toy.brightness = " << number(c.toy.brightness) << '\n'
    << "toy.noise = " << number(c.toy.noise) << '\n'
    << "toy.seed = " << c.toy.seed << '\n'
    << "validation = " << c.validation << '\n'
    << "validation_seed = " << c.validation_seed << '\n'
    << "validation_pairs = " << c.validation_pairs << '\n';
  if (!c.validation_pairs_file.empty()) o << "validation_pairs_file = " << c.validation_pairs_file.string() << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// Optimisation

void sgd_step(NetworkParams& params, const NetworkParams& grads, OptimizerState& state, const TrainConfig& cfg) {
  if (!(params.shape == grads.shape) || !(params.shape == state.velocity.shape)) {
    throw ShapeError("sgd_step", "params, gradients and velocity describe different networks");
  }
  const auto p = tensors_of(params);
  const auto g = tensors_of(grads);
  const auto v = tensors_of(state.velocity);
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (!(p[t]->shape() == g[t]->shape()) || !(p[t]->shape() == v[t]->shape())) {
      throw ShapeError("sgd_step", "tensor " + std::to_string(t) + ": " + p[t]->shape().str() + " vs " +
                                       g[t]->shape().str() + " vs " + v[t]->shape().str());
    }
  }
  if (!grads.all_finite()) throw NumericError("sgd_step: non-finite gradient, step aborted");

  const float lr = static_cast<float>(cfg.learning_rate);
  const float mom = static_cast<float>(cfg.momentum);
  const float wd = static_cast<float>(cfg.weight_decay);
  for (std::size_t t = 0; t < p.size(); ++t) {
    float* pp = p[t]->raw();
    const float* gg = g[t]->raw();
    float* vv = v[t]->raw();
    for (std::size_t i = 0, n = p[t]->size(); i < n; ++i) {
      const float step = gg[i] + wd * pp[i];
      vv[i] = mom * vv[i] + step;
      pp[i] -= lr * vv[i];
    }
  }
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(epoch));
}

EpochLog train_epoch(NetworkParams& params, OptimizerState& state, TripletSampler& sampler,
                     const NormalizedPatches& patches, const TrainConfig& cfg, std::size_t epoch) {
  if (!uses_triplets(cfg.loss)) {
    throw ConfigError("loss '" + std::string(loss_name(cfg.loss)) + "' trains on pairs, not triplets");
  }
  if (cfg.triplets_per_epoch == 0) throw ConfigError("triplets_per_epoch must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t total = cfg.triplets_per_epoch;
  double loss_total = 0;
  std::vector<Triplet> batch;
  for (std::size_t done = 0, batch_index = 0; done < total; ++batch_index) {
    const std::size_t size = std::min(cfg.batch_size, total - done);
    batch.resize(size);
    for (Triplet& t : batch) t = sampler.next();
    const std::size_t chunks = (size + kChunkExamples - 1) / kChunkExamples;
    auto results = run_chunks(chunks, cfg.threads, [&](std::size_t c) {
      const std::size_t lo = c * kChunkExamples, hi = std::min(size, lo + kChunkExamples);
      std::vector<std::size_t> a, b, n;
      for (std::size_t i = lo; i < hi; ++i) {
        a.push_back(batch[i].p1);
        b.push_back(batch[i].p2);
        n.push_back(batch[i].n);
      }
      return triplet_objective(params, patches.gather(a), patches.gather(b), patches.gather(n), cfg.loss);
    });
    loss_total += apply_batch(params, state, cfg, results, epoch, batch_index);
    done += size;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {epoch, loss_total / static_cast<double>(total), seconds, std::nullopt};
}

EpochLog train_epoch(NetworkParams& params, OptimizerState& state, PairSampler& sampler,
                     const NormalizedPatches& patches, const TrainConfig& cfg, std::size_t epoch) {
  if (uses_triplets(cfg.loss)) {
    throw ConfigError("loss '" + std::string(loss_name(cfg.loss)) + "' trains on triplets, not pairs");
  }
  if (cfg.triplets_per_epoch == 0) throw ConfigError("triplets_per_epoch must be >= 1");
  const auto start = std::chrono::steady_clock::now();
  const std::size_t total = 3 * cfg.triplets_per_epoch;
  double loss_total = 0;
  std::vector<LabeledPair> batch;
  for (std::size_t done = 0, batch_index = 0; done < total; ++batch_index) {
    const std::size_t size = std::min(cfg.batch_size, total - done);
    batch.resize(size);
    for (LabeledPair& p : batch) p = sampler.next();
    const std::size_t chunks = (size + kChunkExamples - 1) / kChunkExamples;
    auto results = run_chunks(chunks, cfg.threads, [&](std::size_t c) {
      const std::size_t lo = c * kChunkExamples, hi = std::min(size, lo + kChunkExamples);
      std::vector<std::size_t> l, r;
      std::vector<PairLabel> labels;
      for (std::size_t i = lo; i < hi; ++i) {
        l.push_back(batch[i].left);
        r.push_back(batch[i].right);
        labels.push_back(batch[i].label);
      }
      return pair_objective(params, patches.gather(l), patches.gather(r), labels, cfg.hinge);
    });
    loss_total += apply_batch(params, state, cfg, results, epoch, batch_index);
    done += size;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {epoch, loss_total / static_cast<double>(total), seconds, std::nullopt};
}

// ---------------------------------------------------------------------------
// Descriptors and validation

std::vector<float> describe_patches(const NetworkParams& params, const NormalizedPatches& patches,
                                    std::span<const std::size_t> ids, std::size_t batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  const std::size_t dim = params.descriptor_dim();
  std::vector<float> out(ids.size() * dim);
  for (std::size_t lo = 0; lo < ids.size(); lo += batch_size) {
    const std::size_t hi = std::min(ids.size(), lo + batch_size);
    const Tensor d = describe(params, patches.gather(ids.subspan(lo, hi - lo)));
    std::copy(d.data().begin(), d.data().end(), out.begin() + static_cast<std::ptrdiff_t>(lo * dim));
  }
  return out;
}

double validation_fpr95(const NetworkParams& params, const Validation& validation, std::size_t batch_size) {
  if (validation.corpus == nullptr) throw ConfigError("validation set has no corpus");
  std::vector<std::size_t> ids;
  for (const LabeledPair& p : validation.pairs) {
    ids.push_back(p.left);
    ids.push_back(p.right);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const NormalizedPatches patches(*validation.corpus, 0);
  const std::vector<float> desc = describe_patches(params, patches, ids, batch_size);
  const std::size_t dim = params.descriptor_dim();
  auto row = [&](std::size_t patch) {
    const auto k = static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), patch) - ids.begin());
    return std::span<const float>(desc).subspan(k * dim, dim);
  };
  std::vector<ScoredPair> scored;
  scored.reserve(validation.pairs.size());
  for (const LabeledPair& p : validation.pairs) scored.push_back({l2_distance<float>(row(p.left), row(p.right)), p.label});
  return fpr_at_95_tpr(scored);
}

// ---------------------------------------------------------------------------
// Runs

fs::path checkpoint_path(const fs::path& dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch-%04zu.ckpt", epoch);
  return dir / name;
}

namespace {

std::optional<std::size_t> checkpoint_epoch(const fs::path& file) {
  const std::string name = file.filename().string();
  if (name.size() < 11 || name.rfind("epoch-", 0) != 0 || file.extension() != ".ckpt") return std::nullopt;
  const std::string digits = name.substr(6, name.size() - 6 - 5);
  std::size_t epoch = 0;
  const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), epoch);
  if (ec != std::errc() || ptr != digits.data() + digits.size()) return std::nullopt;
  return epoch;
}

const char* kLogColumns = "epoch,mean_loss,seconds,val_fpr95";

std::string log_row(const EpochLog& log) {
  std::string row = std::to_string(log.epoch) + "," + number(log.mean_loss) + "," + number(log.seconds) + ",";
  if (log.val_fpr95) row += number(*log.val_fpr95);
  return row;
}

std::vector<EpochLog> read_log(const fs::path& path, std::size_t up_to_epoch) {
  std::vector<EpochLog> logs;
  std::ifstream in(path);
  if (!in) return logs;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty() || line[0] == '#' || line == kLogColumns) continue;
    std::istringstream row(line);
    std::string epoch, loss, seconds, fpr;
    if (!std::getline(row, epoch, ',') || !std::getline(row, loss, ',') || !std::getline(row, seconds, ',')) {
      throw ParseError(path.string(), line_no, "malformed log row");
    }
    std::getline(row, fpr);
    try {
      EpochLog log{parse_integer<std::size_t>(epoch), parse_real(loss), parse_real(seconds), std::nullopt};
      if (!fpr.empty()) log.val_fpr95 = parse_real(fpr);
      if (log.epoch <= up_to_epoch) logs.push_back(log);
    } catch (const ConfigError& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return logs;
}

void write_log_header(std::ostream& out) { out << "# pnnet " << kVersion << " train log\n" << kLogColumns << '\n'; }

}  // namespace

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  std::optional<fs::path> best;
  std::size_t best_epoch = 0;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return std::nullopt;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto epoch = checkpoint_epoch(entry.path());
    if (epoch && (!best || *epoch > best_epoch)) {
      best = entry.path();
      best_epoch = *epoch;
    }
  }
  return best;
}

TrainResult run_training(const TrainConfig& cfg, const PatchCorpus& corpus, const Validation* validation,
                         std::ostream* progress) {
  validate(cfg);
  const NormalizedPatches patches(corpus);
  TrainResult result{init_params(cfg.seed, cfg.network), OptimizerState::zeros(cfg.network), {}, 1};
  const bool files = !cfg.checkpoint_dir.empty();
  const fs::path log_path = files ? cfg.checkpoint_dir / kTrainLogName : fs::path{};

  if (files) {
    std::error_code ec;
    fs::create_directories(cfg.checkpoint_dir, ec);
    if (!fs::is_directory(cfg.checkpoint_dir)) {
      throw IoError("cannot create checkpoint directory " + cfg.checkpoint_dir.string());
    }
    const auto latest = cfg.resume ? latest_checkpoint(cfg.checkpoint_dir) : std::nullopt;
    if (latest) {
      Checkpoint ckpt = load_checkpoint(*latest, cfg.network.descriptor_dim);
      if (!(ckpt.params.shape == cfg.network)) {
        throw ConfigError("resume: " + latest->string() + " holds a different network shape");
      }
      if (ckpt.seed != cfg.seed) {
        throw ConfigError("resume: " + latest->string() + " was trained with seed " + std::to_string(ckpt.seed));
      }
      if (!ckpt.velocity) throw FormatError("resume: " + latest->string() + " has no optimizer state");
      result.params = std::move(ckpt.params);
      result.state.velocity = std::move(*ckpt.velocity);
      result.first_epoch = ckpt.epoch + 1;
      result.logs = read_log(log_path, ckpt.epoch);
    } else {
      for (const auto& entry : fs::directory_iterator(cfg.checkpoint_dir)) {
        if (checkpoint_epoch(entry.path())) fs::remove(entry.path());
      }
    }
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    write_log_header(log);
    for (const EpochLog& l : result.logs) log << log_row(l) << '\n';
    if (!log) throw IoError("write failed: " + log_path.string());
  }

  for (std::size_t epoch = result.first_epoch; epoch <= cfg.epochs; ++epoch) {
    const std::uint64_t seed = epoch_seed(cfg.seed, epoch);
    EpochLog log;
    if (uses_triplets(cfg.loss)) {
      TripletSampler sampler(corpus, seed);
      log = train_epoch(result.params, result.state, sampler, patches, cfg, epoch);
    } else {
      PairSampler sampler(corpus, seed);
      log = train_epoch(result.params, result.state, sampler, patches, cfg, epoch);
    }
    const bool milestone = epoch % cfg.eval_every == 0 || epoch == cfg.epochs;
    if (milestone && validation != nullptr) log.val_fpr95 = validation_fpr95(result.params, *validation);
    if (milestone && files) {
      save_checkpoint(checkpoint_path(cfg.checkpoint_dir, epoch),
                      Checkpoint{result.params, result.state.velocity, cfg.seed, static_cast<std::uint32_t>(epoch)});
    }
    if (files) {
      std::ofstream out(log_path, std::ios::app);
      out << log_row(log) << '\n';
      if (!out) throw IoError("write failed: " + log_path.string());
    }
    if (progress != nullptr) {
      *progress << "epoch " << epoch << "/" << cfg.epochs << " loss " << log.mean_loss << " (" << log.seconds << " s)";
      if (log.val_fpr95) *progress << " val_fpr95 " << *log.val_fpr95;
      *progress << std::endl;
    }
    result.logs.push_back(log);
  }
  return result;
}

TrainingData load_training_data(const TrainConfig& cfg) {
  TrainingData data;
  data.corpus = std::make_unique<PatchCorpus>(cfg.dataset == "toy" ? make_toy_corpus(cfg.toy)
                                                                    : load_phototour(cfg.dataset));
  if (cfg.validation == "none") return data;
  Validation v;
  if (cfg.validation == "toy") {
    ToyCorpusSpec spec = cfg.toy;
    spec.seed = cfg.validation_seed;
    data.validation_corpus = std::make_unique<PatchCorpus>(make_toy_corpus(spec));
    v.pairs = sample_pairs(*data.validation_corpus, cfg.validation_pairs, cfg.validation_seed, 0.5);
  } else {
    if (cfg.validation_pairs_file.empty()) {
      throw ConfigError("validation directory given without validation_pairs_file");
    }
    data.validation_corpus = std::make_unique<PatchCorpus>(load_phototour(cfg.validation));
    v.pairs = load_pairs_file(cfg.validation_pairs_file, data.validation_corpus->size());
  }
  v.corpus = data.validation_corpus.get();
  data.validation = std::move(v);
  return data;
}

}  // namespace pnnet
