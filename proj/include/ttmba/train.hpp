#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttmba/datagen.hpp"
#include "ttmba/model.hpp"

namespace ttmba {

// Equality after removing all whitespace.
bool exact_match(std::string_view pred, std::string_view ref);

// Corpus BLEU in percent over character tokens, orders 1..4, with the brevity
// penalty. A zero precision is replaced by 1e-9; orders with no candidate
// n-grams anywhere in the corpus are left out of the geometric mean. No
// unigram match at all scores 0. Throws std::invalid_argument on a length
// mismatch.
double bleu(const std::vector<std::string>& preds, const std::vector<std::string>& refs);

// Extended-table equality when the union of variables fits max_vars, always
// followed by a randomized full-width check.
bool oracle_equivalent(const Expr& a, const Expr& b, unsigned width = kDefaultWidth,
                       std::size_t max_vars = kDefaultMaxVars, std::size_t trials = 256,
                       std::uint64_t seed = 0x5eed);

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t warmup_steps = 100;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  // Epochs without validation improvement before stopping.
  std::size_t patience = 1000;
  std::filesystem::path train_path;
  std::filesystem::path valid_path;
  std::filesystem::path test_path;
  // Optional outputs; empty paths are skipped.
  std::filesystem::path checkpoint_path;
  std::filesystem::path loss_log_path;
  FusionSpec fusion;
  ModelConfig model;
  // Prints one line per epoch to stderr.
  bool verbose = false;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch;
  std::string split;
  double loss;
  friend bool operator==(const LossRecord&, const LossRecord&) = default;
};

struct TrainResult {
  Transformer model;
  std::vector<LossRecord> log;
  std::size_t best_epoch = 0;
  double best_valid_loss = 0.0;
};

class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Loads the datasets named in `config` and trains.
TrainResult train(const TrainConfig& config);
// Trains on in-memory pairs. An empty validation set selects on training loss.
TrainResult train(const TrainConfig& config, const std::vector<DatasetPair>& train_set,
                  const std::vector<DatasetPair>& valid_set);

// Mean teacher-forced cross-entropy per target token.
double dataset_loss(const Transformer& model, const std::vector<DatasetPair>& pairs,
                    std::size_t batch_size = 64);

std::string format_loss_log(const std::vector<LossRecord>& log);

struct EvalRecord {
  std::string src;
  std::string trg;
  std::string prediction;
  bool match = false;
  bool equivalent = false;
};

struct EvalReport {
  double accuracy = 0.0;  // percent
  double bleu = 0.0;  // percent
  double equivalence_rate = 0.0;  // percent
  std::vector<EvalRecord> records;
};

std::vector<std::string> predict(const Transformer& model, const std::vector<std::string>& sources,
                                 std::size_t batch_size = 64);
EvalReport evaluate(const Transformer& model, const std::vector<DatasetPair>& pairs,
                    std::size_t batch_size = 64);

struct GridRow {
  FusionSpec spec;
  std::optional<EvalReport> report;
  std::string error;  // set when the cell failed
};

// Vanilla first, then for bool, ext and both: back, front, back-front-of-pad,
// each without and with <sep>.
std::vector<FusionSpec> default_grid();

// Row order of the results table; lower sorts first.
std::size_t grid_rank(const FusionSpec& spec);

using GridProgress = std::function<void(const GridRow&)>;

// Trains and evaluates every spec with the same seed and budget. Rows come
// back sorted by grid_rank.
std::vector<GridRow> run_grid(const std::vector<FusionSpec>& grid, const TrainConfig& base,
                              const std::vector<DatasetPair>& train_set,
                              const std::vector<DatasetPair>& valid_set,
                              const std::vector<DatasetPair>& test_set,
                              const GridProgress& progress = {});

// CSV with header semantics,position,sep,acc,bleu; failed cells get "error"
// in the metric columns.
std::string format_grid_csv(const std::vector<GridRow>& rows);
std::string position_label(const FusionSpec& spec);

}  // namespace ttmba
