// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ftmp/corpus.hpp"
#include "ftmp/evaluation.hpp"
#include "ftmp/model3e.hpp"
#include "ftmp/tm_only.hpp"

namespace ftmp {

enum class Weighting { ClassWeights, None, Downsample };
std::string_view name_of(Weighting w);
Weighting parse_weighting(std::string_view name);

struct TrainConfig {
  ModelKind model = ModelKind::ThreeE;
  int epochs = 30;
  double lr = 1e-4;
  int batch_size = 256;
  int window = 5;
  Weighting weighting = Weighting::ClassWeights;
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Global gradient-norm clipping; 0 disables it.
  double clip_norm = 0;
  // Stop after the first epoch whose dev accuracy reaches this value.
  std::optional<double> stop_at_dev_accuracy;
  // vocab_size is filled from the vocabulary at train time.
  Model3EDims dims;
  TmOnlyDims tm_dims;
  int min_freq = 1;
  // Used by the command line only.
  std::string corpus;
  std::string ext_utt;
  std::string ext_ctx;
};

void validate(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path);
std::string train_config_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const std::string& text);

// weight_k = N / (8 * count_k), or 0 for an empty class.
std::array<double, kNumTalkMoves> class_weights(std::span<const std::int64_t, kNumTalkMoves> counts);
std::array<std::int64_t, kNumTalkMoves> label_counts(std::span<const Example> examples);

// Every present class subsampled without replacement to the smallest
// present class count. Output keeps the input order.
std::vector<Example> downsample(std::span<const Example> examples, std::uint64_t seed);

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> dev_macro_f1;
  std::vector<double> dev_accuracy;
  int best_epoch = -1;  // 0-based
  std::size_t epochs_run() const { return train_loss.size(); }
};

void write_history_csv(std::ostream& out, const TrainHistory& h);

struct EpochInfo {
  int epoch = 0;
  double train_loss = 0;
  double dev_macro_f1 = 0;
  double dev_accuracy = 0;
};
using EpochCallback = std::function<void(const EpochInfo&)>;

struct TrainResult {
  std::unique_ptr<Model> model;  // parameters of the best dev epoch
  TrainHistory history;
};

// Freshly initialised model for the config (seeded by cfg.seed).
std::unique_ptr<Model> make_model(const TrainConfig& cfg, const Vocabulary& vocab);

// Mini-batch Adam on already-windowed examples. Weighted losses are
// averaged over each batch. Without dev examples the last epoch is kept.
TrainResult train_examples(std::unique_ptr<Model> model, std::span<const Example> train,
                           std::span<const Example> dev, const TrainConfig& cfg,
                           const EpochCallback& on_epoch = {});

// Windows the corpus' Train and Dev buckets and trains a new model.
TrainResult train(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

EvalReport evaluate_model(const Model& model, std::span<const Example> examples);

struct TuningRow {
  std::string config;
  Weighting weighting = Weighting::ClassWeights;
  int window = 5;
  EvalReport dev;
};

// Rows: no weighting at w=5, class weighting at w=5, then class weighting
// for every other w in ws (ascending).
std::vector<TuningRow> tune_window(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg,
                                   std::span<const int> ws, const EpochCallback& on_epoch = {});
// config,Prec,Recall,F1,Acc (x100, 2 decimals).
void write_tuning_csv(std::ostream& out, std::span<const TuningRow> rows);

}  // namespace ftmp
