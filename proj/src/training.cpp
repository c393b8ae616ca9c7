// SPDX-License-Identifier: Apache-2.0
#include "ftmp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "ftmp/error.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t epoch_seed(std::uint64_t seed, int epoch) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(epoch) + 1));
}

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

void clip_gradients(std::span<nc::Param<Real>* const> params, double max_norm) {
  double sq = 0;
  for (auto* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm)
    for (auto* p : params) p->grad *= max_norm / norm;
}

}  // namespace

std::string_view name_of(Weighting w) {
  switch (w) {
    case Weighting::ClassWeights: return "class-weights";
    case Weighting::None: return "none";
    case Weighting::Downsample: return "downsample";
  }
  return "?";
}

Weighting parse_weighting(std::string_view name) {
  if (name == "class-weights") return Weighting::ClassWeights;
  if (name == "none") return Weighting::None;
  if (name == "downsample") return Weighting::Downsample;
  throw ValidationError("unknown weighting '" + std::string(name) + "' (class-weights, none, downsample)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(cfg.lr > 0) || !std::isfinite(cfg.lr)) throw ValidationError("lr must be positive");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (cfg.window < 1) throw ValidationError("window must be >= 1");
  if (cfg.clip_norm < 0) throw ValidationError("clip_norm must be >= 0");
  if (cfg.min_freq < 1) throw ValidationError("min_freq must be >= 1");
}

std::string train_config_json(const TrainConfig& cfg) {
  const auto& d = cfg.dims;
  json j = {{"model", name_of(cfg.model)},
            {"epochs", cfg.epochs},
            {"lr", cfg.lr},
            {"batch_size", cfg.batch_size},
            {"window", cfg.window},
            {"weighting", name_of(cfg.weighting)},
            {"seed", cfg.seed},
            {"shuffle", cfg.shuffle},
            {"clip_norm", cfg.clip_norm},
            {"min_freq", cfg.min_freq},
            {"dims",
             {{"word_dim", d.word_dim},
              {"utt_hidden", d.utt_hidden},
              {"move_dim", d.move_dim},
              {"move_hidden", d.move_hidden},
              {"dialogue_hidden", d.dialogue_hidden},
              {"ff_hidden", d.ff_hidden},
              {"ext_utt", d.ext_utt},
              {"ext_ctx", d.ext_ctx}}},
            {"tm_dims", {{"move_dim", cfg.tm_dims.move_dim}, {"move_hidden", cfg.tm_dims.move_hidden}}}};
  j["stop_at_dev_accuracy"] = cfg.stop_at_dev_accuracy ? json(*cfg.stop_at_dev_accuracy) : json(nullptr);
  if (!cfg.corpus.empty()) j["corpus"] = cfg.corpus;
  if (!cfg.ext_utt.empty()) j["ext_utt"] = cfg.ext_utt;
  if (!cfg.ext_ctx.empty()) j["ext_ctx"] = cfg.ext_ctx;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig cfg;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw ValidationError("train config must be a JSON object");
    static const std::vector<std::string> known = {"model",    "epochs",  "lr",        "batch_size", "window",
                                                   "weighting", "seed",   "shuffle",   "clip_norm",  "min_freq",
                                                   "dims",     "tm_dims", "stop_at_dev_accuracy",    "corpus",
                                                   "ext_utt",  "ext_ctx"};
    for (const auto& [key, _] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end())
        throw ValidationError("train config: unknown key '" + key + "'");
    if (j.contains("model")) cfg.model = parse_model_kind(j["model"].get<std::string>());
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.window = j.value("window", cfg.window);
    if (j.contains("weighting")) cfg.weighting = parse_weighting(j["weighting"].get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.shuffle = j.value("shuffle", cfg.shuffle);
    cfg.clip_norm = j.value("clip_norm", cfg.clip_norm);
    cfg.min_freq = j.value("min_freq", cfg.min_freq);
    if (j.contains("stop_at_dev_accuracy") && !j["stop_at_dev_accuracy"].is_null())
      cfg.stop_at_dev_accuracy = j["stop_at_dev_accuracy"].get<double>();
    if (j.contains("dims")) {
      const auto& d = j["dims"];
      auto& o = cfg.dims;
      o.word_dim = d.value("word_dim", o.word_dim);
      o.utt_hidden = d.value("utt_hidden", o.utt_hidden);
      o.move_dim = d.value("move_dim", o.move_dim);
      o.move_hidden = d.value("move_hidden", o.move_hidden);
      o.dialogue_hidden = d.value("dialogue_hidden", 2 * o.utt_hidden + 1);
      o.ff_hidden = d.value("ff_hidden", o.ff_hidden);
      o.ext_utt = d.value("ext_utt", o.ext_utt);
      o.ext_ctx = d.value("ext_ctx", o.ext_ctx);
    }
    if (j.contains("tm_dims")) {
      cfg.tm_dims.move_dim = j["tm_dims"].value("move_dim", cfg.tm_dims.move_dim);
      cfg.tm_dims.move_hidden = j["tm_dims"].value("move_hidden", cfg.tm_dims.move_hidden);
    }
    cfg.corpus = j.value("corpus", std::string());
    cfg.ext_utt = j.value("ext_utt", std::string());
    cfg.ext_ctx = j.value("ext_ctx", std::string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  validate(cfg);
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

void save_train_config(const TrainConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << train_config_json(cfg) << '\n';
}

std::array<double, kNumTalkMoves> class_weights(std::span<const std::int64_t, kNumTalkMoves> counts) {
  std::int64_t total = 0;
  for (auto c : counts) {
    if (c < 0) throw ValidationError("class_weights: negative count");
    total += c;
  }
  if (total == 0) throw ValidationError("class_weights: all counts are zero");
  std::array<double, kNumTalkMoves> w{};
  for (int k = 0; k < kNumTalkMoves; ++k)
    w[k] = counts[k] > 0 ? static_cast<double>(total) / (kNumTalkMoves * static_cast<double>(counts[k])) : 0.0;
  return w;
}

std::array<std::int64_t, kNumTalkMoves> label_counts(std::span<const Example> examples) {
  std::array<std::int64_t, kNumTalkMoves> c{};
  for (const auto& e : examples) ++c[index_of(e.label)];
  return c;
}

std::vector<Example> downsample(std::span<const Example> examples, std::uint64_t seed) {
  if (examples.empty()) throw ValidationError("downsample: no examples");
  std::array<std::vector<std::size_t>, kNumTalkMoves> by_class;
  for (std::size_t i = 0; i < examples.size(); ++i) by_class[index_of(examples[i].label)].push_back(i);
  std::size_t target = examples.size();
  for (const auto& v : by_class)
    if (!v.empty()) target = std::min(target, v.size());
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& v : by_class) {
    std::shuffle(v.begin(), v.end(), rng);
    keep.insert(keep.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(target, v.size())));
  }
  std::sort(keep.begin(), keep.end());
  std::vector<Example> out;
  out.reserve(keep.size());
  for (auto i : keep) out.push_back(examples[i]);
  return out;
}

void write_history_csv(std::ostream& out, const TrainHistory& h) {
  out << "epoch,train_loss,dev_macro_f1,dev_accuracy,best\n";
  char buf[128];
  for (std::size_t e = 0; e < h.train_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%d\n", e + 1, h.train_loss[e],
                  e < h.dev_macro_f1.size() ? h.dev_macro_f1[e] : 0.0,
                  e < h.dev_accuracy.size() ? h.dev_accuracy[e] : 0.0, static_cast<int>(e) == h.best_epoch);
    out << buf;
  }
}

std::unique_ptr<Model> make_model(const TrainConfig& cfg, const Vocabulary& vocab) {
  validate(cfg);
  if (cfg.model == ModelKind::ThreeE) {
    Model3EDims d = cfg.dims;
    d.vocab_size = vocab.size();
    Model3EParams p(d);
    p.init(cfg.seed);
    return std::make_unique<Model3E>(std::move(p));
  }
  TmOnlyParams p(cfg.tm_dims, cfg.weighting == Weighting::ClassWeights);
  p.init(cfg.seed);
  return std::make_unique<TmOnlyModel>(std::move(p));
}

EvalReport evaluate_model(const Model& model, std::span<const Example> examples) {
  const auto preds = predict_all(model, examples);
  std::vector<TalkMove> golds(examples.size());
  std::transform(examples.begin(), examples.end(), golds.begin(), [](const Example& e) { return e.label; });
  return prf1(confusion(golds, preds));
}

TrainResult train_examples(std::unique_ptr<Model> model, std::span<const Example> train_in,
                           std::span<const Example> dev, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  validate(cfg);
  if (!model) throw ValidationError("train: no model");
  if (train_in.empty()) throw ValidationError("train: the training split has no examples");

  std::vector<Example> downsampled;
  std::span<const Example> train = train_in;
  if (cfg.weighting == Weighting::Downsample) {
    downsampled = downsample(train_in, cfg.seed);
    train = downsampled;
  }

  std::array<double, kNumTalkMoves> weight;
  weight.fill(1.0);
  if (cfg.weighting == Weighting::ClassWeights) {
    const auto counts = label_counts(train);
    weight = class_weights(counts);
  }

  auto params = model->parameters();
  nc::Adam<Real> adam(nc::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8});
  const std::size_t n = train.size();
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  TrainResult result;
  double best_f1 = -1;
  std::vector<std::size_t> order(n);
  std::vector<Example> batch;
  std::vector<Real> coef;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (cfg.shuffle) {
      std::mt19937_64 rng(epoch_seed(cfg.seed, epoch));
      std::shuffle(order.begin(), order.end(), rng);
    }
    double epoch_loss = 0;
    for (std::size_t start = 0, b = 0; start < n; start += bs, ++b) {
      const std::size_t end = std::min(n, start + bs);
      batch.clear();
      coef.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[order[i]]);
        coef.push_back(weight[index_of(train[order[i]].label)] / static_cast<Real>(end - start));
      }
      model->zero_grad();
      const auto where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(b + 1);
      Real loss;
      try {
        loss = model->accumulate_gradients(batch, coef);
        if (!std::isfinite(loss)) throw NumericError("non-finite loss");
        if (cfg.clip_norm > 0) clip_gradients(params, cfg.clip_norm);
        adam.step(params);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at " + where + ": " + e.what());
      }
      epoch_loss += loss * static_cast<double>(end - start);
    }
    EpochInfo info;
    info.epoch = epoch;
    info.train_loss = epoch_loss / static_cast<double>(n);
    result.history.train_loss.push_back(info.train_loss);

    if (!dev.empty()) {
      const auto rep = evaluate_model(*model, dev);
      info.dev_macro_f1 = rep.macro.f1;
      info.dev_accuracy = rep.accuracy;
      result.history.dev_macro_f1.push_back(rep.macro.f1);
      result.history.dev_accuracy.push_back(rep.accuracy);
      if (rep.macro.f1 > best_f1) {
        best_f1 = rep.macro.f1;
        result.history.best_epoch = epoch;
        result.model = model->clone();
      }
    }
    if (on_epoch) on_epoch(info);
    if (!dev.empty() && cfg.stop_at_dev_accuracy && info.dev_accuracy >= *cfg.stop_at_dev_accuracy) break;
  }
  if (dev.empty()) {
    result.history.best_epoch = static_cast<int>(result.history.epochs_run()) - 1;
    result.model = std::move(model);
  }
  return result;
}

TrainResult train(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  validate(cfg);
  WindowConfig wc{cfg.window};
  const auto tr = extract_examples(corpus, Bucket::Train, vocab, wc);
  const auto dv = extract_examples(corpus, Bucket::Dev, vocab, wc);
  auto model = make_model(cfg, vocab);
  if (auto* m = dynamic_cast<Model3E*>(model.get()); m && (cfg.dims.ext_utt > 0 || cfg.dims.ext_ctx > 0)) {
    std::shared_ptr<const EmbeddingStore> u, c;
    if (cfg.dims.ext_utt > 0) u = std::make_shared<EmbeddingStore>(EmbeddingStore::load(cfg.ext_utt));
    if (cfg.dims.ext_ctx > 0) c = std::make_shared<EmbeddingStore>(EmbeddingStore::load(cfg.ext_ctx));
    m->set_external(u, c);
  }
  return train_examples(std::move(model), tr, dv, cfg, on_epoch);
}

std::vector<TuningRow> tune_window(const Corpus& corpus, const Vocabulary& vocab, const TrainConfig& cfg,
                                   std::span<const int> ws, const EpochCallback& on_epoch) {
  std::vector<std::pair<Weighting, int>> grid = {{Weighting::None, 5}, {Weighting::ClassWeights, 5}};
  std::vector<int> sorted(ws.begin(), ws.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (int w : sorted) {
    if (w < 1) throw ValidationError("tune_window: window sizes must be >= 1");
    if (w != 5) grid.emplace_back(Weighting::ClassWeights, w);
  }
  std::vector<TuningRow> rows;
  for (const auto& [weighting, w] : grid) {
    TrainConfig c = cfg;
    c.weighting = weighting;
    c.window = w;
    auto res = train(corpus, vocab, c, on_epoch);
    const auto dv = extract_examples(corpus, Bucket::Dev, vocab, WindowConfig{w});
    TuningRow row;
    row.config = std::string(weighting == Weighting::None ? "No weighting" : "Class weighting") + ", window " +
                 std::to_string(w);
    row.weighting = weighting;
    row.window = w;
    row.dev = evaluate_model(*res.model, dv);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_tuning_csv(std::ostream& out, std::span<const TuningRow> rows) {
  out << "config,Prec,Recall,F1,Acc\n";
  for (const auto& r : rows)
    out << r.config << ',' << pct(r.dev.macro.precision) << ',' << pct(r.dev.macro.recall) << ','
        << pct(r.dev.macro.f1) << ',' << pct(r.dev.accuracy) << '\n';
}

}  // namespace ftmp
