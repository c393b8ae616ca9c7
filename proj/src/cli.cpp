// SPDX-License-Identifier: Apache-2.0
#include "ftmp/cli.hpp"

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ftmp/baselines.hpp"
#include "ftmp/checkpoint.hpp"
#include "ftmp/error.hpp"
#include "ftmp/evaluation.hpp"
#include "ftmp/gradcheck.hpp"
#include "ftmp/service.hpp"
#include "ftmp/study.hpp"
#include "ftmp/synthetic.hpp"
#include "ftmp/training.hpp"
#include "json.hpp"

namespace ftmp::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json meta_of(const Checkpoint& ck) { return json::parse(ck.meta); }

// Reattaches external embedding stores recorded in the checkpoint.
void attach_external(Checkpoint& ck) {
  auto* m = dynamic_cast<Model3E*>(ck.model.get());
  if (!m || (m->params().dims.ext_utt == 0 && m->params().dims.ext_ctx == 0)) return;
  const auto cfg = meta_of(ck).value("train_config", json::object());
  std::shared_ptr<const EmbeddingStore> u, c;
  if (m->params().dims.ext_utt > 0)
    u = std::make_shared<EmbeddingStore>(EmbeddingStore::load(cfg.value("ext_utt", std::string())));
  if (m->params().dims.ext_ctx > 0)
    c = std::make_shared<EmbeddingStore>(EmbeddingStore::load(cfg.value("ext_ctx", std::string())));
  m->set_external(u, c);
}

struct Prediction {
  std::string id;
  TalkMove gold, pred;
};

void write_predictions(const std::string& path, const std::vector<Example>& ex, const std::vector<TalkMove>& preds) {
  auto out = open_out(path);
  for (std::size_t i = 0; i < ex.size(); ++i)
    out << json{{"example_id", example_id(ex[i].origin)}, {"gold", name_of(ex[i].label)}, {"pred", name_of(preds[i])}}
               .dump()
        << '\n';
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  auto move = [&](const json& j) {
    auto m = parse_talk_move(j.get<std::string>());
    if (!m) throw ParseError(path + ": unknown talk move " + j.dump(), lineno);
    return *m;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.value("example_id", std::string()), move(j.at("gold")), move(j.at("pred"))});
    } catch (const json::exception& e) {
      throw ParseError(path + ": " + e.what(), lineno);
    }
  }
  if (out.empty()) throw ValidationError(path + ": no predictions");
  return out;
}

void split_golds_preds(const std::vector<Prediction>& p, std::vector<TalkMove>& g, std::vector<TalkMove>& q) {
  for (const auto& x : p) {
    g.push_back(x.gold);
    q.push_back(x.pred);
  }
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("not an integer list: " + s);
    }
  }
  return out;
}

void log_epoch(const EpochInfo& e) {
  std::cerr << json{{"event", "epoch"}, {"epoch", e.epoch + 1}, {"train_loss", e.train_loss},
                    {"dev_macro_f1", e.dev_macro_f1}, {"dev_accuracy", e.dev_accuracy}}
                   .dump()
            << std::endl;
}

Service* g_service = nullptr;
extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Future talk move prediction toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  std::uint64_t seed = 0;
  bool seed_given = false;
  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
         "--seed", [&](const std::uint64_t& s) { seed = s, seed_given = true; }, "Random seed");
  };

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "Generate a synthetic corpus directory");
  std::string gen_config, gen_out, gen_transitions;
  int gen_n = -1, gen_len = -1;
  double gen_cue = -1;
  gen->add_option("--config", gen_config, "Synthetic config JSON");
  gen->add_option("--transcripts", gen_n, "Number of transcripts");
  gen->add_option("--mean-length", gen_len, "Mean transcript length");
  gen->add_option("--cue", gen_cue, "Lexical cue strength in [0,1]");
  gen->add_option("--transitions", gen_transitions, "uniform | cycle");
  gen->add_option("--out", gen_out, "Output corpus directory")->required();
  add_seed(gen);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate transcripts and write a corpus directory");
  std::string ing_in, ing_out, ing_windows, ing_bucket = "train";
  bool ing_canonical = false;
  int ing_window = 5;
  ingest->add_option("--input", ing_in, "Transcript JSONL")->required();
  ingest->add_option("--out", ing_out, "Output corpus directory")->required();
  ingest->add_flag("--canonical-labels", ing_canonical, "Only accept the eight canonical labels");
  ingest->add_option("--windows-out", ing_windows, "Also dump windowed examples as JSONL");
  ingest->add_option("--window", ing_window, "Window size for --windows-out");
  ingest->add_option("--bucket", ing_bucket, "Bucket for --windows-out (train, dev, test)");
  add_seed(ingest);

  // split
  auto* split = app.add_subcommand("split", "Re-split a corpus directory 70/15/15");
  std::string split_corpus_dir;
  split->add_option("--corpus", split_corpus_dir, "Corpus directory")->required();
  add_seed(split);

  // train
  auto* trn = app.add_subcommand("train", "Train 3-E or TM-only");
  std::string trn_config, trn_corpus, trn_out, trn_history;
  int trn_epochs = -1;
  trn->add_option("--config", trn_config, "Train config JSON")->required();
  trn->add_option("--corpus", trn_corpus, "Corpus directory (overrides config)");
  trn->add_option("--out", trn_out, "Checkpoint output")->required();
  trn->add_option("--history", trn_history, "Per-epoch history CSV");
  trn->add_option("--epochs", trn_epochs, "Override epochs");
  add_seed(trn);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Evaluate a checkpoint or a baseline on a split");
  std::string ev_model, ev_corpus, ev_split = "test", ev_baseline, ev_preds, ev_report, ev_conf, ev_svg, ev_facet;
  int ev_window = 5;
  ev->add_option("--model", ev_model, "Checkpoint");
  ev->add_option("--baseline", ev_baseline, "rb | majority | tmbm (instead of --model)");
  ev->add_option("--corpus", ev_corpus, "Corpus directory (default: the one recorded in the checkpoint)");
  ev->add_option("--split", ev_split, "train | dev | test");
  ev->add_option("--window", ev_window, "Window size for baselines");
  ev->add_option("--predictions", ev_preds, "Write predictions JSONL");
  ev->add_option("--report-csv", ev_report, "Write per-class report CSV");
  ev->add_option("--confusion-csv", ev_conf, "Write confusion matrix CSV");
  ev->add_option("--heatmap", ev_svg, "Write confusion heat map SVG");
  ev->add_option("--facet-csv", ev_facet, "Write facet-level report CSV");
  add_seed(ev);

  // tune-window
  auto* tune = app.add_subcommand("tune-window", "Window/weighting grid on the dev split");
  std::string tune_corpus, tune_config, tune_out, tune_ws = "1,2,3,4,5,6,7";
  tune->add_option("--corpus", tune_corpus, "Corpus directory")->required();
  tune->add_option("--config", tune_config, "Base train config JSON");
  tune->add_option("--out", tune_out, "Output CSV")->required();
  tune->add_option("--windows", tune_ws, "Comma-separated window sizes");
  add_seed(tune);

  // confusion / facet-eval
  auto* conf = app.add_subcommand("confusion", "Confusion matrix from a predictions file");
  std::string conf_preds, conf_csv, conf_svg;
  bool conf_facets = false;
  conf->add_option("--predictions", conf_preds, "Predictions JSONL from evaluate")->required();
  conf->add_option("--csv", conf_csv, "Matrix CSV");
  conf->add_option("--svg", conf_svg, "Heat map SVG");
  conf->add_flag("--facets", conf_facets, "Bin labels into facets first");

  auto* facet = app.add_subcommand("facet-eval", "Facet-level report from a predictions file");
  std::string facet_preds, facet_out;
  facet->add_option("--predictions", facet_preds, "Predictions JSONL from evaluate")->required();
  facet->add_option("--out", facet_out, "Report CSV");

  // diagnostic-sample
  auto* diag = app.add_subcommand("diagnostic-sample", "Sample the 300-example diagnostic set from dev");
  std::string diag_corpus, diag_out;
  int diag_window = 5;
  diag->add_option("--corpus", diag_corpus, "Corpus directory")->required();
  diag->add_option("--window", diag_window, "Window size");
  diag->add_option("--out", diag_out, "Output JSONL")->required();
  add_seed(diag);

  // agreement-report
  auto* agr = app.add_subcommand("agreement-report", "Agreement statistics over annotation records");
  std::string agr_diag, agr_ann, agr_model, agr_a1, agr_a2, agr_out, agr_md;
  agr->add_option("--diagnostic", agr_diag, "Diagnostic set JSONL")->required();
  agr->add_option("--annotations", agr_ann, "Annotation log JSONL")->required();
  agr->add_option("--model", agr_model, "Checkpoint")->required();
  agr->add_option("--annotator-1", agr_a1, "First annotator id");
  agr->add_option("--annotator-2", agr_a2, "Second annotator id");
  agr->add_option("--out", agr_out, "Report JSON");
  agr->add_option("--markdown", agr_md, "Report markdown");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the HTTP service");
  std::string srv_config, srv_listen, srv_ckpt, srv_diag, srv_log, srv_static;
  srv->add_option("--config", srv_config, "Service config JSON");
  srv->add_option("--listen", srv_listen, "host:port");
  srv->add_option("--checkpoint", srv_ckpt, "Checkpoint");
  srv->add_option("--diagnostic-set", srv_diag, "Diagnostic set JSONL");
  srv->add_option("--annotation-log", srv_log, "Annotation log JSONL");
  srv->add_option("--static-dir", srv_static, "Directory served at /");

  // predict
  auto* pred = app.add_subcommand("predict", "Predict the next move for a context JSON");
  std::string pred_model, pred_input = "-";
  pred->add_option("--model", pred_model, "Checkpoint")->required();
  pred->add_option("--input", pred_input, "Request JSON file (- for stdin)");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient check");
  bool gc_tiny = false;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  gc->add_flag("--tiny", gc_tiny, "Tiny dimensions (vocab 12, w = 3)");
  gc->add_option("--eps", gc_eps, "Central-difference step");
  gc->add_option("--tolerance", gc_tol, "Maximum relative error");
  add_seed(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kValidation;
  }

  try {
    if (*gen) {
      SyntheticConfig cfg = gen_config.empty() ? SyntheticConfig{} : load_synthetic_config(gen_config);
      if (gen_n >= 0) cfg.num_transcripts = gen_n;
      if (gen_len >= 0) cfg.mean_length = gen_len;
      if (gen_cue >= 0) cfg.lexical_cue_strength = gen_cue;
      if (gen_transitions == "uniform") cfg.transitions = uniform_transitions();
      else if (gen_transitions == "cycle") cfg.transitions = cycle_transitions();
      else if (!gen_transitions.empty()) throw ValidationError("--transitions must be uniform or cycle");
      if (seed_given) cfg.seed = seed;
      validate(cfg);
      const auto corpus = generate_synthetic(cfg);
      save_corpus_dir(corpus, gen_out);
      save_synthetic_config(cfg, fs::path(gen_out) / "synthetic.json");
      std::cout << "wrote " << corpus.transcripts.size() << " transcripts, " << corpus.num_utterances()
                << " utterances to " << gen_out << '\n';
    } else if (*ingest) {
      auto corpus = load_corpus(ing_in, !ing_canonical);
      corpus = split_corpus(std::move(corpus), seed);
      save_corpus_dir(corpus, ing_out);
      std::cout << "ingested " << corpus.transcripts.size() << " transcripts, " << corpus.num_utterances()
                << " utterances\n";
      if (!ing_windows.empty()) {
        const auto vocab = build_vocab(corpus);
        const auto ex = extract_examples(corpus, parse_bucket(ing_bucket), vocab, WindowConfig{ing_window});
        auto out = open_out(ing_windows);
        write_examples_jsonl(out, ex, vocab);
        std::cout << "wrote " << ex.size() << " examples to " << ing_windows << '\n';
      }
    } else if (*split) {
      auto corpus = load_corpus(fs::path(split_corpus_dir) / "transcripts.jsonl");
      corpus = split_corpus(std::move(corpus), seed);
      save_split(corpus, fs::path(split_corpus_dir) / "split.json");
      const auto s = split_sizes(corpus.transcripts.size());
      std::cout << "train " << s.train << ", dev " << s.dev << ", test " << s.test << '\n';
    } else if (*trn) {
      auto cfg = load_train_config(trn_config);
      if (!trn_corpus.empty()) cfg.corpus = trn_corpus;
      if (seed_given) cfg.seed = seed;
      if (trn_epochs > 0) cfg.epochs = trn_epochs;
      validate(cfg);
      if (cfg.corpus.empty()) throw ValidationError("no corpus: pass --corpus or set it in the config");
      const auto corpus = load_corpus_dir(cfg.corpus);
      const auto vocab = build_vocab(corpus, cfg.min_freq);
      auto res = train(corpus, vocab, cfg, log_epoch);
      Checkpoint ck{std::move(res.model), vocab, cfg.window, "{}"};
      json meta = {{"train_config", json::parse(train_config_json(cfg))},
                   {"corpus", fs::absolute(cfg.corpus).string()},
                   {"best_epoch", res.history.best_epoch + 1},
                   {"dev_macro_f1", res.history.dev_macro_f1}};
      ck.meta = meta.dump();
      save_model(ck, trn_out);
      if (!trn_history.empty()) {
        auto out = open_out(trn_history);
        write_history_csv(out, res.history);
      }
      std::cout << "epochs run " << res.history.epochs_run() << ", best epoch " << res.history.best_epoch + 1;
      if (!res.history.dev_macro_f1.empty())
        std::cout << ", dev macro-F1 " << 100 * res.history.dev_macro_f1[res.history.best_epoch];
      std::cout << "\nwrote " << trn_out << '\n';
    } else if (*ev) {
      const auto bucket = parse_bucket(ev_split);
      std::optional<Checkpoint> ck;
      if (ev_model.empty() == ev_baseline.empty()) throw ValidationError("pass exactly one of --model or --baseline");
      if (!ev_model.empty()) {
        ck = load_model(ev_model);
        attach_external(*ck);
        if (ev_corpus.empty()) ev_corpus = meta_of(*ck).value("corpus", std::string());
        ev_window = ck->window;
      }
      if (ev_corpus.empty()) throw ValidationError("no corpus: pass --corpus");
      const auto corpus = load_corpus_dir(ev_corpus);
      const auto vocab = ck ? ck->vocab : build_vocab(corpus);
      const auto ex = extract_examples(corpus, bucket, vocab, WindowConfig{ev_window});
      if (ex.empty()) throw ValidationError("split " + ev_split + " has no examples");
      std::vector<TalkMove> preds;
      std::string name;
      if (ck) {
        preds = predict_all(*ck->model, ex);
        name = std::string(name_of(ck->model->kind()));
      } else if (ev_baseline == "rb") {
        preds = RandomBaseline(seed).predict(ex.size());
        name = "RB";
      } else if (ev_baseline == "majority") {
        const auto train_ex = extract_examples(corpus, Bucket::Train, vocab, WindowConfig{ev_window});
        const auto labels = labels_of(train_ex);
        preds.assign(ex.size(), majority_fit(labels));
        name = "Majority";
      } else if (ev_baseline == "tmbm") {
        const auto table = tmbm_fit(corpus, Bucket::Train);
        for (const auto& e : ex) preds.push_back(table.predict(e));
        name = "TMBM";
      } else {
        throw ValidationError("--baseline must be rb, majority or tmbm");
      }
      const auto golds = labels_of(ex);
      const auto rep = prf1(confusion(golds, preds));
      std::cout << table_header() << '\n' << table_row(name, rep) << '\n';
      if (!ev_preds.empty()) write_predictions(ev_preds, ex, preds);
      if (!ev_report.empty()) {
        auto out = open_out(ev_report);
        write_report_csv(out, rep);
      }
      if (!ev_conf.empty()) {
        auto out = open_out(ev_conf);
        write_confusion_csv(out, rep.matrix);
      }
      if (!ev_svg.empty()) {
        auto out = open_out(ev_svg);
        const auto names = talk_move_names();
        write_confusion_svg(out, rep.matrix, names, name + " on " + ev_split);
      }
      if (!ev_facet.empty()) {
        auto out = open_out(ev_facet);
        write_facet_report_csv(out, facet_eval(golds, preds));
      }
    } else if (*tune) {
      TrainConfig cfg = tune_config.empty() ? TrainConfig{} : load_train_config(tune_config);
      if (seed_given) cfg.seed = seed;
      const auto corpus = load_corpus_dir(tune_corpus);
      const auto vocab = build_vocab(corpus, cfg.min_freq);
      const auto ws = parse_int_list(tune_ws);
      const auto rows = tune_window(corpus, vocab, cfg, ws, log_epoch);
      auto out = open_out(tune_out);
      write_tuning_csv(out, rows);
      write_tuning_csv(std::cout, rows);
    } else if (*conf) {
      std::vector<TalkMove> g, p;
      split_golds_preds(read_predictions(conf_preds), g, p);
      ConfusionMatrix m;
      std::vector<std::string> names;
      if (conf_facets) {
        m = facet_eval(g, p).matrix;
        names = facet_names();
      } else {
        m = confusion(g, p);
        names = talk_move_names();
      }
      if (!conf_csv.empty()) {
        auto out = open_out(conf_csv);
        write_confusion_csv(out, m, names);
      }
      if (!conf_svg.empty()) {
        auto out = open_out(conf_svg);
        write_confusion_svg(out, m, names, conf_facets ? "Facet confusion" : "Talk-move confusion");
      }
      write_confusion_csv(std::cout, m, names);
    } else if (*facet) {
      std::vector<TalkMove> g, p;
      split_golds_preds(read_predictions(facet_preds), g, p);
      const auto rep = facet_eval(g, p);
      if (!facet_out.empty()) {
        auto out = open_out(facet_out);
        write_facet_report_csv(out, rep);
      }
      write_facet_report_csv(std::cout, rep);
      char buf[32];
      std::snprintf(buf, sizeof buf, "Acc,%.2f\n", 100 * rep.accuracy);
      std::cout << buf;
    } else if (*diag) {
      const auto corpus = load_corpus_dir(diag_corpus);
      const auto vocab = build_vocab(corpus);
      const auto set = sample_diagnostic(corpus, vocab, WindowConfig{diag_window}, seed);
      save_diagnostic(set, diag_out);
      std::cout << "wrote " << set.items.size() << " diagnostic examples to " << diag_out << '\n';
    } else if (*agr) {
      auto ck = load_model(agr_model);
      attach_external(ck);
      const auto set = load_diagnostic(agr_diag, ck.vocab);
      AnnotationLog log(agr_ann);
      std::vector<std::string> who;
      if (!agr_a1.empty()) who.push_back(agr_a1);
      if (!agr_a2.empty()) who.push_back(agr_a2);
      if (who.empty())
        for (const auto& a : log.annotators())
          if (log.count(a) == set.items.size() && who.size() < 2) who.push_back(a);
      if (who.empty()) throw ValidationError("no annotator has completed the diagnostic set");
      std::vector<std::string> ids;
      std::vector<TalkMove> truth;
      std::vector<Example> ex;
      for (const auto& it : set.items) {
        ids.push_back(it.example_id);
        truth.push_back(it.example.label);
        ex.push_back(it.example);
      }
      const auto preds = predict_all(*ck.model, ex);
      const auto a1 = log.records_for(who[0]);
      const auto a2 = who.size() > 1 ? log.records_for(who[1]) : std::vector<AnnotationRecord>{};
      const auto rep = agreement_report(ids, a1, a2, preds, truth);
      if (!agr_out.empty()) open_out(agr_out) << report_json(rep) << '\n';
      if (!agr_md.empty()) open_out(agr_md) << report_markdown(rep);
      std::cout << report_markdown(rep);
    } else if (*srv) {
      ServiceConfig cfg = srv_config.empty() ? ServiceConfig{} : load_service_config(srv_config);
      if (!srv_listen.empty()) {
        const auto colon = srv_listen.rfind(':');
        if (colon == std::string::npos) throw ValidationError("--listen must be host:port");
        cfg.host = srv_listen.substr(0, colon);
        cfg.port = std::stoi(srv_listen.substr(colon + 1));
      }
      if (!srv_ckpt.empty()) cfg.checkpoint = srv_ckpt;
      if (!srv_diag.empty()) cfg.diagnostic_set = srv_diag;
      if (!srv_log.empty()) cfg.annotation_log = srv_log;
      if (!srv_static.empty()) cfg.static_dir = srv_static;
      Service service(cfg);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.serve();
      g_service = nullptr;
    } else if (*pred) {
      ServiceConfig cfg;
      cfg.checkpoint = pred_model;
      Service service(cfg);
      const auto res = service.predict(read_file(pred_input));
      if (res.status != 200) {
        std::cerr << res.body << '\n';
        return res.status == 400 || res.status == 422 ? kValidation : kRuntime;
      }
      std::cout << json::parse(res.body).dump(2) << '\n';
    } else if (*gc) {
      if (!gc_tiny) throw ValidationError("grad-check currently requires --tiny");
      bool ok = true;
      for (const auto& r : tiny_grad_check(seed, gc_eps)) {
        const bool pass = r.max_rel_error < gc_tol;
        ok = ok && pass;
        char buf[160];
        std::snprintf(buf, sizeof buf, "%-8s params %6zu  checked %6zu  max rel err %.3e (%s)  %s\n", r.model.c_str(),
                      r.num_params, r.coords_checked, r.max_rel_error, r.worst_param.c_str(), pass ? "ok" : "FAIL");
        std::cout << buf;
      }
      return ok ? kOk : kRuntime;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ftmp::cli
