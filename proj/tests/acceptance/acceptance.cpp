// SPDX-License-Identifier: Apache-2.0
// Acceptance checks. Each criterion prints one line:
//   criterion N <name>: PASS|FAIL <details>
// Usage: ftmp_acceptance [--criterion N]...   (no flag runs all)

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../support/service_fixture.hpp"
#include "ftmp/baselines.hpp"
#include "ftmp/checkpoint.hpp"
#include "ftmp/cli.hpp"
#include "ftmp/error.hpp"
#include "ftmp/evaluation.hpp"
#include "ftmp/gradcheck.hpp"
#include "ftmp/study.hpp"
#include "ftmp/synthetic.hpp"
#include "ftmp/training.hpp"
#include "ftmp/windowing.hpp"

using namespace ftmp;
using enum TalkMove;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::vector<TalkMove> golds_of(const std::vector<Example>& ex) { return labels_of(ex); }

// 1. Gradient correctness.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const int code = cli::run({"ftmp", "grad-check", "--tiny"});
  const double cli_time = seconds_since(t0);
  const auto res = tiny_grad_check(0, 1e-5);
  bool all_coords = true;
  double worst = 0;
  std::string detail;
  for (const auto& r : res) {
    all_coords = all_coords && r.coords_checked == r.num_params;
    worst = std::max(worst, r.max_rel_error);
    detail += fmt("%s %zu/%zu params max rel err %.2e; ", r.model.c_str(), r.coords_checked, r.num_params,
                  r.max_rel_error);
  }
  const bool pass = code == 0 && all_coords && worst < 1e-4 && res.size() == 2 && cli_time < 60;
  return {pass, detail + fmt("grad-check --tiny exit %d in %.1f s (limit 60 s, tol 1e-4)", code, cli_time)};
}

// 2. TMBM against a brute-force counter over the serialized corpus.
Outcome tmbm_oracle() {
  int corpora = 0, mismatches = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    SyntheticConfig s;
    s.num_transcripts = 10 + static_cast<int>(seed % 7);
    s.mean_length = 10 + static_cast<int>(seed * 3 % 40);
    s.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (int r = 0; r < kNumTalkMoves; ++r) {
      for (int k = 0; k < kNumTalkMoves; ++k) s.transitions(r, k) = u(rng) < 0.4 ? 0.0 : u(rng);
      s.transitions(r, (r + 1) % kNumTalkMoves) += 0.1;
      s.transitions.row(r) /= s.transitions.row(r).sum();
    }
    const auto corpus = generate_synthetic(s);
    const auto table = tmbm_fit(corpus, Bucket::Train);

    // Oracle: re-read the corpus as JSON text and count label pairs by name.
    std::ostringstream text;
    write_corpus(text, corpus);
    std::map<std::string, std::map<std::string, std::int64_t>> oracle;
    std::map<std::string, std::string> prev;
    std::istringstream in(text.str());
    std::string line;
    while (std::getline(in, line)) {
      const auto j = nlohmann::json::parse(line);
      const auto tid = j["transcript_id"].get<std::string>();
      if (corpus.split.at(tid) != Bucket::Train) continue;
      const auto label = j["label"].get<std::string>();
      const auto it = prev.find(tid);
      oracle[it == prev.end() ? "<start>" : it->second][label] += 1;
      prev[tid] = label;
    }
    for (int r = 0; r < BigramTable::kRows; ++r) {
      const std::string rn = r == BigramTable::kStartRow ? "<start>" : std::string(name_of(talk_move_from_index(r)));
      std::int64_t row_total = 0;
      for (int k = 0; k < kNumTalkMoves; ++k) row_total += oracle[rn][std::string(name_of(talk_move_from_index(k)))];
      for (int k = 0; k < kNumTalkMoves; ++k) {
        const auto want = oracle[rn][std::string(name_of(talk_move_from_index(k)))];
        const double p = row_total ? static_cast<double>(want) / static_cast<double>(row_total) : 0.0;
        if (table.counts[r][k] != want || (row_total && table.probs[r][k] != p) || table.seen[r] != (row_total > 0))
          ++mismatches;
      }
    }
    ++corpora;
  }

  SyntheticConfig det;
  det.num_transcripts = 40;
  det.mean_length = 50;
  det.transitions = cycle_transitions();
  det.seed = 1;
  const auto corpus = generate_synthetic(det);
  const auto table = tmbm_fit(corpus, Bucket::Train);
  const auto vocab = build_vocab(corpus);
  const auto test = extract_examples(corpus, Bucket::Test, vocab, WindowConfig{5});
  std::vector<TalkMove> preds;
  for (const auto& e : test) preds.push_back(table.predict(e));
  const double acc = prf1(confusion(golds_of(test), preds)).accuracy;
  return {mismatches == 0 && acc == 1.0,
          fmt("%d corpora, %d table cells differ from the oracle; deterministic corpus held-out accuracy %.4f on %zu "
              "examples (need 1.0)",
              corpora, mismatches, acc, test.size())};
}

// 3. Learning sanity, deterministic transitions, full dims.
Outcome transition_learning() {
  SyntheticConfig s;
  s.num_transcripts = 40;
  s.mean_length = 50;
  s.transitions = cycle_transitions();
  s.seed = 1;
  const auto corpus = generate_synthetic(s);
  const auto vocab = build_vocab(corpus);
  const auto test = extract_examples(corpus, Bucket::Test, vocab, WindowConfig{5});
  const auto t0 = Clock::now();
  bool pass = true;
  std::string detail = fmt("%zu utterances; ", corpus.num_utterances());
  for (auto kind : {ModelKind::TmOnly, ModelKind::ThreeE}) {
    TrainConfig cfg;
    cfg.model = kind;
    cfg.epochs = 30;
    cfg.lr = 1e-4;
    cfg.batch_size = 32;
    cfg.stop_at_dev_accuracy = 1.0;
    const auto t1 = Clock::now();
    auto r = train(corpus, vocab, cfg);
    const double acc = evaluate_model(*r.model, test).accuracy;
    pass = pass && acc >= 0.99 && r.history.epochs_run() <= 30;
    detail += fmt("%s%s held-out acc %.4f after %zu epochs (%.0f s); ", std::string(name_of(kind)).c_str(),
                  kind == ModelKind::TmOnly ? "-w" : "", acc, r.history.epochs_run(), seconds_since(t1));
  }
  const double total = seconds_since(t0);
  pass = pass && total < 600;
  return {pass, detail + fmt("total %.0f s (limit 600 s)", total)};
}

// 4. Lexical signal vs move history.
Outcome lexical_signal() {
  SyntheticConfig s;
  s.num_transcripts = 80;
  s.mean_length = 50;
  s.transitions = uniform_transitions();
  s.lexical_cue_strength = 1.0;
  s.seed = 2;
  const auto corpus = generate_synthetic(s);
  const auto vocab = build_vocab(corpus);
  const auto test = extract_examples(corpus, Bucket::Test, vocab, WindowConfig{5});
  const auto golds = golds_of(test);

  const double chance = prf1(confusion(golds, RandomBaseline(0).predict(test.size()))).macro.f1;
  const auto table = tmbm_fit(corpus, Bucket::Train);
  std::vector<TalkMove> tp;
  for (const auto& e : test) tp.push_back(table.predict(e));
  const double tmbm = prf1(confusion(golds, tp)).macro.f1;

  TrainConfig tm;
  tm.model = ModelKind::TmOnly;
  tm.batch_size = 32;
  const double tm_f1 = evaluate_model(*train(corpus, vocab, tm).model, test).macro.f1;

  TrainConfig e3;
  e3.model = ModelKind::ThreeE;
  e3.batch_size = 32;
  e3.stop_at_dev_accuracy = 0.99;
  auto r3 = train(corpus, vocab, e3);
  const double e3_f1 = evaluate_model(*r3.model, test).macro.f1;

  const double gap = e3_f1 - std::max(tmbm, tm_f1);
  const bool pass = e3_f1 >= 0.90 && std::abs(tmbm - chance) <= 0.05 && std::abs(tm_f1 - chance) <= 0.05 && gap > 0.3;
  return {pass, fmt("%zu test examples; macro-F1 3-E %.4f (need >= 0.90, %zu epochs), TMBM %.4f, TM-only-w %.4f, "
                    "RB chance %.4f (need within 0.05), gap %.4f (need > 0.3)",
                    test.size(), e3_f1, r3.history.epochs_run(), tmbm, tm_f1, chance, gap)};
}

// 5. Class weighting on a 20:1 corpus.
Outcome weighting_direction() {
  TransitionMatrix m = TransitionMatrix::Zero();
  for (int r = 0; r < kNumTalkMoves; ++r) m(r, index_of(None)) = 1.0;
  m(index_of(None), index_of(None)) = 0.95;
  m(index_of(None), index_of(PressForAccuracy)) = 0.05;
  const auto minority = static_cast<std::size_t>(index_of(PressForAccuracy));
  bool pass = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SyntheticConfig s;
    s.num_transcripts = 40;
    s.mean_length = 50;
    s.transitions = m;
    s.lexical_cue_strength = 1.0;
    s.seed = 100 + seed;
    const auto corpus = generate_synthetic(s);
    const auto vocab = build_vocab(corpus);
    const auto test = extract_examples(corpus, Bucket::Test, vocab, WindowConfig{5});
    const auto counts = label_counts(extract_examples(corpus, Bucket::Train, vocab, WindowConfig{5}));
    EvalReport rep[2];
    int i = 0;
    for (auto w : {Weighting::None, Weighting::ClassWeights}) {
      TrainConfig cfg;
      cfg.seed = seed;
      cfg.epochs = 16;
      cfg.batch_size = 32;
      cfg.weighting = w;
      cfg.dims.word_dim = 128;
      cfg.dims.utt_hidden = 128;
      cfg.dims.dialogue_hidden = 257;
      cfg.dims.move_dim = 8;
      cfg.dims.move_hidden = 16;
      cfg.dims.ff_hidden = 16;
      rep[i++] = evaluate_model(*train(corpus, vocab, cfg).model, test);
    }
    const double f_un = rep[0].per_class[minority].f1, f_w = rep[1].per_class[minority].f1;
    const double diff = rep[1].macro.f1 - rep[0].macro.f1;
    pass = pass && f_w > f_un && diff > 0;
    detail += fmt("seed %llu (None:PFA %lld:%lld) minority F1 %.3f vs %.3f unweighted, macro diff %+.4f; ",
                  static_cast<unsigned long long>(seed), static_cast<long long>(counts[0]),
                  static_cast<long long>(counts[minority]), f_w, f_un, diff);
  }
  return {pass, detail};
}

// Naive per-class counting for criterion 6.
struct NaiveScores {
  std::vector<double> p, r, f;
  double macro_p = 0, macro_r = 0, macro_f = 0, acc = 0;
};

NaiveScores naive_prf1(const std::vector<int>& g, const std::vector<int>& q, int k) {
  NaiveScores s;
  int correct = 0;
  for (std::size_t i = 0; i < g.size(); ++i) correct += g[i] == q[i];
  s.acc = static_cast<double>(correct) / static_cast<double>(g.size());
  for (int c = 0; c < k; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (q[i] == c && g[i] == c) tp += 1;
      if (q[i] == c && g[i] != c) fp += 1;
      if (q[i] != c && g[i] == c) fn += 1;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0;
    const double f = p + r > 0 ? 2 * p * r / (p + r) : 0;
    s.p.push_back(p);
    s.r.push_back(r);
    s.f.push_back(f);
    s.macro_p += p / k;
    s.macro_r += r / k;
    s.macro_f += f / k;
  }
  return s;
}

// 6. Metrics oracle.
Outcome metrics_oracle() {
  std::mt19937_64 rng(6);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int k = trial % 4 == 0 ? std::uniform_int_distribution<int>(2, 8)(rng) : 8;
    const auto n = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
    const double copy = std::uniform_real_distribution<double>(0, 1)(rng);
    std::vector<int> g(n), q(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = std::uniform_int_distribution<int>(0, k - 1)(rng);
      q[i] = std::bernoulli_distribution(copy)(rng) ? g[i] : std::uniform_int_distribution<int>(0, k - 1)(rng);
    }
    const auto rep = prf1(confusion(g, q, k));
    const auto o = naive_prf1(g, q, k);
    for (int c = 0; c < k; ++c) {
      const auto& pc = rep.per_class[static_cast<std::size_t>(c)];
      worst = std::max({worst, std::abs(pc.precision - o.p[c]), std::abs(pc.recall - o.r[c]), std::abs(pc.f1 - o.f[c])});
    }
    worst = std::max({worst, std::abs(rep.macro.precision - o.macro_p), std::abs(rep.macro.recall - o.macro_r),
                      std::abs(rep.macro.f1 - o.macro_f), std::abs(rep.accuracy - o.acc)});
  }
  const std::vector<int> g = {0, 0, 1}, q = {0, 1, 1};
  const double toy = prf1(confusion(g, q, 2)).macro.f1;
  const bool pass = worst <= 1e-12 && toy == 2.0 / 3.0;
  return {pass, fmt("max |prf1 - naive| over 1000 sequences %.3g (tol 1e-12); 2-class toy macro-F1 %.17g (need 2/3 "
                    "exactly)",
                    worst, toy)};
}

// 7. Facet binning never lowers accuracy.
Outcome facet_theorem() {
  std::mt19937_64 rng(7);
  int violations = 0, strictly_up = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    const double copy = std::uniform_real_distribution<double>(0, 1)(rng);
    std::vector<TalkMove> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng));
      p[i] = std::bernoulli_distribution(copy)(rng) ? g[i]
                                                     : talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng));
    }
    const double cls = prf1(confusion(g, p)).accuracy;
    const double fac = facet_eval(g, p).accuracy;
    violations += fac < cls;
    strictly_up += fac > cls;
  }
  return {violations == 0,
          fmt("1000 prediction sets: %d with facet accuracy below talk-move accuracy, %d strictly higher", violations,
              strictly_up)};
}

// 8. Diagnostic sampling composition.
Outcome diagnostic_sampling() {
  SyntheticConfig s;
  s.num_transcripts = 100;
  s.mean_length = 50;
  s.seed = 8;
  const auto corpus = generate_synthetic(s);
  const auto vocab = build_vocab(corpus);
  int bad = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto set = sample_diagnostic(corpus, vocab, WindowConfig{5}, seed * 7919 + 1);
    std::array<int, kNumTalkMoves> counts{};
    std::set<std::string> ids;
    for (const auto& it : set.items) {
      ++counts[index_of(it.example.label)];
      ids.insert(it.example_id);
    }
    bad += set.items.size() != 300 || counts != kDiagnosticComposition || ids.size() != 300;
  }
  // 37/37/37/37 for None, Wait, Restating, Revoicing; 38 for the rest.
  const bool table_ok = kDiagnosticComposition[index_of(None)] == 37 && kDiagnosticComposition[index_of(Wait)] == 37 &&
                        kDiagnosticComposition[index_of(Restating)] == 37 &&
                        kDiagnosticComposition[index_of(Revoicing)] == 37 &&
                        kDiagnosticComposition[index_of(PressForAccuracy)] == 38 &&
                        kDiagnosticComposition[index_of(PressForReasoning)] == 38 &&
                        kDiagnosticComposition[index_of(KeepingEveryoneTogether)] == 38 &&
                        kDiagnosticComposition[index_of(GettingStudentsToRelate)] == 38;

  auto pool = random_examples(800, 5, 12, 8);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].label = talk_move_from_index(static_cast<int>(i % 8));
  std::vector<Example> short_pool;
  int rev = 0;
  for (const auto& e : pool)
    if (e.label != Revoicing || rev++ < 10) short_pool.push_back(e);
  std::string message;
  try {
    sample_diagnostic_indices(short_pool, 0);
  } catch (const ValidationError& e) {
    message = e.what();
  }
  const bool err_ok = message.find("Revoicing: need 37, have 10") != std::string::npos;
  return {bad == 0 && table_ok && err_ok,
          fmt("%d of 100 seeds off the 37/37/37/37/38/38/38/38 composition; shortfall error: \"%s\"", bad,
              message.c_str())};
}

// Reference agreement fixture: 100 examples giving the rows
// 46 29 33 17 48 33 20 94 91 72 79 90 84. Each block is (count, p1, p2,
// truth, model) as class indices. Acceptable sets start with all four
// values; drops remove one value from the first n examples of a block.
struct StudyFixture {
  std::vector<std::string> ids;
  std::vector<AnnotationRecord> a1, a2;
  std::vector<TalkMove> model, truth;
};

StudyFixture study_fixture() {
  enum { A = 0, B = 1, C = 2, D = 3 };
  struct Drop {
    int n;
    int who;       // 1 or 2
    char what;     // 'o' other annotator's primary, 't' truth, 'm' model
  };
  struct Blk {
    int count, p1, p2, t, m;
    std::vector<Drop> drops;
  };
  const std::vector<Blk> blocks = {
      {17, A, A, A, A, {}},
      {3, A, B, A, A, {}},
      {9, A, B, A, C, {{9, 1, 'o'}}},
      {16, A, A, B, A, {{16, 1, 't'}, {16, 2, 't'}}},
      {13, A, A, B, C, {{12, 1, 't'}, {5, 2, 't'}, {8, 2, 'm'}}},
      {16, B, A, A, C, {{6, 2, 'o'}}},
      {12, A, B, C, A, {}},
      {14, A, B, C, D, {{10, 1, 'm'}, {8, 2, 'm'}}},
  };
  StudyFixture f;
  int id = 0;
  for (const auto& b : blocks) {
    for (int i = 0; i < b.count; ++i, ++id) {
      const auto mv = [](int k) { return talk_move_from_index(k); };
      std::set<TalkMove> s1 = {mv(b.p1), mv(b.p2), mv(b.t), mv(b.m)}, s2 = s1;
      for (const auto& d : b.drops) {
        if (i >= d.n) continue;
        auto& s = d.who == 1 ? s1 : s2;
        const int v = d.what == 'o' ? (d.who == 1 ? b.p2 : b.p1) : d.what == 't' ? b.t : b.m;
        s.erase(mv(v));
      }
      const std::string ex = "fixture:" + std::to_string(id);
      f.ids.push_back(ex);
      f.a1.push_back({"a1", ex, mv(b.p1), s1, "t"});
      f.a2.push_back({"a2", ex, mv(b.p2), s2, "t"});
      f.truth.push_back(mv(b.t));
      f.model.push_back(mv(b.m));
    }
  }
  return f;
}

// 9. Agreement fixtures and the acceptance invariant.
Outcome agreement_fixtures() {
  const auto f = study_fixture();
  for (const auto& r : f.a1) validate(r);
  for (const auto& r : f.a2) validate(r);
  const auto rep = agreement_report(f.ids, f.a1, f.a2, f.model, f.truth);
  const std::vector<double> want = {46, 29, 33, 17, 48, 33, 20, 94, 91, 72, 79, 90, 84};
  int table_bad = 0;
  std::string got;
  for (std::size_t i = 0; i < want.size(); ++i) {
    table_bad += !(rep.rows.size() == 13 && rep.rows[i].percent && *rep.rows[i].percent == want[i]);
    if (i < rep.rows.size() && rep.rows[i].percent) got += fmt("%g ", *rep.rows[i].percent);
  }

  // Known overlaps k/N.
  std::mt19937_64 rng(9);
  int overlap_bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 300)(rng);
    const int k = std::uniform_int_distribution<int>(0, n)(rng);
    std::vector<AnnotationRecord> a, b;
    for (int i = 0; i < n; ++i) {
      const std::string id = "k:" + std::to_string(i);
      const auto pa = talk_move_from_index(i % 8);
      const auto pb = i < k ? pa : talk_move_from_index((i + 1) % 8);
      a.push_back({"a", id, pa, {pa}, "t"});
      b.push_back({"b", id, pb, {pb}, "t"});
    }
    std::shuffle(b.begin(), b.end(), rng);
    overlap_bad += primary_agreement(a, b) != 100.0 * k / n;
  }

  // acceptance_rate >= primary_agreement on random record sets.
  int inv_bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 120)(rng);
    std::vector<AnnotationRecord> a, b;
    auto random_record = [&](const std::string& who, const std::string& id) {
      AnnotationRecord r{who, id, talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng)), {}, "t"};
      r.acceptable.insert(r.primary);
      const int extra = std::uniform_int_distribution<int>(0, 7)(rng);
      for (int e = 0; e < extra; ++e) r.acceptable.insert(talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng)));
      return r;
    };
    for (int i = 0; i < n; ++i) {
      const std::string id = "r:" + std::to_string(i);
      a.push_back(random_record("a", id));
      b.push_back(random_record("b", id));
    }
    const double agree = primary_agreement(a, b);
    inv_bad += acceptance_rate(a, b) < agree || acceptance_rate(b, a) < agree;
  }
  return {table_bad == 0 && overlap_bad == 0 && inv_bad == 0,
          fmt("study fixture rows [%s] (%d off); %d of 200 k/N overlap fixtures off; %d of 1000 random record sets "
              "with acceptance < primary agreement",
              got.c_str(), table_bad, overlap_bad, inv_bad)};
}

// 10. Windowing properties.
Outcome windowing_properties() {
  std::mt19937_64 rng(10);
  Vocabulary vocab;
  for (const char* w : {"yes", "no", "why", "five", "because"}) vocab.add(w);
  const char* words[] = {"yes", "no", "why", "five", "because", "maybe"};
  std::size_t failures = 0, examples = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 50)(rng);
    const int w = std::uniform_int_distribution<int>(1, 7)(rng);
    Transcript t{"t" + std::to_string(trial), {}};
    for (int i = 0; i < n; ++i) {
      Utterance u;
      u.idx = 3 * i + 1;
      const bool student = std::bernoulli_distribution(0.4)(rng);
      u.role = student ? Role::Student : Role::Teacher;
      u.speaker_id = student ? "S" + std::to_string(std::uniform_int_distribution<int>(0, 2)(rng)) : "T";
      u.talk_move = student ? Wait : talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng) == 1 ? 0 : std::uniform_int_distribution<int>(2, 7)(rng));
      const int len = std::uniform_int_distribution<int>(0, 4)(rng);
      for (int k = 0; k < len; ++k) u.text += std::string(k ? " " : "") + words[std::uniform_int_distribution<int>(0, 5)(rng)];
      t.utterances.push_back(u);
    }
    const auto ex = extract_examples(t, vocab, WindowConfig{w});
    bool ok = ex.size() == static_cast<std::size_t>(n - 1);
    for (std::size_t i = 0; ok && i < ex.size(); ++i) {
      const int tpos = static_cast<int>(i);
      const auto& e = ex[i];
      const int pads = std::max(0, w - 1 - tpos);
      int seen_pads = 0;
      for (const auto& c : e.window) seen_pads += c.is_pad();
      ok = ok && e.window.size() == static_cast<std::size_t>(w) && seen_pads == pads &&
           e.label == t.utterances[static_cast<std::size_t>(tpos + 1)].talk_move;
      for (int j = pads; ok && j < w; ++j) {
        const int src = tpos - (w - 1 - j);
        const auto& u = t.utterances[static_cast<std::size_t>(src)];
        const auto& c = e.window[static_cast<std::size_t>(j)];
        const int change = src == 0 || t.utterances[static_cast<std::size_t>(src - 1)].speaker_id != u.speaker_id;
        ok = ok && !c.is_pad() && c.move == index_of(u.talk_move) && c.utterance_idx == u.idx &&
             c.speaker_change == change;
      }
      for (int j = 0; ok && j < pads; ++j) ok = e.window[static_cast<std::size_t>(j)].is_pad();
    }
    examples += ex.size();
    failures += !ok;
  }
  return {failures == 0, fmt("10000 random transcripts (n in [1,50], w in [1,7]), %zu examples, %zu failing", examples,
                             failures)};
}

// 11. Persistence.
Outcome persistence() {
  using namespace ftmp::testing;
  const auto dir = scratch_dir("acceptance_persist");
  int bitwise_bad = 0;
  for (auto kind : {ModelKind::ThreeE, ModelKind::TmOnly}) {
    Vocabulary vocab;
    for (int i = 0; i < 150; ++i) vocab.add("w" + std::to_string(i));
    TrainConfig cfg;
    cfg.model = kind;
    cfg.seed = 11;
    Checkpoint ck{make_model(cfg, vocab), vocab, 5, R"({"k":1})"};
    const auto p1 = dir / "a.ckpt", p2 = dir / "b.ckpt";
    save_model(ck, p1);
    auto back = load_model(p1);
    auto a = ck.model->named_parameters(), b = back.model->named_parameters();
    bool same = a.size() == b.size() && back.vocab == vocab && back.window == 5;
    for (std::size_t i = 0; same && i < a.size(); ++i) {
      const auto& x = a[i].param->value;
      const auto& y = b[i].param->value;
      same = a[i].name == b[i].name && x.size() == y.size() &&
             std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
    }
    save_model(back, p2);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string b1{std::istreambuf_iterator<char>(f1), {}}, b2{std::istreambuf_iterator<char>(f2), {}};
    bitwise_bad += !(same && b1 == b2);
  }

  const auto fixture = make_service_fixture(dir, 300);
  int trials = 0, started = 0, cursor_bad = 0;
  std::size_t acked = 0, lost = 0, max_acked = 0;
  for (std::uint64_t t = 0; t < 50; ++t) {
    const auto r = kill_trial(fixture, t);
    ++trials;
    started += r.server_started;
    acked += r.acked.size();
    max_acked = std::max(max_acked, r.acked.size());
    lost += r.lost.size();
    cursor_bad += r.cursor_after_restart != r.recovered_records || r.recovered_records < r.acked.size();
  }
  fs::remove_all(dir);
  return {bitwise_bad == 0 && started == trials && lost == 0 && cursor_bad == 0,
          fmt("checkpoint round trips differing: %d of 2; kill -9 trials %d (servers up %d), acked records %zu "
              "(max %zu per trial), lost %zu, cursor mismatches %d",
              bitwise_bad, trials, started, acked, max_acked, lost, cursor_bad)};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {1, "gradient correctness", gradient_correctness},
      {2, "TMBM oracle equivalence", tmbm_oracle},
      {3, "learning sanity (transitions)", transition_learning},
      {4, "learning sanity (lexical signal)", lexical_signal},
      {5, "class-weighting direction", weighting_direction},
      {6, "metrics oracle", metrics_oracle},
      {7, "facet binning theorem", facet_theorem},
      {8, "diagnostic sampling", diagnostic_sampling},
      {9, "agreement fixtures", agreement_fixtures},
      {10, "windowing properties", windowing_properties},
      {11, "persistence", persistence},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      wanted.insert(std::atoi(argv[++i]));
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]...\n", argv[0]);
      return 2;
    }
  }
  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.contains(c.number)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s  %s [%.1f s]\n", c.number, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
