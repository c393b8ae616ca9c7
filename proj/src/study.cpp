// SPDX-License-Identifier: Apache-2.0
#include "ftmp/study.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "ftmp/error.hpp"
#include "ftmp/tokenizer.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

namespace {

TalkMove move_from_json(const json& j) {
  const auto name = j.get<std::string>();
  auto m = parse_talk_move(name);
  if (!m) throw ValidationError("unknown talk move '" + name + "'");
  return *m;
}

double percent(std::size_t hits, std::size_t n) { return 100.0 * static_cast<double>(hits) / static_cast<double>(n); }

// Index records by example id, rejecting duplicates.
std::map<std::string, const AnnotationRecord*, std::less<>> by_id(std::span<const AnnotationRecord> recs) {
  std::map<std::string, const AnnotationRecord*, std::less<>> out;
  for (const auto& r : recs)
    if (!out.emplace(r.example_id, &r).second)
      throw ValidationError("duplicate annotation for example " + r.example_id);
  return out;
}

const AnnotationRecord& lookup(const std::map<std::string, const AnnotationRecord*, std::less<>>& m,
                               std::string_view id) {
  auto it = m.find(id);
  if (it == m.end()) throw ValidationError("no annotation for example " + std::string(id));
  return *it->second;
}

void check_same_ids(std::span<const AnnotationRecord> a, std::span<const AnnotationRecord> b) {
  if (a.size() != b.size())
    throw ValidationError("record sets differ in size (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  if (a.empty()) throw ValidationError("no records");
}

}  // namespace

const DiagnosticItem* DiagnosticSet::find(std::string_view id) const {
  for (const auto& it : items)
    if (it.example_id == id) return &it;
  return nullptr;
}

std::string example_id(const ExampleOrigin& origin) {
  return origin.transcript_id + ":" + std::to_string(origin.position);
}

std::vector<std::size_t> sample_diagnostic_indices(std::span<const Example> pool, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumTalkMoves> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[index_of(pool[i].label)].push_back(i);
  std::string shortfall;
  for (int k = 0; k < kNumTalkMoves; ++k) {
    const auto have = by_class[k].size();
    if (have < static_cast<std::size_t>(kDiagnosticComposition[k])) {
      if (!shortfall.empty()) shortfall += "; ";
      shortfall += std::string(name_of(talk_move_from_index(k))) + ": need " +
                   std::to_string(kDiagnosticComposition[k]) + ", have " + std::to_string(have);
    }
  }
  if (!shortfall.empty()) throw ValidationError("insufficient examples for the diagnostic set: " + shortfall);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out;
  out.reserve(kDiagnosticSize);
  for (int k = 0; k < kNumTalkMoves; ++k) {
    auto& v = by_class[k];
    // Partial Fisher-Yates: the first n positions are a uniform sample.
    const auto n = static_cast<std::size_t>(kDiagnosticComposition[k]);
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, v.size() - 1);
      std::swap(v[i], v[pick(rng)]);
      out.push_back(v[i]);
    }
  }
  return out;
}

DiagnosticSet sample_diagnostic(const Corpus& corpus, const Vocabulary& vocab, WindowConfig cfg,
                                std::uint64_t seed) {
  const auto pool = extract_examples(corpus, Bucket::Dev, vocab, cfg);
  const auto picks = sample_diagnostic_indices(pool, seed);
  DiagnosticSet set;
  set.seed = seed;
  set.window = cfg.w;
  for (auto i : picks) {
    DiagnosticItem item;
    item.example = pool[i];
    item.example_id = example_id(item.example.origin);
    const auto& tr = corpus.find(item.example.origin.transcript_id);
    for (const auto& c : item.example.window) {
      DisplayElement d;
      if (!c.is_pad()) {
        auto it = std::find_if(tr.utterances.begin(), tr.utterances.end(),
                               [&](const Utterance& u) { return u.idx == c.utterance_idx; });
        if (it == tr.utterances.end()) throw ValidationError("diagnostic: utterance not found in corpus");
        d.pad = false;
        d.speaker_change = c.speaker_change;
        d.speaker_id = it->speaker_id;
        d.role = it->role;
        d.text = it->text;
        d.talk_move = it->talk_move;
        d.idx = it->idx;
      }
      item.display.push_back(std::move(d));
    }
    set.items.push_back(std::move(item));
  }
  return set;
}

void write_diagnostic_jsonl(std::ostream& out, const DiagnosticSet& set) {
  for (const auto& item : set.items) {
    json ctx = json::array();
    for (const auto& d : item.display) {
      if (d.pad) {
        ctx.push_back({{"pad", true}});
        continue;
      }
      ctx.push_back({{"pad", false},
                     {"s", d.speaker_change},
                     {"speaker_id", d.speaker_id},
                     {"role", name_of(d.role)},
                     {"text", d.text},
                     {"talk_move", name_of(d.talk_move)},
                     {"idx", d.idx}});
    }
    json j = {{"example_id", item.example_id},
              {"transcript_id", item.example.origin.transcript_id},
              {"position", item.example.origin.position},
              {"label", name_of(item.example.label)},
              {"source_split", set.source_split},
              {"seed", set.seed},
              {"window", set.window},
              {"context", ctx}};
    out << j.dump() << '\n';
  }
}

void save_diagnostic(const DiagnosticSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_diagnostic_jsonl(out, set);
}

DiagnosticSet load_diagnostic(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  DiagnosticSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      DiagnosticItem item;
      item.example_id = j.at("example_id").get<std::string>();
      item.example.origin = {j.at("transcript_id").get<std::string>(), j.at("position").get<std::size_t>()};
      item.example.label = move_from_json(j.at("label"));
      set.source_split = j.value("source_split", set.source_split);
      set.seed = j.value("seed", set.seed);
      set.window = j.value("window", set.window);
      for (const auto& c : j.at("context")) {
        DisplayElement d;
        ContextElement e;
        if (!c.at("pad").get<bool>()) {
          d.pad = false;
          d.speaker_change = c.at("s").get<int>();
          d.speaker_id = c.at("speaker_id").get<std::string>();
          auto role = parse_role(c.at("role").get<std::string>());
          if (!role) throw ValidationError("unknown role");
          d.role = *role;
          d.text = c.at("text").get<std::string>();
          d.talk_move = move_from_json(c.at("talk_move"));
          d.idx = c.at("idx").get<std::int64_t>();
          e.speaker_change = d.speaker_change;
          e.tokens = vocab.encode(tokenize(d.text));
          e.move = index_of(d.talk_move);
          e.utterance_idx = d.idx;
        }
        item.display.push_back(std::move(d));
        item.example.window.push_back(std::move(e));
      }
      if (set.find(item.example_id)) throw ValidationError("duplicate example id " + item.example_id);
      set.items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), lineno);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return set;
}

void validate(const AnnotationRecord& r) {
  if (r.annotator_id.empty()) throw ValidationError("annotation: empty annotator_id");
  if (r.example_id.empty()) throw ValidationError("annotation: empty example_id");
  if (r.acceptable.empty()) throw ValidationError("annotation: acceptable set is empty");
  if (!r.acceptable.contains(r.primary)) throw ValidationError("annotation: primary is not in the acceptable set");
}

std::string to_json(const AnnotationRecord& r) {
  json acc = json::array();
  for (auto m : r.acceptable) acc.push_back(name_of(m));
  json j = {{"annotator_id", r.annotator_id},
            {"example_id", r.example_id},
            {"primary", name_of(r.primary)},
            {"acceptable", acc},
            {"timestamp", r.timestamp}};
  return j.dump();
}

AnnotationRecord annotation_from_json(const std::string& line) {
  AnnotationRecord r;
  try {
    const json j = json::parse(line);
    r.annotator_id = j.at("annotator_id").get<std::string>();
    r.example_id = j.at("example_id").get<std::string>();
    r.primary = move_from_json(j.at("primary"));
    if (!j.at("acceptable").is_array()) throw ValidationError("annotation: acceptable must be an array");
    for (const auto& m : j.at("acceptable")) r.acceptable.insert(move_from_json(m));
    r.timestamp = j.value("timestamp", std::string());
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation: ") + e.what());
  }
  validate(r);
  return r;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

double primary_agreement(std::span<const AnnotationRecord> a, std::span<const AnnotationRecord> b) {
  check_same_ids(a, b);
  const auto bi = by_id(b);
  by_id(a);
  std::size_t hits = 0;
  for (const auto& r : a) hits += r.primary == lookup(bi, r.example_id).primary;
  return percent(hits, a.size());
}

double acceptance_rate(std::span<const AnnotationRecord> source, std::span<const AnnotationRecord> judge) {
  check_same_ids(source, judge);
  const auto ji = by_id(judge);
  by_id(source);
  std::size_t hits = 0;
  for (const auto& r : source) hits += lookup(ji, r.example_id).acceptable.contains(r.primary);
  return percent(hits, source.size());
}

double acceptance_rate(std::span<const std::string> ids, std::span<const TalkMove> source,
                       std::span<const AnnotationRecord> judge) {
  if (ids.size() != source.size()) throw ValidationError("acceptance_rate: ids and moves differ in length");
  if (ids.size() != judge.size())
    throw ValidationError("acceptance_rate: " + std::to_string(ids.size()) + " examples but " +
                          std::to_string(judge.size()) + " judge records");
  if (ids.empty()) throw ValidationError("no records");
  const auto ji = by_id(judge);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) hits += lookup(ji, ids[i]).acceptable.contains(source[i]);
  return percent(hits, ids.size());
}

AgreementReport agreement_report(std::span<const std::string> ids, std::span<const AnnotationRecord> ann1,
                                 std::span<const AnnotationRecord> ann2, std::span<const TalkMove> model,
                                 std::span<const TalkMove> truth) {
  const std::size_t n = ids.size();
  if (n == 0) throw ValidationError("agreement report: no examples");
  if (model.size() != n || truth.size() != n)
    throw ValidationError("agreement report: model/truth not aligned with the example ids");
  if (ann1.size() != n) throw ValidationError("agreement report: annotator 1 has not annotated every example");
  if (!ann2.empty() && ann2.size() != n)
    throw ValidationError("agreement report: annotator 2 has not annotated every example");
  const bool two = !ann2.empty();

  const auto i1 = by_id(ann1);
  std::vector<TalkMove> p1(n), p2(n);
  std::vector<AnnotationRecord> truth_recs(n), model_recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = lookup(i1, ids[i]).primary;
    truth_recs[i] = {"truth", ids[i], truth[i], {truth[i]}, ""};
    model_recs[i] = {"model", ids[i], model[i], {model[i]}, ""};
  }
  std::map<std::string, const AnnotationRecord*, std::less<>> i2;
  if (two) {
    i2 = by_id(ann2);
    for (std::size_t i = 0; i < n; ++i) p2[i] = lookup(i2, ids[i]).primary;
  }

  auto agree = [&](const std::vector<TalkMove>& a, std::span<const TalkMove> b) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += a[i] == b[i];
    return percent(hits, n);
  };
  auto opt = [&](auto f) -> std::optional<double> {
    if (!two) return std::nullopt;
    return f();
  };
  const std::vector<TalkMove> model_v(model.begin(), model.end());

  AgreementReport r;
  r.num_examples = n;
  r.rows = {
      {"Inter-annotator agreement", opt([&] { return agree(p1, p2); })},
      {"Annotator 1-ground truth agreement", agree(p1, truth)},
      {"Annotator 2-ground truth agreement", opt([&] { return agree(p2, truth); })},
      {"Both Annotators-ground truth agreement", opt([&] {
         std::size_t hits = 0;
         for (std::size_t i = 0; i < n; ++i) hits += p1[i] == truth[i] && p2[i] == truth[i];
         return percent(hits, n);
       })},
      {"Model-Annotator 1 agreement", agree(model_v, p1)},
      {"Model-Annotator 2 agreement", opt([&] { return agree(model_v, p2); })},
      {"Model-ground truth", agree(model_v, truth)},
      {"Annotator 1's primary accepted by Annotator 2", opt([&] { return acceptance_rate(ann1, ann2); })},
      {"Annotator 2's primary accepted by Annotator 1", opt([&] { return acceptance_rate(ann2, ann1); })},
      {"Ground truth accepted by Annotator 1", acceptance_rate(ids, truth, ann1)},
      {"Ground truth accepted by Annotator 2", opt([&] { return acceptance_rate(ids, truth, ann2); })},
      {"Model predictions accepted by Annotator 1", acceptance_rate(ids, model, ann1)},
      {"Model predictions accepted by Annotator 2", opt([&] { return acceptance_rate(ids, model, ann2); })},
  };
  auto mean_size = [&](std::span<const AnnotationRecord> recs) {
    double s = 0;
    for (const auto& rec : recs) s += static_cast<double>(rec.acceptable.size());
    return s / static_cast<double>(recs.size());
  };
  r.mean_acceptable_size_1 = mean_size(ann1);
  if (two) r.mean_acceptable_size_2 = mean_size(ann2);
  r.model_vs_truth = prf1(confusion(truth, model));
  r.annotator1_vs_truth = prf1(confusion(truth, p1));
  if (two) r.annotator2_vs_truth = prf1(confusion(truth, p2));
  return r;
}

namespace {

json eval_json(const EvalReport& e) {
  json per = json::object();
  for (std::size_t c = 0; c < e.per_class.size(); ++c) {
    const auto& s = e.per_class[c];
    per[std::string(name_of(talk_move_from_index(static_cast<int>(c))))] = {
        {"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
  }
  json matrix = json::array();
  for (Eigen::Index r = 0; r < e.matrix.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < e.matrix.cols(); ++c) row.push_back(e.matrix(r, c));
    matrix.push_back(row);
  }
  return {{"per_class", per},
          {"macro", {{"precision", e.macro.precision}, {"recall", e.macro.recall}, {"f1", e.macro.f1}}},
          {"accuracy", e.accuracy},
          {"confusion", matrix}};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string fmt_pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", *v);
  return buf;
}

}  // namespace

std::string report_json(const AgreementReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back({{"name", row.name}, {"percent", opt_json(row.percent)}});
  json j = {{"num_examples", r.num_examples},
            {"rows", rows},
            {"mean_acceptable_size", {{"annotator_1", opt_json(r.mean_acceptable_size_1)},
                                      {"annotator_2", opt_json(r.mean_acceptable_size_2)}}},
            {"labels", talk_move_names()},
            {"model_vs_truth", eval_json(r.model_vs_truth)},
            {"annotator_1_vs_truth", r.annotator1_vs_truth ? eval_json(*r.annotator1_vs_truth) : json(nullptr)},
            {"annotator_2_vs_truth", r.annotator2_vs_truth ? eval_json(*r.annotator2_vs_truth) : json(nullptr)}};
  return j.dump(2);
}

std::string report_markdown(const AgreementReport& r) {
  std::ostringstream s;
  s << "| Agreement (" << r.num_examples << " examples) | % |\n|---|---:|\n";
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    if (i == 0) s << "| *Primary option: annotators* | |\n";
    if (i == 4) s << "| *Primary option: model* | |\n";
    if (i == 7) s << "| *Acceptable options* | |\n";
    s << "| " << r.rows[i].name << " | " << fmt_pct(r.rows[i].percent) << " |\n";
  }
  char buf[64];
  auto size = [&](const std::optional<double>& v) {
    if (!v) return std::string("n/a");
    std::snprintf(buf, sizeof buf, "%.2f", *v);
    return std::string(buf);
  };
  s << "\nMean acceptable-set size: annotator 1 " << size(r.mean_acceptable_size_1) << ", annotator 2 "
    << size(r.mean_acceptable_size_2) << "\n\n";
  s << table_header() << '\n';
  s << table_row("Model", r.model_vs_truth) << '\n';
  if (r.annotator1_vs_truth) s << table_row("Annotator 1", *r.annotator1_vs_truth) << '\n';
  if (r.annotator2_vs_truth) s << table_row("Annotator 2", *r.annotator2_vs_truth) << '\n';
  return s.str();
}

}  // namespace ftmp
