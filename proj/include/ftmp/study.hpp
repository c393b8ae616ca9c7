// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ftmp/corpus.hpp"
#include "ftmp/evaluation.hpp"
#include "ftmp/windowing.hpp"

namespace ftmp {

// Per-class sample sizes, canonical order. None, Wait, Restating and
// Revoicing get 37; the other four get 38.
inline constexpr std::array<int, kNumTalkMoves> kDiagnosticComposition = {37, 37, 38, 38, 37, 38, 37, 38};
inline constexpr int kDiagnosticSize = 300;

// A context element as shown to annotators.
struct DisplayElement {
  bool pad = true;
  int speaker_change = 0;
  std::string speaker_id;
  Role role = Role::Teacher;
  std::string text;
  TalkMove talk_move = TalkMove::None;
  std::int64_t idx = -1;
};

struct DiagnosticItem {
  std::string example_id;  // "<transcript_id>:<position>"
  Example example;
  std::vector<DisplayElement> display;  // same length as example.window
};

struct DiagnosticSet {
  std::vector<DiagnosticItem> items;
  std::string source_split = "dev";
  std::uint64_t seed = 0;
  int window = 5;

  const DiagnosticItem* find(std::string_view example_id) const;
};

std::string example_id(const ExampleOrigin& origin);

// Seeded uniform sampling without replacement within each class. Items
// are ordered by class, then by sampling order. Throws ValidationError
// listing every short class as "<Move>: need N, have M".
std::vector<std::size_t> sample_diagnostic_indices(std::span<const Example> pool, std::uint64_t seed);
// Samples from the corpus' dev examples; display text comes from the corpus.
DiagnosticSet sample_diagnostic(const Corpus& corpus, const Vocabulary& vocab, WindowConfig cfg,
                                std::uint64_t seed);

// JSONL, one item per line (plus human-readable text); loading
// re-tokenizes with the given vocabulary.
void write_diagnostic_jsonl(std::ostream& out, const DiagnosticSet& set);
void save_diagnostic(const DiagnosticSet& set, const std::filesystem::path& path);
DiagnosticSet load_diagnostic(const std::filesystem::path& path, const Vocabulary& vocab);

struct AnnotationRecord {
  std::string annotator_id;
  std::string example_id;
  TalkMove primary = TalkMove::None;
  std::set<TalkMove> acceptable;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const AnnotationRecord&) const = default;
};

// primary in acceptable, acceptable nonempty, ids nonempty.
void validate(const AnnotationRecord& r);
std::string to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const std::string& line);
std::string utc_timestamp();

// Records aligned by example id; both sides must cover the same ids.
double primary_agreement(std::span<const AnnotationRecord> a, std::span<const AnnotationRecord> b);
// Fraction (x100) of examples where source's move is in judge's acceptable set.
double acceptance_rate(std::span<const AnnotationRecord> source, std::span<const AnnotationRecord> judge);
double acceptance_rate(std::span<const std::string> ids, std::span<const TalkMove> source,
                       std::span<const AnnotationRecord> judge);

struct AgreementRow {
  std::string name;
  std::optional<double> percent;  // null when the row needs a missing annotator
};

struct AgreementReport {
  std::vector<AgreementRow> rows;  // the 13 agreement rows, fixed order
  std::optional<double> mean_acceptable_size_1;
  std::optional<double> mean_acceptable_size_2;
  std::size_t num_examples = 0;
  EvalReport model_vs_truth;
  std::optional<EvalReport> annotator1_vs_truth;
  std::optional<EvalReport> annotator2_vs_truth;
};

// ann2 may be empty. Ids are the diagnostic example ids; model and truth
// are aligned with them.
AgreementReport agreement_report(std::span<const std::string> ids, std::span<const AnnotationRecord> ann1,
                                 std::span<const AnnotationRecord> ann2, std::span<const TalkMove> model,
                                 std::span<const TalkMove> truth);

std::string report_json(const AgreementReport& r);
std::string report_markdown(const AgreementReport& r);

}  // namespace ftmp
