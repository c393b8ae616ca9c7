// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ftmp/talk_move.hpp"

namespace ftmp {

// K x K counts, rows = gold, cols = predicted, canonical order.
using ConfusionMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

ConfusionMatrix confusion(std::span<const TalkMove> golds, std::span<const TalkMove> preds);
// Generic K-class form over label indices in [0, k).
ConfusionMatrix confusion(std::span<const int> golds, std::span<const int> preds, int k);

struct ClassScores {
  double precision = 0, recall = 0, f1 = 0;
};

struct EvalReport {
  std::vector<ClassScores> per_class;
  ClassScores macro;
  double accuracy = 0;
  ConfusionMatrix matrix;
};

// 0/0 -> 0 for every ratio; macro is the unweighted mean over all classes
// including ones absent from the slice.
EvalReport prf1(const ConfusionMatrix& matrix);

// None and Wait keep their own bins.
Facet facet_of(TalkMove move);
EvalReport facet_eval(std::span<const TalkMove> golds, std::span<const TalkMove> preds);

// One row per class then a "Macro" row; Prec/Recall/F1 x100, 2 decimals.
// names.size() must equal the report's class count.
void write_report_csv(std::ostream& out, const EvalReport& report, std::span<const std::string> names);
void write_report_csv(std::ostream& out, const EvalReport& report);  // talk-move names
void write_facet_report_csv(std::ostream& out, const EvalReport& report);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m, std::span<const std::string> names);
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m);
// Row-normalized heat map as a standalone SVG.
void write_confusion_svg(std::ostream& out, const ConfusionMatrix& m, std::span<const std::string> names,
                         const std::string& title);

// "name | None F1 ... PressForReasoning F1 | Macro P R F1 | Acc", x100.
std::string table_row(const std::string& name, const EvalReport& report);
std::string table_header();

std::vector<std::string> talk_move_names();
std::vector<std::string> facet_names();

}  // namespace ftmp
