// SPDX-License-Identifier: Apache-2.0
#include "ftmp/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "ftmp/error.hpp"

namespace ftmp {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * v);
  return buf;
}

std::vector<int> indices(std::span<const TalkMove> moves) {
  std::vector<int> out(moves.size());
  std::transform(moves.begin(), moves.end(), out.begin(), [](TalkMove m) { return index_of(m); });
  return out;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ConfusionMatrix confusion(std::span<const int> golds, std::span<const int> preds, int k) {
  if (golds.size() != preds.size())
    throw ValidationError("confusion: " + std::to_string(golds.size()) + " gold labels but " +
                          std::to_string(preds.size()) + " predictions");
  if (golds.empty()) throw ValidationError("confusion: no examples");
  ConfusionMatrix m = ConfusionMatrix::Zero(k, k);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (golds[i] < 0 || golds[i] >= k || preds[i] < 0 || preds[i] >= k)
      throw ValidationError("confusion: label index out of range");
    ++m(golds[i], preds[i]);
  }
  return m;
}

ConfusionMatrix confusion(std::span<const TalkMove> golds, std::span<const TalkMove> preds) {
  const auto g = indices(golds), p = indices(preds);
  return confusion(g, p, kNumTalkMoves);
}

EvalReport prf1(const ConfusionMatrix& m) {
  const auto k = m.rows();
  if (m.cols() != k || k == 0) throw ValidationError("prf1: matrix must be square and nonempty");
  const double total = static_cast<double>(m.sum());
  if (total <= 0) throw ValidationError("prf1: empty confusion matrix");
  EvalReport r;
  r.matrix = m;
  r.per_class.resize(static_cast<std::size_t>(k));
  for (Eigen::Index c = 0; c < k; ++c) {
    const double tp = static_cast<double>(m(c, c));
    const double pred = static_cast<double>(m.col(c).sum());
    const double gold = static_cast<double>(m.row(c).sum());
    auto& s = r.per_class[static_cast<std::size_t>(c)];
    s.precision = ratio(tp, pred);
    s.recall = ratio(tp, gold);
    s.f1 = ratio(2 * s.precision * s.recall, s.precision + s.recall);
    r.macro.precision += s.precision;
    r.macro.recall += s.recall;
    r.macro.f1 += s.f1;
  }
  r.macro.precision /= static_cast<double>(k);
  r.macro.recall /= static_cast<double>(k);
  r.macro.f1 /= static_cast<double>(k);
  r.accuracy = static_cast<double>(m.trace()) / total;
  return r;
}

Facet facet_of(TalkMove move) {
  switch (move) {
    case TalkMove::None: return Facet::NoneBin;
    case TalkMove::Wait: return Facet::WaitBin;
    case TalkMove::KeepingEveryoneTogether:
    case TalkMove::GettingStudentsToRelate:
    case TalkMove::Restating: return Facet::LearningCommunity;
    case TalkMove::PressForAccuracy: return Facet::ContentKnowledge;
    case TalkMove::Revoicing:
    case TalkMove::PressForReasoning: return Facet::RigorousThinking;
  }
  throw ValidationError("facet_of: invalid talk move");
}

EvalReport facet_eval(std::span<const TalkMove> golds, std::span<const TalkMove> preds) {
  std::vector<int> g(golds.size()), p(preds.size());
  std::transform(golds.begin(), golds.end(), g.begin(), [](TalkMove m) { return static_cast<int>(facet_of(m)); });
  std::transform(preds.begin(), preds.end(), p.begin(), [](TalkMove m) { return static_cast<int>(facet_of(m)); });
  return prf1(confusion(g, p, kNumFacets));
}

std::vector<std::string> talk_move_names() {
  std::vector<std::string> out;
  for (auto m : kAllTalkMoves) out.emplace_back(name_of(m));
  return out;
}

std::vector<std::string> facet_names() {
  std::vector<std::string> out;
  for (int f = 0; f < kNumFacets; ++f) out.emplace_back(name_of(static_cast<Facet>(f)));
  return out;
}

void write_report_csv(std::ostream& out, const EvalReport& report, std::span<const std::string> names) {
  if (names.size() != report.per_class.size()) throw ValidationError("report: name count mismatch");
  out << "class,Prec,Recall,F1\n";
  for (std::size_t c = 0; c < names.size(); ++c) {
    const auto& s = report.per_class[c];
    out << names[c] << ',' << pct(s.precision) << ',' << pct(s.recall) << ',' << pct(s.f1) << '\n';
  }
  out << "Macro," << pct(report.macro.precision) << ',' << pct(report.macro.recall) << ','
      << pct(report.macro.f1) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  const auto names = talk_move_names();
  write_report_csv(out, report, names);
}

void write_facet_report_csv(std::ostream& out, const EvalReport& report) {
  const auto names = facet_names();
  write_report_csv(out, report, names);
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m, std::span<const std::string> names) {
  if (static_cast<Eigen::Index>(names.size()) != m.rows()) throw ValidationError("confusion: name count mismatch");
  out << "gold\\pred";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out << names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << ',' << m(r, c);
    out << '\n';
  }
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& m) {
  const auto names = talk_move_names();
  write_confusion_csv(out, m, names);
}

void write_confusion_svg(std::ostream& out, const ConfusionMatrix& m, std::span<const std::string> names,
                         const std::string& title) {
  const int k = static_cast<int>(m.rows());
  if (static_cast<int>(names.size()) != k) throw ValidationError("confusion: name count mismatch");
  const int cell = 56, left = 200, top = 60;
  const int width = left + k * cell + 20, height = top + k * cell + 190;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << xml_escape(title)
      << "</text>\n";
  for (int r = 0; r < k; ++r) {
    const double row_total = static_cast<double>(m.row(r).sum());
    for (int c = 0; c < k; ++c) {
      const double frac = row_total > 0 ? static_cast<double>(m(r, c)) / row_total : 0.0;
      // White -> dark blue.
      const int red = static_cast<int>(255 - 215 * frac), green = static_cast<int>(255 - 170 * frac);
      const int x = left + c * cell, y = top + r * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << red << ',' << green << ",255)\" stroke=\"#999\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (frac > 0.5 ? "white" : "black") << "\">" << m(r, c) << "</text>\n";
    }
    out << "<text x=\"" << left - 8 << "\" y=\"" << top + r * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << xml_escape(names[static_cast<std::size_t>(r)]) << "</text>\n";
  }
  for (int c = 0; c < k; ++c) {
    const int x = left + c * cell + cell / 2, y = top + k * cell + 10;
    out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(60 " << x << ' ' << y << ")\">"
        << xml_escape(names[static_cast<std::size_t>(c)]) << "</text>\n";
  }
  out << "<text x=\"12\" y=\"" << top + k * cell / 2 << "\" transform=\"rotate(-90 12 " << top + k * cell / 2
      << ")\" text-anchor=\"middle\">gold</text>\n";
  out << "<text x=\"" << left + k * cell / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">predicted</text>\n";
  out << "</svg>\n";
}

std::string table_header() {
  std::ostringstream s;
  s << "model";
  for (auto m : kAllTalkMoves) s << " | " << name_of(m);
  s << " | Prec | Recall | F1 | Acc";
  return s.str();
}

std::string table_row(const std::string& name, const EvalReport& report) {
  std::ostringstream s;
  s << name;
  for (const auto& c : report.per_class) s << " | " << pct(c.f1);
  s << " | " << pct(report.macro.precision) << " | " << pct(report.macro.recall) << " | " << pct(report.macro.f1)
    << " | " << pct(report.accuracy);
  return s.str();
}

}  // namespace ftmp
