// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <numeric>
#include <unistd.h>
#include <random>
#include <sstream>

#include "doctest.h"
#include "ftmp/error.hpp"
#include "ftmp/evaluation.hpp"

using namespace ftmp;
using enum TalkMove;

namespace {

std::vector<TalkMove> random_moves(std::size_t n, std::mt19937_64& rng) {
  std::vector<TalkMove> out(n);
  for (auto& m : out) m = talk_move_from_index(std::uniform_int_distribution<int>(0, 7)(rng));
  return out;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("confusion matrix basics") {
  const std::vector<TalkMove> g = {None, Wait, Revoicing, Wait};
  const auto m = confusion(g, g);
  CHECK(m.trace() == 4);
  CHECK(m.sum() == 4);
  const std::vector<TalkMove> one_g = {Wait}, one_p = {None};
  const auto m1 = confusion(one_g, one_p);
  CHECK(m1(1, 0) == 1);
  CHECK(m1.sum() == 1);
  CHECK_THROWS_AS(confusion(g, one_p), ValidationError);
  CHECK_THROWS_AS(confusion(std::vector<TalkMove>{}, std::vector<TalkMove>{}), ValidationError);
}

TEST_CASE("two-class worked example") {
  const std::vector<int> g = {0, 0, 1}, p = {0, 1, 1};
  const auto r = prf1(confusion(g, p, 2));
  CHECK(r.per_class[0].precision == 1.0);
  CHECK(r.per_class[0].recall == 0.5);
  CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.per_class[1].precision == 0.5);
  CHECK(r.per_class[1].recall == 1.0);
  CHECK(r.per_class[1].f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.macro.f1 == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(r.accuracy == doctest::Approx(2.0 / 3));
}

TEST_CASE("absent classes count as zero in the macro average") {
  const std::vector<TalkMove> g = {None, Wait}, p = {None, Wait};
  const auto r = prf1(confusion(g, p));
  CHECK(r.per_class[0].f1 == 1.0);
  CHECK(r.per_class[5].f1 == 0.0);
  CHECK(r.macro.f1 == doctest::Approx(2.0 / 8));
  CHECK(r.accuracy == 1.0);
}

TEST_CASE("row sums equal gold counts and metrics ignore example order") {
  std::mt19937_64 rng(1);
  auto g = random_moves(300, rng), p = random_moves(300, rng);
  const auto m = confusion(g, p);
  for (int k = 0; k < 8; ++k)
    CHECK(m.row(k).sum() == std::count(g.begin(), g.end(), talk_move_from_index(k)));
  const auto before = prf1(m);
  std::vector<std::size_t> idx(g.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<TalkMove> g2, p2;
  for (auto i : idx) {
    g2.push_back(g[i]);
    p2.push_back(p[i]);
  }
  const auto after = prf1(confusion(g2, p2));
  CHECK(after.macro.f1 == before.macro.f1);
  CHECK(after.accuracy == before.accuracy);
}

TEST_CASE("facets") {
  CHECK(facet_of(Restating) == Facet::LearningCommunity);
  CHECK(facet_of(KeepingEveryoneTogether) == Facet::LearningCommunity);
  CHECK(facet_of(GettingStudentsToRelate) == Facet::LearningCommunity);
  CHECK(facet_of(PressForAccuracy) == Facet::ContentKnowledge);
  CHECK(facet_of(Revoicing) == Facet::RigorousThinking);
  CHECK(facet_of(PressForReasoning) == Facet::RigorousThinking);
  CHECK(facet_of(None) == Facet::NoneBin);
  CHECK(facet_of(Wait) == Facet::WaitBin);

  const std::vector<TalkMove> g = {GettingStudentsToRelate, Revoicing, Restating, None};
  const std::vector<TalkMove> p = {KeepingEveryoneTogether, PressForReasoning, GettingStudentsToRelate, None};
  CHECK(prf1(confusion(g, p)).accuracy == 0.25);
  const auto f = facet_eval(g, p);
  CHECK(f.accuracy == 1.0);
  CHECK(f.per_class.size() == 5);
}

TEST_CASE("report exports") {
  const std::vector<int> g = {0, 0, 1}, p = {0, 1, 1};
  const auto r = prf1(confusion(g, p, 2));
  std::ostringstream out;
  const std::vector<std::string> names = {"A", "B"};
  write_report_csv(out, r, names);
  CHECK(out.str() == "class,Prec,Recall,F1\nA,100.00,50.00,66.67\nB,50.00,100.00,66.67\nMacro,75.00,75.00,66.67\n");

  std::ostringstream c;
  write_confusion_csv(c, r.matrix, names);
  CHECK(c.str() == "gold\\pred,A,B\nA,1,1\nB,0,1\n");

  std::ostringstream svg;
  write_confusion_svg(svg, r.matrix, names, "t<1>");
  CHECK(svg.str().find("<svg") == 0);
  CHECK(svg.str().find("t&lt;1&gt;") != std::string::npos);

  const std::vector<TalkMove> tg = {None, Wait}, tp = {None, None};
  const auto row = table_row("X", prf1(confusion(tg, tp)));
  CHECK(row.rfind("X | 66.67 | 0.00 | 0.00", 0) == 0);
  CHECK(row.substr(row.size() - 5) == "50.00");
}

}
