// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <functional>
#include <numeric>
#include <random>
#include <unistd.h>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "doctest.h"
#include "ftmp/checkpoint.hpp"
#include "ftmp/error.hpp"
#include "ftmp/model3e.hpp"
#include "ftmp/tm_only.hpp"

using namespace ftmp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("ftmp_ckpt_" + name + "_" + std::to_string(::getpid()));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint make_3e() {
  Vocabulary v;
  for (const char* t : {"a", "b", "c", "d"}) v.add(t);
  auto d = Model3EDims::tiny(v.size());
  Model3EParams p(d);
  p.init(9);
  return Checkpoint{std::make_unique<Model3E>(std::move(p)), v, 3, R"({"note":"x"})"};
}

bool bitwise_equal(Model& a, Model& b) {
  auto pa = a.named_parameters(), pb = b.named_parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    const auto& x = pa[k].param->value;
    const auto& y = pb[k].param->value;
    if (pa[k].name != pb[k].name || x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("checkpoint") {

TEST_CASE("3-E round trip is bitwise") {
  const auto path = temp_file("3e");
  auto ck = make_3e();
  save_model(ck, path);
  auto back = load_model(path);
  CHECK(back.model->kind() == ModelKind::ThreeE);
  CHECK(back.window == 3);
  CHECK(back.vocab == ck.vocab);
  CHECK(bitwise_equal(*ck.model, *back.model));
  CHECK(back.meta.find("\"note\"") != std::string::npos);
  // Saving the loaded copy reproduces the same bytes.
  const auto again = temp_file("3e_again");
  save_model(back, again);
  CHECK(slurp(path) == slurp(again));
  CHECK(model_version(path) == model_version(again));
}

TEST_CASE("TM-only round trip keeps the weighting flag") {
  const auto path = temp_file("tm");
  TmOnlyParams p(TmOnlyDims{4, 6}, false);
  p.init(2);
  Checkpoint ck{std::make_unique<TmOnlyModel>(std::move(p)), Vocabulary{}, 5, "{}"};
  save_model(ck, path);
  auto back = load_model(path);
  REQUIRE(back.model->kind() == ModelKind::TmOnly);
  CHECK_FALSE(dynamic_cast<TmOnlyModel&>(*back.model).params().weighted);
  CHECK(bitwise_equal(*ck.model, *back.model));
}

TEST_CASE("corruption is detected") {
  const auto path = temp_file("corrupt");
  auto ck = make_3e();
  save_model(ck, path);
  const auto bytes = slurp(path);

  SUBCASE("flipped payload byte") {
    auto b = bytes;
    b[b.size() / 2] ^= 0x01;
    dump(path, b);
    CHECK_THROWS_AS(load_model(path), ChecksumError);
  }
  SUBCASE("truncated") {
    for (std::size_t cut : {bytes.size() - 1, bytes.size() / 2, std::size_t{10}}) {
      dump(path, bytes.substr(0, cut));
      CHECK_THROWS_AS(load_model(path), ChecksumError);
    }
  }
  SUBCASE("other format version") {
    auto b = bytes;
    b[8] = 2;
    dump(path, b);
    CHECK_THROWS_AS(load_model(path), VersionError);
  }
  SUBCASE("not a checkpoint") {
    auto b = bytes;
    b[0] = 'X';
    dump(path, b);
    CHECK_THROWS_AS(load_model(path), ValidationError);
  }
  CHECK_THROWS_AS(load_model(temp_file("missing")), Error);
}

}
