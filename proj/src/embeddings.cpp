// SPDX-License-Identifier: Apache-2.0
#include "ftmp/embeddings.hpp"

#include <fstream>

#include "ftmp/error.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

std::string embedding_key(std::string_view transcript_id, std::int64_t idx) {
  return std::string(transcript_id) + ":" + std::to_string(idx);
}

void EmbeddingStore::put(std::string key, Eigen::VectorXd vec) {
  if (vecs_.empty() && dim_ == 0) dim_ = static_cast<int>(vec.size());
  if (vec.size() != dim_)
    throw ValidationError("embedding \"" + key + "\" has dimension " + std::to_string(vec.size()) +
                          ", expected " + std::to_string(dim_));
  if (!vec.allFinite()) throw ValidationError("embedding \"" + key + "\" is not finite");
  vecs_[std::move(key)] = std::move(vec);
}

const Eigen::VectorXd& EmbeddingStore::at(std::string_view key) const {
  auto it = vecs_.find(key);
  if (it == vecs_.end()) throw ValidationError("no external embedding for key \"" + std::string(key) + "\"");
  return it->second;
}

bool EmbeddingStore::contains(std::string_view key) const { return vecs_.find(key) != vecs_.end(); }

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  EmbeddingStore store;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      auto vals = j.at("vec").get<std::vector<double>>();
      store.put(j.at("key").get<std::string>(),
                Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    } catch (const json::exception& e) {
      throw ParseError(e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return store;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [key, vec] : vecs_) {
    json j = {{"key", key}, {"vec", std::vector<double>(vec.data(), vec.data() + vec.size())}};
    out << j.dump() << '\n';
  }
}

}  // namespace ftmp
