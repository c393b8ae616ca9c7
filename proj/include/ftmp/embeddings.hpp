// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace ftmp {

// Sidecar of externally computed sentence/context embeddings, stored as
// JSONL lines {"key": "<transcript_id>:<idx>", "vec": [...]}.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(int dim) : dim_(dim) {}

  static EmbeddingStore load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void put(std::string key, Eigen::VectorXd vec);
  // Throws ValidationError for an unknown key.
  const Eigen::VectorXd& at(std::string_view key) const;
  bool contains(std::string_view key) const;

  int dim() const { return dim_; }
  std::size_t size() const { return vecs_.size(); }

 private:
  int dim_ = 0;
  std::map<std::string, Eigen::VectorXd, std::less<>> vecs_;
};

std::string embedding_key(std::string_view transcript_id, std::int64_t idx);

}  // namespace ftmp
