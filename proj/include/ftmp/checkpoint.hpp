// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "ftmp/corpus.hpp"
#include "ftmp/model.hpp"

namespace ftmp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// A trained network plus everything needed to run it on raw text.
struct Checkpoint {
  std::unique_ptr<Model> model;
  Vocabulary vocab;
  int window = 5;
  // Free-form JSON object (training config, corpus path, ...).
  std::string meta = "{}";
};

// Layout (docs/formats.md): 8-byte magic "FTMPCKPT", u32 version, u64 header
// length, JSON header, little-endian float64 parameter blocks in the model's
// canonical order, then a CRC-32 of everything before it.
void save_model(const Checkpoint& ckpt, const std::filesystem::path& path);
// Throws VersionError for a different format version and ChecksumError for
// truncated or corrupted files.
Checkpoint load_model(const std::filesystem::path& path);

// Short identifier derived from the file's CRC, e.g. "3e-1a2b3c4d".
std::string model_version(const std::filesystem::path& path);

}  // namespace ftmp
