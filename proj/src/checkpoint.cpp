// SPDX-License-Identifier: Apache-2.0
#include "ftmp/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ftmp/error.hpp"
#include "ftmp/model3e.hpp"
#include "ftmp/tm_only.hpp"
#include "json.hpp"

namespace ftmp {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'F', 'T', 'M', 'P', 'C', 'K', 'P', 'T'};
constexpr std::size_t kPreamble = sizeof kMagic + 4 + 8;

template <typename T>
void put_le(std::string& buf, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  buf.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const char* p) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

std::uint32_t crc32_of(const char* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

json dims_json(const Model& model) {
  if (auto* m = dynamic_cast<const Model3E*>(&model)) {
    const auto& d = m->params().dims;
    return {{"vocab_size", d.vocab_size}, {"word_dim", d.word_dim},
            {"utt_hidden", d.utt_hidden}, {"move_dim", d.move_dim},
            {"move_hidden", d.move_hidden}, {"dialogue_hidden", d.dialogue_hidden},
            {"ff_hidden", d.ff_hidden},   {"ext_utt", d.ext_utt},
            {"ext_ctx", d.ext_ctx}};
  }
  if (auto* m = dynamic_cast<const TmOnlyModel*>(&model)) {
    const auto& p = m->params();
    return {{"move_dim", p.dims.move_dim}, {"move_hidden", p.dims.move_hidden}, {"weighted", p.weighted}};
  }
  throw ValidationError("unsupported model type");
}

std::unique_ptr<Model> model_from(ModelKind kind, const json& d) {
  if (kind == ModelKind::ThreeE) {
    Model3EDims dims;
    dims.vocab_size = d.at("vocab_size").get<int>();
    dims.word_dim = d.at("word_dim").get<int>();
    dims.utt_hidden = d.at("utt_hidden").get<int>();
    dims.move_dim = d.at("move_dim").get<int>();
    dims.move_hidden = d.at("move_hidden").get<int>();
    dims.dialogue_hidden = d.at("dialogue_hidden").get<int>();
    dims.ff_hidden = d.at("ff_hidden").get<int>();
    dims.ext_utt = d.at("ext_utt").get<int>();
    dims.ext_ctx = d.at("ext_ctx").get<int>();
    return std::make_unique<Model3E>(Model3EParams(dims));
  }
  TmOnlyDims dims{d.at("move_dim").get<int>(), d.at("move_hidden").get<int>()};
  return std::make_unique<TmOnlyModel>(TmOnlyParams(dims, d.at("weighted").get<bool>()));
}

json label_list() {
  json labels = json::array();
  for (auto m : kAllTalkMoves) labels.push_back(name_of(m));
  return labels;
}

}  // namespace

void save_model(const Checkpoint& ckpt, const std::filesystem::path& path) {
  if (!ckpt.model) throw ValidationError("checkpoint has no model");
  auto params = ckpt.model->const_parameters();
  json blocks = json::array();
  for (const auto& [name, p] : params) blocks.push_back({{"name", name}, {"rows", p->rows()}, {"cols", p->cols()}});
  json meta = json::parse(ckpt.meta.empty() ? "{}" : ckpt.meta);
  json header = {{"format", "ftmp-checkpoint"},
                 {"kind", name_of(ckpt.model->kind())},
                 {"window", ckpt.window},
                 {"labels", label_list()},
                 {"dims", dims_json(*ckpt.model)},
                 {"vocab", ckpt.vocab.tokens()},
                 {"blocks", blocks},
                 {"meta", meta}};
  const std::string header_text = header.dump();

  std::string buf(kMagic, sizeof kMagic);
  put_le<std::uint32_t>(buf, kCheckpointVersion);
  put_le<std::uint64_t>(buf, header_text.size());
  buf += header_text;
  for (const auto& [name, p] : params)
    for (nc::Index i = 0; i < p->size(); ++i) put_le<double>(buf, p->value.data()[i]);
  put_le<std::uint32_t>(buf, crc32_of(buf.data(), buf.size()));

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error("short write to " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < kPreamble + 4) throw ChecksumError(path.string() + ": truncated checkpoint");
  if (std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0)
    throw ValidationError(path.string() + ": not a checkpoint file (bad magic)");
  const auto version = get_le<std::uint32_t>(buf.data() + sizeof kMagic);
  if (version != kCheckpointVersion)
    throw VersionError(path.string() + ": checkpoint format version " + std::to_string(version) +
                       " is not supported (this reader handles version " +
                       std::to_string(kCheckpointVersion) + ")");
  const auto stored_crc = get_le<std::uint32_t>(buf.data() + buf.size() - 4);
  if (crc32_of(buf.data(), buf.size() - 4) != stored_crc)
    throw ChecksumError(path.string() + ": checksum mismatch (truncated or corrupted)");

  const auto header_len = get_le<std::uint64_t>(buf.data() + sizeof kMagic + 4);
  if (header_len > buf.size() - kPreamble - 4) throw ChecksumError(path.string() + ": bad header length");
  json header;
  try {
    header = json::parse(buf.begin() + kPreamble, buf.begin() + kPreamble + static_cast<std::ptrdiff_t>(header_len));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": checkpoint header: " + e.what());
  }

  Checkpoint ck;
  try {
    if (header.at("labels") != label_list())
      throw ValidationError(path.string() + ": label order differs from the canonical order");
    ck.window = header.at("window").get<int>();
    ck.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
    ck.model = model_from(parse_model_kind(header.at("kind").get<std::string>()), header.at("dims"));
    ck.meta = header.value("meta", json::object()).dump();

    auto params = ck.model->named_parameters();
    const auto& blocks = header.at("blocks");
    if (blocks.size() != params.size()) throw ValidationError(path.string() + ": parameter block count mismatch");
    std::size_t offset = kPreamble + header_len;
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto* p = params[k].param;
      if (blocks[k].at("name") != params[k].name || blocks[k].at("rows") != p->rows() ||
          blocks[k].at("cols") != p->cols())
        throw ValidationError(path.string() + ": block " + params[k].name + " does not match the model");
      const auto bytes = static_cast<std::size_t>(p->size()) * sizeof(double);
      if (offset + bytes > buf.size() - 4) throw ChecksumError(path.string() + ": truncated parameter data");
      for (nc::Index i = 0; i < p->size(); ++i)
        p->value.data()[i] = get_le<double>(buf.data() + offset + static_cast<std::size_t>(i) * sizeof(double));
      offset += bytes;
    }
    if (offset != buf.size() - 4) throw ValidationError(path.string() + ": trailing bytes after parameters");
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": checkpoint header: " + e.what());
  }
  if (auto* m = dynamic_cast<Model3E*>(ck.model.get()); m && m->params().dims.vocab_size != ck.vocab.size())
    throw ValidationError(path.string() + ": vocabulary size does not match the embedding table");
  return ck;
}

std::string model_version(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4) throw ChecksumError(path.string() + ": truncated checkpoint");
  char hex[16];
  std::snprintf(hex, sizeof hex, "%08x", get_le<std::uint32_t>(buf.data() + buf.size() - 4));
  return hex;
}

}  // namespace ftmp
