#ifndef WARP_CHECKPOINT_HPP_
#define WARP_CHECKPOINT_HPP_

// Single-file checkpoint:
//   "WARPCKPT" | version (1 byte) | manifest length (u64 LE) | manifest (UTF-8 JSON) | blob
// The blob is the concatenation of all groups as little-endian f32, at the
// blob-relative offsets listed in the manifest.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"
#include "warp/io.hpp"
#include "warp/tensor_store.hpp"

namespace warp {

inline constexpr std::string_view kCheckpointMagic = "WARPCKPT";
inline constexpr std::uint8_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderSize = 8 + 1 + 8;

inline nlohmann::ordered_json arch_to_json(const ArchConfig& a) {
  return {{"vocab_size", a.vocab_size},         {"embed_dim", a.embed_dim},
          {"num_blocks", a.num_blocks},         {"num_heads", a.num_heads},
          {"max_prompt_len", a.max_prompt_len}, {"max_completion_len", a.max_completion_len},
          {"mlp_hidden", a.mlp_hidden}};
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i])) << (8 * i);
  return v;
}

template <class T>
T manifest_field(const nlohmann::json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedManifest, std::string("field '") + key + "': " + e.what());
  }
}

inline ArchConfig arch_from_manifest(const nlohmann::json& j) {
  ArchConfig a;
  a.vocab_size = manifest_field<int>(j, "vocab_size");
  a.embed_dim = manifest_field<int>(j, "embed_dim");
  a.num_blocks = manifest_field<int>(j, "num_blocks");
  a.num_heads = manifest_field<int>(j, "num_heads");
  a.max_prompt_len = manifest_field<int>(j, "max_prompt_len");
  a.max_completion_len = manifest_field<int>(j, "max_completion_len");
  a.mlp_hidden = manifest_field<int>(j, "mlp_hidden");
  return a;
}

}  // namespace detail

inline std::string serialize_checkpoint(const WeightSet& w) {
  nlohmann::ordered_json groups = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& g : w.groups) {
    const std::uint64_t len = g.data.size() * 4;
    groups.push_back({{"name", g.name},
                      {"shape", g.shape},
                      {"dtype", "f32le"},
                      {"offset", offset},
                      {"length", len}});
    offset += len;
  }
  nlohmann::ordered_json manifest = {
      {"meta", {{"arch", arch_to_json(w.meta.arch)}, {"step", w.meta.step}, {"seed", w.meta.seed}}},
      {"groups", groups}};
  const std::string text = manifest.dump();

  std::string out(kCheckpointMagic);
  out.push_back(static_cast<char>(kCheckpointVersion));
  detail::put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& g : w.groups) {
    for (float v : g.data) {
      const auto bits = std::bit_cast<std::uint32_t>(v);
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

inline WeightSet parse_checkpoint(std::string_view bytes) {
  require(bytes.size() >= kCheckpointMagic.size() && bytes.substr(0, 8) == kCheckpointMagic,
          ErrorCode::kBadMagic, "missing WARPCKPT magic");
  require(bytes.size() >= kCheckpointHeaderSize, ErrorCode::kMalformedManifest, "header truncated");
  const auto version = static_cast<std::uint8_t>(bytes[8]);
  require(version == kCheckpointVersion, ErrorCode::kMalformedManifest,
          "unsupported format version " + std::to_string(version));
  const std::uint64_t manifest_len = detail::get_u64(bytes.substr(9, 8));
  require(manifest_len <= bytes.size() - kCheckpointHeaderSize, ErrorCode::kMalformedManifest,
          "manifest length exceeds file size");
  const auto text = bytes.substr(kCheckpointHeaderSize, manifest_len);
  const auto blob = bytes.substr(kCheckpointHeaderSize + manifest_len);

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kMalformedManifest, e.what());
  }
  require(manifest.is_object() && manifest.contains("meta") && manifest.contains("groups") &&
              manifest["groups"].is_array(),
          ErrorCode::kMalformedManifest, "manifest needs 'meta' and 'groups'");

  WeightSet w;
  const auto& meta = manifest["meta"];
  require(meta.is_object() && meta.contains("arch"), ErrorCode::kMalformedManifest,
          "meta needs 'arch'");
  w.meta.arch = detail::arch_from_manifest(meta["arch"]);
  w.meta.step = detail::manifest_field<std::uint64_t>(meta, "step");
  w.meta.seed = detail::manifest_field<std::uint64_t>(meta, "seed");

  std::uint64_t expect_offset = 0;
  for (const auto& jg : manifest["groups"]) {
    TensorGroup g;
    g.name = detail::manifest_field<std::string>(jg, "name");
    g.shape = detail::manifest_field<std::vector<std::int64_t>>(jg, "shape");
    const auto dtype = detail::manifest_field<std::string>(jg, "dtype");
    const auto offset = detail::manifest_field<std::uint64_t>(jg, "offset");
    const auto length = detail::manifest_field<std::uint64_t>(jg, "length");
    require(dtype == "f32le", ErrorCode::kUnknownDtype, "group '" + g.name + "' dtype '" + dtype + "'");
    for (auto d : g.shape)
      require(d > 0, ErrorCode::kMalformedManifest, "group '" + g.name + "' has non-positive dim");
    require(offset == expect_offset, ErrorCode::kMalformedManifest,
            "group '" + g.name + "' offset " + std::to_string(offset) + " expected " +
                std::to_string(expect_offset));
    require(length % 4 == 0 && static_cast<std::uint64_t>(shape_numel(g.shape)) == length / 4,
            ErrorCode::kShapeMismatch,
            "group '" + g.name + "' shape " + shape_string(g.shape) + " vs byte length " +
                std::to_string(length));
    require(offset + length <= blob.size(), ErrorCode::kTruncatedBlob,
            "group '" + g.name + "' needs bytes up to " + std::to_string(offset + length) +
                ", blob has " + std::to_string(blob.size()));
    g.data.resize(length / 4);
    for (std::size_t i = 0; i < g.data.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[offset + 4 * i + b])) << (8 * b);
      g.data[i] = std::bit_cast<float>(bits);
    }
    expect_offset = offset + length;
    w.groups.push_back(std::move(g));
  }
  require(expect_offset == blob.size(), ErrorCode::kMalformedManifest,
          "blob has " + std::to_string(blob.size() - expect_offset) + " trailing bytes");
  return w;
}

inline void save_checkpoint(const WeightSet& w, const std::filesystem::path& path) {
  io::atomic_write(path, serialize_checkpoint(w));
}

inline WeightSet load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(io::read_file(path));
}

}  // namespace warp

#endif  // WARP_CHECKPOINT_HPP_
