#ifndef WARP_ARCH_HPP_
#define WARP_ARCH_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "warp/error.hpp"

namespace warp {

// Architecture descriptor of the policy. It fully determines the list of
// tensor groups (name and shape) of a WeightSet.
struct ArchConfig {
  int vocab_size = 32;
  int embed_dim = 32;
  int num_blocks = 2;
  int num_heads = 2;
  int max_prompt_len = 4;
  int max_completion_len = 16;
  int mlp_hidden = 64;

  int head_dim() const { return embed_dim / num_heads; }
  int max_seq_len() const { return max_prompt_len + max_completion_len; }

  void validate() const {
    require(vocab_size >= 1, ErrorCode::kInvalidArgument, "vocab_size must be >= 1");
    require(embed_dim >= 1, ErrorCode::kInvalidArgument, "embed_dim must be >= 1");
    require(num_heads >= 1 && embed_dim % num_heads == 0, ErrorCode::kInvalidArgument,
            "embed_dim must be divisible by num_heads");
    require(num_blocks >= 2, ErrorCode::kInvalidArgument, "num_blocks must be >= 2");
    require(max_prompt_len >= 1, ErrorCode::kInvalidArgument, "max_prompt_len must be >= 1");
    require(max_completion_len >= 1, ErrorCode::kInvalidArgument,
            "max_completion_len must be >= 1");
    require(mlp_hidden >= 1, ErrorCode::kInvalidArgument, "mlp_hidden must be >= 1");
  }

  bool operator==(const ArchConfig&) const = default;
};

// Offsets of the parameters fused into one "block.<i>" group. Matrices are
// stored row-major as [in, out].
struct BlockLayout {
  std::size_t ln1_gain, ln1_bias;
  std::size_t w_qkv, b_qkv;
  std::size_t w_out, b_out;
  std::size_t ln2_gain, ln2_bias;
  std::size_t w_fc, b_fc;
  std::size_t w_proj, b_proj;
  std::size_t size;

  static BlockLayout of(const ArchConfig& a) {
    const std::size_t c = a.embed_dim, h = a.mlp_hidden;
    BlockLayout l{};
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
      const std::size_t at = off;
      off += n;
      return at;
    };
    l.ln1_gain = take(c);
    l.ln1_bias = take(c);
    l.w_qkv = take(c * 3 * c);
    l.b_qkv = take(3 * c);
    l.w_out = take(c * c);
    l.b_out = take(c);
    l.ln2_gain = take(c);
    l.ln2_bias = take(c);
    l.w_fc = take(c * h);
    l.b_fc = take(h);
    l.w_proj = take(h * c);
    l.b_proj = take(c);
    l.size = off;
    return l;
  }
};

struct GroupSpec {
  std::string name;
  std::vector<std::int64_t> shape;
};

// Group order: tok_embed, pos_embed, block.0 .. block.{n-1}, final_norm, head.
// final_norm rows are (gain, bias); head rows are C weight rows then a bias row.
inline std::vector<GroupSpec> schema(const ArchConfig& a) {
  a.validate();
  const std::int64_t v = a.vocab_size, c = a.embed_dim;
  std::vector<GroupSpec> out;
  out.push_back({"tok_embed", {v, c}});
  out.push_back({"pos_embed", {a.max_seq_len(), c}});
  const auto block = static_cast<std::int64_t>(BlockLayout::of(a).size);
  for (int i = 0; i < a.num_blocks; ++i) out.push_back({"block." + std::to_string(i), {block}});
  out.push_back({"final_norm", {2, c}});
  out.push_back({"head", {c + 1, v}});
  return out;
}

}  // namespace warp

#endif  // WARP_ARCH_HPP_
