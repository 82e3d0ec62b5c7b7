#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <filesystem>
#include <limits>

#include "test_util.hpp"
#include "warp/checkpoint.hpp"

using namespace warp;
using warp::testing::make_set;

namespace {

ErrorCode parse_error(std::string_view bytes) {
  try {
    (void)parse_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("parse unexpectedly succeeded");
  return ErrorCode::kIo;
}

// Rebuilds a file with a hand-edited manifest and the given blob.
std::string with_manifest(const std::string& manifest, std::string_view blob) {
  std::string out(kCheckpointMagic);
  out.push_back(static_cast<char>(kCheckpointVersion));
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((manifest.size() >> (8 * i)) & 0xff));
  out += manifest;
  out += blob;
  return out;
}

WeightSet two_group_set() {
  WeightSet w = make_set({{1.0f, -0.0f, 3.5e-39f, 1e30f}, {-7.25f, 0.1f}});
  w.groups[0].shape = {2, 2};
  w.meta.step = 1234;
  w.meta.seed = 0xfeedfacecafebeefULL;
  w.meta.arch.vocab_size = 3;
  return w;
}

}  // namespace

TEST_CASE("checkpoint round trip is bit-identical", "[checkpoint]") {
  const WeightSet w = two_group_set();
  const auto bytes = serialize_checkpoint(w);
  CHECK(bytes.substr(0, 8) == "WARPCKPT");
  CHECK(static_cast<int>(bytes[8]) == 1);
  const WeightSet back = parse_checkpoint(bytes);
  CHECK(back.bit_equal(w));
  CHECK(std::bit_cast<std::uint32_t>(back.groups[0].data[1]) == 0x80000000u);

  const auto dir = std::filesystem::temp_directory_path() / "warp_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(w, dir / "w.ckpt");
  CHECK(load_checkpoint(dir / "w.ckpt").bit_equal(w));
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint layout is little-endian f32 at manifest offsets", "[checkpoint]") {
  const WeightSet w = make_set({{1.0f}, {-2.0f}});
  const auto bytes = serialize_checkpoint(w);
  std::uint64_t mlen = 0;
  for (int i = 0; i < 8; ++i) mlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[9 + i])) << (8 * i);
  const auto blob = std::string_view(bytes).substr(17 + mlen);
  REQUIRE(blob.size() == 8);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  CHECK(static_cast<unsigned char>(blob[3]) == 0x3f);
  CHECK(static_cast<unsigned char>(blob[2]) == 0x80);
  CHECK(static_cast<unsigned char>(blob[7]) == 0xc0);
  const auto manifest = nlohmann::json::parse(std::string_view(bytes).substr(17, mlen));
  CHECK(manifest["groups"][1]["offset"] == 4);
  CHECK(manifest["groups"][1]["length"] == 4);
  CHECK(manifest["groups"][1]["dtype"] == "f32le");
}

TEST_CASE("checkpoint errors are distinct", "[checkpoint]") {
  const auto bytes = serialize_checkpoint(two_group_set());

  SECTION("truncated blob") { CHECK(parse_error(bytes.substr(0, bytes.size() - 1)) == ErrorCode::kTruncatedBlob); }
  SECTION("bad magic") {
    auto b = bytes;
    b[0] = 'X';
    CHECK(parse_error(b) == ErrorCode::kBadMagic);
  }
  SECTION("malformed manifest") {
    CHECK(parse_error(with_manifest("{not json", "")) == ErrorCode::kMalformedManifest);
    CHECK(parse_error(with_manifest(R"({"meta":{}})", "")) == ErrorCode::kMalformedManifest);
  }
  SECTION("trailing bytes") { CHECK(parse_error(bytes + "x") == ErrorCode::kMalformedManifest); }

  const std::string meta =
      R"("meta":{"arch":{"vocab_size":3,"embed_dim":32,"num_blocks":2,"num_heads":2,"max_prompt_len":4,"max_completion_len":16,"mlp_hidden":64},"step":0,"seed":0})";
  const std::string blob(8, '\0');
  SECTION("shape product differs from byte length / 4") {
    const auto m = "{" + meta + R"(,"groups":[{"name":"a","shape":[3],"dtype":"f32le","offset":0,"length":8}]})";
    CHECK(parse_error(with_manifest(m, blob)) == ErrorCode::kShapeMismatch);
  }
  SECTION("unknown dtype") {
    const auto m = "{" + meta + R"(,"groups":[{"name":"a","shape":[2],"dtype":"bf16","offset":0,"length":8}]})";
    CHECK(parse_error(with_manifest(m, blob)) == ErrorCode::kUnknownDtype);
  }
  SECTION("overlapping offsets") {
    const auto m = "{" + meta +
                   R"(,"groups":[{"name":"a","shape":[1],"dtype":"f32le","offset":0,"length":4},)" +
                   R"({"name":"b","shape":[1],"dtype":"f32le","offset":0,"length":4}]})";
    CHECK(parse_error(with_manifest(m, blob)) == ErrorCode::kMalformedManifest);
  }
}

TEST_CASE("checkpoint round trip over fuzzed weight sets", "[checkpoint][property]") {
  Rng rng(2024);
  const float specials[] = {0.0f, -0.0f, std::numeric_limits<float>::denorm_min(),
                            std::numeric_limits<float>::max(), -std::numeric_limits<float>::min()};
  for (int trial = 0; trial < 100; ++trial) {
    WeightSet w;
    w.meta.step = rng.next_u64();
    w.meta.seed = rng.next_u64();
    w.meta.arch.vocab_size = 1 + static_cast<int>(rng.below(64));
    const int ngroups = 1 + static_cast<int>(rng.below(6));
    for (int g = 0; g < ngroups; ++g) {
      TensorGroup tg;
      tg.name = "t" + std::to_string(g);
      const int rank = 1 + static_cast<int>(rng.below(3));
      for (int r = 0; r < rank; ++r) tg.shape.push_back(1 + static_cast<std::int64_t>(rng.below(9)));
      tg.data.resize(static_cast<std::size_t>(shape_numel(tg.shape)));
      for (auto& v : tg.data)
        v = rng.below(10) == 0 ? specials[rng.below(5)] : static_cast<float>(rng.normal() * 10.0);
      w.groups.push_back(std::move(tg));
    }
    INFO("trial " << trial);
    REQUIRE(parse_checkpoint(serialize_checkpoint(w)).bit_equal(w));
  }
}
