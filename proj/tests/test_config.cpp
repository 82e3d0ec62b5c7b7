#include <catch2/catch_amalgamated.hpp>

#include <string>

#include "warp/config.hpp"

using namespace warp;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.detail();
  }
  return "";
}

}  // namespace

TEST_CASE("empty config resolves to defaults", "[config]") {
  const auto c = parse_config("{}");
  CHECK(c.train.beta == 0.1);
  CHECK(c.train.mu == 0.01);
  CHECK(c.warp.eta == 0.3);
  CHECK(c.reward_spec().vocab_size == c.arch.vocab_size);
}

TEST_CASE("resolved config round-trips", "[config]") {
  const auto c = parse_config(R"({"seed": 5, "train": {"anchor_mode": "fixed_sft", "mu": 0.1},
                                  "warp": {"liti_target": "sft", "steps": [10, 20]},
                                  "reward": {"length_penalty_coeff": -0.0005}})");
  CHECK(c.train.anchor_mode == AnchorMode::kFixedSft);
  CHECK(c.warp.liti_target == LitiTarget::kSft);
  const auto j = to_json(c);
  CHECK(to_json(config_from_json(nlohmann::json::parse(j.dump()))) == j);
}

TEST_CASE("unknown keys are rejected with their path", "[config]") {
  CHECK(error_of(R"({"sed": 1})").find("'sed'") != std::string::npos);
  CHECK(error_of(R"({"train": {"betta": 0.1}})").find("'train.betta'") != std::string::npos);
  CHECK(error_of(R"({"arch": {"vocab": 3}})").find("'arch.vocab'") != std::string::npos);
}

TEST_CASE("bad values are config errors", "[config]") {
  CHECK(error_of(R"({"train": {"beta": "x"}})").find("'train.beta'") != std::string::npos);
  CHECK(error_of(R"({"train": {"anchor_mode": "sft"}})").find("anchor_mode") != std::string::npos);
  CHECK(error_of(R"({"train": {"mu": 2}})").find("mu") != std::string::npos);
  CHECK(error_of(R"({"train": 3})").find("'train'") != std::string::npos);
  CHECK(error_of("{").find("invalid JSON") != std::string::npos);
}

TEST_CASE("derived seeds depend on the master seed", "[config]") {
  auto c = parse_config("{}");
  const auto t0 = c.train_config();
  c.seed = 1;
  const auto t1 = c.train_config();
  CHECK(t0.seed != t1.seed);
  CHECK(t0.prompt_order_seed != t1.prompt_order_seed);
  CHECK(c.warp_config().train.seed == t1.seed);
}

TEST_CASE("shipped configs load", "[config]") {
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(WARP_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    INFO(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
    ++n;
  }
  CHECK(n >= 2);
  CHECK(to_json(load_config(std::filesystem::path(WARP_CONFIG_DIR) / "default.json")) == to_json(ExperimentConfig{}));
}
