#include <catch2/catch_amalgamated.hpp>

#include "steinlab/config.hpp"

using namespace steinlab;

TEST_CASE("config parses sections, lists, comments") {
  const std::string text = R"(
# experiment file
seed = 7
threads = auto
output_dir = results

[breuer_major]
T_grid = 8 16 32   # horizons
kernel = triangle
delta = 0.03125

[spde]
N_trunc = 2
doubling_check = false
)";
  const ExperimentConfig cfg = parse_config_text(text);
  REQUIRE(cfg.seed == 7);
  REQUIRE(cfg.seed_set);
  REQUIRE(cfg.threads == 0);
  REQUIRE(cfg.output_dir == "results");
  REQUIRE(cfg.breuer_major.T_grid == std::vector<double>{8, 16, 32});
  REQUIRE(cfg.breuer_major.kernel == "triangle");
  REQUIRE(cfg.breuer_major.delta == Catch::Approx(0.03125));
  REQUIRE(cfg.spde.N_trunc == 2);
  REQUIRE_FALSE(cfg.spde.doubling_check);
  REQUIRE_NOTHROW(validate_config(cfg));
}

TEST_CASE("unknown keys and sections are rejected") {
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\nbogus = 2\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\n[nonsense]\nx = 2\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\n[breuer_major]\nT_grid = 8\nunknown_key = 3\n"),
                    ConfigError);
}

TEST_CASE("type and syntax errors are rejected") {
  REQUIRE_THROWS_AS(parse_config_text("seed = twelve\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed 12\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("[spde\nseed = 1\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\n[spde]\ndoubling_check = maybe\n"), ConfigError);
  REQUIRE_THROWS_AS(parse_config_text("seed = 1\n[breuer_major]\nT_grid = a b\n"), ConfigError);
}

TEST_CASE("missing seed fails validation") {
  const ExperimentConfig cfg = parse_config_text("threads = 2\n");
  REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("numeric preconditions are validated up front") {
  {
    ExperimentConfig cfg = parse_config_text("seed = 1\n[bounds]\nn_mc = 1\n");
    REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
  }
  {
    ExperimentConfig cfg = parse_config_text("seed = 1\n[breuer_major]\ndelta = 0.25\n");
    REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
  }
  {
    ExperimentConfig cfg = parse_config_text("seed = 1\n[spde]\nR_grid = 2 -4\n");
    REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
  }
  {
    ExperimentConfig cfg = parse_config_text("seed = 1\n[neural_net]\nn_grid = 4 2.5\n");
    REQUIRE_THROWS_AS(validate_config(cfg), ConfigError);
  }
}

TEST_CASE("canonical serialization is stable") {
  const ExperimentConfig a = parse_config_text("seed = 3\n");
  const ExperimentConfig b = parse_config_text("seed = 3\n");
  REQUIRE(a.canonical() == b.canonical());
  const ExperimentConfig c = parse_config_text("seed = 4\n");
  REQUIRE(a.canonical() != c.canonical());
}
