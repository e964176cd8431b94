#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "bfkit/bundle.hpp"
#include "bfkit/config.hpp"
#include "corpus_fixture.hpp"

using namespace bfkit;
using config::json;

TEST_CASE("dotted-path lookup walks nested objects", "[config]") {
  const json j = {{"a", {{"b", {{"c", 7}}}}}, {"top", 1}};
  CHECK(config::get_or<int>(j, "a.b.c", -1) == 7);
  CHECK(config::get_or<int>(j, "top", -1) == 1);
  CHECK(config::get_or<int>(j, "a.b.missing", -1) == -1);
  CHECK(config::get_or<int>(j, "a.missing.c", -1) == -1);
  CHECK(config::get_required<int>(j, "a.b.c") == 7);
  CHECK_THROWS_WITH(config::get_required<int>(j, "a.b.nope"),
                    Catch::Matchers::ContainsSubstring("a.b.nope"));
  CHECK_THROWS_AS(config::get_required<std::string>(j, "a.b.c"), ConfigError);
}

TEST_CASE("empty config resolves to reference defaults", "[config]") {
  const auto c = config::config_from_json(json::object());
  CHECK(c.window == 10000);
  CHECK(c.stride == 5000);
  CHECK(c.ratios == std::array<double, 3>{0.6, 0.2, 0.2});
  CHECK(c.per_class == 300);
  CHECK(c.sample_rate_hz == 64000.0);
  CHECK(c.trainer.learning_rate == 1e-4);
  CHECK(c.trainer.batch_size == 32);
  CHECK(c.trainer.patience == 10);
  CHECK(c.trainer.max_epochs == 100);
  CHECK(c.physics.lambda == 1.0);
  CHECK(c.physics.threshold_percentile == 10.0);
  CHECK(c.physics.gating == model::PenaltyGating::SoftProbability);
  CHECK(c.band.low_cut_hz == 1000.0);
  CHECK(c.band.high_cut_hz == 10000.0);
  CHECK(c.band.order == 4);
  CHECK(c.geom.rolling_element_count == 8);
  CHECK(c.geom.element_diameter_mm == 6.75);
  CHECK(c.geom.pitch_diameter_mm == 28.55);
  CHECK(c.condition.shaft_speed_rpm == 1500.0);
  CHECK(c.condition.label == "N15_M07_F10");
  CHECK(c.alpha == 0.05);
  CHECK(c.n_runs == 10);
  CHECK(c.grid_lambdas == std::vector<double>{0.05, 0.20, 1.00});
  CHECK(c.grid_percentiles == std::vector<double>{5.0, 10.0, 15.0});
  CHECK(c.grid_train_fracs == std::vector<double>{0.8, 0.7, 0.6});
  CHECK(c.folds == 5);
  CHECK(c.master_seed == 0);
  CHECK_FALSE(c.has_arch_override);
}

TEST_CASE("config round-trips through json", "[config]") {
  auto c = config::config_from_json(json::object());
  c.data_path = "corpus.bseg";
  c.window = 2048;
  c.ratios = {0.7, 0.1, 0.2};
  c.physics.lambda = 0.2;
  c.physics.gating = model::PenaltyGating::HardArgmax;
  c.trainer.max_epochs = 7;
  c.tl_strategy = "las";
  c.master_seed = 99;
  c.arch_override = fixture::tiny_train_arch();
  c.has_arch_override = true;

  const auto c2 = config::config_from_json(config::to_json(c));
  CHECK(c2.data_path == "corpus.bseg");
  CHECK(c2.window == 2048);
  CHECK(c2.ratios == std::array<double, 3>{0.7, 0.1, 0.2});
  CHECK(c2.physics.lambda == 0.2);
  CHECK(c2.physics.gating == model::PenaltyGating::HardArgmax);
  CHECK(c2.trainer.max_epochs == 7);
  CHECK(c2.tl_strategy == "las");
  CHECK(c2.master_seed == 99);
  REQUIRE(c2.has_arch_override);
  CHECK(model::canonical_arch_string(c2.arch_override) ==
        model::canonical_arch_string(c.arch_override));
  CHECK(model::canonical_arch_string(c2.resolve_arch()) ==
        model::canonical_arch_string(fixture::tiny_train_arch()));

  // without an override the desk architecture at the configured window applies
  const auto plain = config::config_from_json(json::object());
  CHECK(model::canonical_arch_string(plain.resolve_arch()) ==
        model::canonical_arch_string(model::default_desk_arch(10000)));
}

TEST_CASE("invalid geometry is reported with its config path", "[config][errors]") {
  json j;
  j["model"]["geometry"] = {{"element_diameter_mm", 6.75}, {"pitch_diameter_mm", 28.55}};
  CHECK_THROWS_WITH(config::config_from_json(j),
                    Catch::Matchers::ContainsSubstring("model.geometry"));

  json bad_ratio;
  bad_ratio["data"]["ratios"] = {0.5, 0.5};
  CHECK_THROWS_AS(config::config_from_json(bad_ratio), ConfigError);

  json bad_layer;
  bad_layer["model"]["arch"] = {{"window", 64},
                                {"signal_branch", json::array({{{"kind", "blur"}}})},
                                {"physics_branch", json::array()},
                                {"head", json::array()}};
  CHECK_THROWS_AS(config::config_from_json(bad_layer), ConfigError);
}

TEST_CASE("config file loading distinguishes io and parse failures", "[config][errors]") {
  CHECK_THROWS_AS(config::load_config_file("does_not_exist.json"), ConfigError);

  const std::string path = "test_bad_config.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(config::load_config_file(path), ParseError);
  {
    std::ofstream out(path);
    out << R"({"data": {"window": 123}})";
  }
  CHECK(config::load_config_file(path).window == 123);
  std::remove(path.c_str());
}

TEST_CASE("output root honors the environment variable", "[config]") {
  unsetenv("BFKIT_OUT");
  CHECK(config::default_out_root() == "runs");
  setenv("BFKIT_OUT", "/tmp/bfkit_runs", 1);
  CHECK(config::default_out_root() == "/tmp/bfkit_runs");
  unsetenv("BFKIT_OUT");
}

TEST_CASE("model bundles survive a save/load round-trip", "[config][bundle]") {
  train::Normalization nz;
  nz.stats.vibration = {0.1, 2.5};
  nz.stats.current_a = {-0.2, 1.5};
  nz.stats.current_b = {0.05, 0.75};
  nz.norm.max_bpfo = 3.25;
  nz.norm.max_bpfi = 1.125;
  nz.t_bpfo = 0.625;
  nz.t_bpfi = 0.25;
  model::PhysicsLossConfig physics;
  physics.lambda = 0.2;
  physics.t_bpfo = nz.t_bpfo;
  physics.t_bpfi = nz.t_bpfi;
  physics.gating = model::PenaltyGating::HardArgmax;

  bundle::ModelBundle b(fixture::tiny_train_arch(), fixture::kGeom, fixture::kBand, nz,
                        physics, 1234);
  // make optimizer state and flags non-trivial
  auto& entry = b.net.params().at("head.0.dense.w");
  entry.trainable = false;
  std::fill(entry.m.data.begin(), entry.m.data.end(), 0.125);
  b.net.params().set_step(17);

  const std::string path = "test_bundle.ckpt";
  bundle::save_bundle(path, b);
  auto loaded = bundle::load_bundle(path);

  CHECK(model::canonical_arch_string(loaded.arch) ==
        model::canonical_arch_string(b.arch));
  CHECK(loaded.geom.rolling_element_count == 8);
  CHECK(loaded.geom.element_diameter_mm == 6.75);
  CHECK(loaded.band.low_cut_hz == fixture::kBand.low_cut_hz);
  CHECK(loaded.band.order == fixture::kBand.order);
  CHECK(loaded.nz.stats.vibration.mean == 0.1);
  CHECK(loaded.nz.stats.vibration.stddev == 2.5);
  CHECK(loaded.nz.stats.current_b.stddev == 0.75);
  CHECK(loaded.nz.norm.max_bpfo == 3.25);
  CHECK(loaded.nz.t_bpfo == 0.625);
  CHECK(loaded.physics.lambda == 0.2);
  CHECK(loaded.physics.gating == model::PenaltyGating::HardArgmax);
  CHECK(loaded.net.params().step() == 17);
  CHECK_FALSE(loaded.net.params().at("head.0.dense.w").trainable);
  CHECK(loaded.net.params().at("head.0.dense.w").m.data ==
        b.net.params().at("head.0.dense.w").m.data);
  for (const auto& [name, p] : b.net.params())
    CHECK(loaded.net.params().at(name).value.data == p.value.data);

  std::remove(path.c_str());
}

TEST_CASE("bundle loading rejects inconsistent or incomplete meta", "[config][bundle][errors]") {
  model::MultimodalNet net(fixture::tiny_train_arch(), 2);
  const std::string path = "test_bundle_bad.ckpt";

  // meta whose architecture hash disagrees with the stored hash
  train::Normalization nz;
  model::PhysicsLossConfig physics;
  bundle::ModelBundle b(fixture::tiny_train_arch(), fixture::kGeom, fixture::kBand, nz,
                        physics, 2);
  nn::save_checkpoint(path, b.net.params(), 0xDEADBEEFULL, bundle::bundle_meta_json(b));
  CHECK_THROWS_AS(bundle::load_bundle(path), StateError);

  // meta missing required sections
  nn::save_checkpoint(path, b.net.params(), model::arch_hash(b.arch),
                              R"({"schema": 1})");
  CHECK_THROWS_AS(bundle::load_bundle(path), ParseError);

  // unsupported schema tag
  nn::save_checkpoint(path, b.net.params(), model::arch_hash(b.arch),
                              R"({"schema": 99})");
  CHECK_THROWS_AS(bundle::load_bundle(path), ParseError);

  // meta that is not json at all
  nn::save_checkpoint(path, b.net.params(), model::arch_hash(b.arch), "not json");
  CHECK_THROWS_AS(bundle::load_bundle(path), ParseError);

  std::remove(path.c_str());
}
