#include <filesystem>
#include <fstream>

#include "diffcluster/common.hpp"
#include "diffcluster/config.hpp"
#include "diffcluster/pipeline.hpp"
#include "doctest.h"

using namespace dc;

TEST_CASE("parse flat key = value text") {
  const auto c = Config::parse(R"(
# comment
k = 40
  train.lr=0.05
transform.kind = exp
name = a = b
)");
  CHECK(c.get_int("k", 0) == 40);
  CHECK(c.get_double("train.lr", 0) == 0.05);
  CHECK(c.get_string("transform.kind", "") == "exp");
  CHECK(c.get_string("name", "") == "a = b");
  CHECK(c.get_string("missing", "fb") == "fb");
  CHECK(c.to_text() == "k = 40\nname = a = b\ntrain.lr = 0.05\ntransform.kind = exp\n");
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(Config::parse("k 40"), Error);
  CHECK_THROWS_AS(Config::parse("= 3"), Error);
  CHECK_THROWS_AS(Config::parse("k = 1\nk = 2"), Error);
  try {
    Config::parse("a = 1\nbroken", "x.cfg");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
    CHECK(e.kind() == ErrorKind::Config);
  }
}

TEST_CASE("typed getters") {
  const auto c = Config::parse("i = -3\nu = 18446744073709551615\nd = 1e-4\nb1 = yes\nb0 = 0\nbad = 12x\nbb = maybe");
  CHECK(c.get_int("i", 0) == -3);
  CHECK(c.get_u64("u", 0) == 18446744073709551615ull);
  CHECK(c.get_double("d", 0) == 1e-4);
  CHECK(c.get_bool("b1", false));
  CHECK_FALSE(c.get_bool("b0", true));
  CHECK_THROWS_AS(c.get_int("bad", 0), Error);
  CHECK_THROWS_AS(c.get_double("bad", 0), Error);
  CHECK_THROWS_AS(c.get_u64("i", 0), Error);
  CHECK_THROWS_AS(c.get_bool("bb", false), Error);
}

TEST_CASE("unused keys are rejected") {
  auto c = Config::parse("k = 3\ntypo.key = 1");
  c.get_int("k", 0);
  CHECK_THROWS_AS(c.reject_unused(), Error);
  c.get_int("typo.key", 0);
  CHECK_NOTHROW(c.reject_unused());
}

TEST_CASE("load from file") {
  const auto path = (std::filesystem::temp_directory_path() / "dc_test.cfg").string();
  {
    std::ofstream f(path);
    f << "eta = 0.88\n";
  }
  CHECK(Config::load(path).get_double("eta", 0) == 0.88);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(Config::load(path), Error);
}

TEST_CASE("pipeline config from text") {
  const auto c = Config::parse(
      "k = 40\neta = 0.88\ntransform.kind = exp\nmodel.variant = moe-sdt\ntrain.epochs = 3\ncluster.mode = components\n"
      "topk.mode = full\npair.filter = true\nseed = 12\n");
  const auto cfg = pipeline_config_from(c);
  CHECK_NOTHROW(c.reject_unused());
  CHECK(cfg.k == 40);
  CHECK(cfg.eta.eta == 0.88);
  CHECK(cfg.transform.kind == TransformKind::Exp);
  CHECK(cfg.encoder.variant == attn::Variant::MoeSdt);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.cluster_mode == ClusterMode::Components);
  CHECK(cfg.topk_mode == TopKMode::Full);
  CHECK(cfg.pair_filter);
  CHECK(cfg.seed == 12);
  CHECK_NOTHROW(cfg.validate());

  SUBCASE("defaults") {
    const PipelineConfig d;
    CHECK(d.k == 80);
    CHECK(d.eta.eta == 0.90);
    CHECK(d.transform.delta == 7.5);
    CHECK(d.transform.epsilon == -5.0);
    CHECK(d.transform.tau == 0.25);
    CHECK(d.train.momentum == 0.9);
    CHECK(d.train.weight_decay == 1e-4);
  }
  SUBCASE("canonical text round trips") {
    const auto text = pipeline_config_text(cfg);
    const auto again = pipeline_config_from(Config::parse(text));
    CHECK(pipeline_config_text(again) == text);
  }
  SUBCASE("bad values") {
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("k = 0")), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("k = -4")), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("topk.mode = sometimes")), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("model.variant = linear")), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("eta = 1.5")).validate(), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("noise.ratio = 2")).validate(), Error);
    CHECK_THROWS_AS(pipeline_config_from(Config::parse("model.heads = 3")).validate(), Error);
  }
}

TEST_CASE("bundled presets") {
  const std::string dir = std::string(DIFFCLUSTER_SOURCE_DIR) + "/configs/";
  auto ms1m = Config::load(dir + "ms1m.cfg");
  const auto a = pipeline_config_from(ms1m);
  CHECK_NOTHROW(ms1m.reject_unused());
  CHECK(a.k == 80);
  CHECK(a.eta.eta == 0.90);
  auto msmt = Config::load(dir + "msmt17.cfg");
  const auto b = pipeline_config_from(msmt);
  CHECK_NOTHROW(msmt.reject_unused());
  CHECK(b.k == 40);
  CHECK(b.eta.eta == 0.88);
  CHECK(b.encoder.variant == attn::Variant::MoeSdt);
}
