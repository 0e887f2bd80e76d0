#include "reform/config.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cstdio>

using namespace reform;

namespace {

const char* kSample = R"cfg(
# run settings
[dataset]
reviews = "data/reviews.jsonl"   # trailing comment
format = "jsonl"
k_core = 5
split = [3, 1, 1]

[train]
learning_rate = 2e-3
batch_size = 128
pool = "avg"
total_dim = 256

[run]
out_dir = "runs/a"
seed = 9
deterministic = true
threads = 8

[eval]
ks = [10, 20]
seeds = [1, 2, 3]
)cfg";

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parser handles sections, comments, quotes, and arrays") {
  ConfigDoc doc = ConfigDoc::parse(kSample);
  CHECK(doc.get_string("dataset.reviews", "") == "data/reviews.jsonl");
  CHECK(doc.get_string("dataset.format", "") == "jsonl");
  CHECK(doc.get_int("dataset.k_core", -1) == 5);
  CHECK(doc.get_double("train.learning_rate", 0) == 2e-3);
  CHECK(doc.get_bool("run.deterministic", false));
  CHECK(doc.get_ints("dataset.split", {}) == std::vector<int64_t>{3, 1, 1});
  CHECK(doc.get_ints("eval.ks", {}) == std::vector<int64_t>{10, 20});
  CHECK(!doc.has("nope.key"));
  CHECK(doc.get_int("nope.key", 77) == 77);  // fallback

  // octothorpe inside quotes survives
  ConfigDoc hashy = ConfigDoc::parse("[a]\nx = \"val # not a comment\"\n");
  CHECK(hashy.get_string("a.x", "") == "val # not a comment");
}

TEST_CASE("parser reports the offending line") {
  try {
    ConfigDoc::parse("[a]\ngood = 1\nbad line without equals\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  // keys before any [section] are addressed bare
  ConfigDoc bare = ConfigDoc::parse("top = 1\n[a]\nx = 2\n");
  CHECK(bare.get_int("top", 0) == 1);
  CHECK(bare.get_int("a.x", 0) == 2);
  CHECK_THROWS_AS(ConfigDoc::parse("[unclosed\nx = 1\n"), FormatError);
}

TEST_CASE("type mismatches are loud, not coerced") {
  ConfigDoc doc = ConfigDoc::parse("[a]\nword = \"hello\"\nnum = 3\n");
  CHECK_THROWS_AS(doc.get_int("a.word", 0), FormatError);
  CHECK_THROWS_AS(doc.get_double("a.word", 0), FormatError);
  CHECK_THROWS_AS(doc.get_bool("a.word", false), FormatError);
  CHECK(doc.get_string("a.num", "") == "3");  // numbers read fine as strings
}

TEST_CASE("set applies CLI-style overrides with literal syntax") {
  ConfigDoc doc = ConfigDoc::parse(kSample);
  doc.set("run.seed", "123");
  doc.set("dataset.split", "[8, 1, 1]");
  doc.set("run.out_dir", "\"other/dir\"");
  doc.set("run.fresh_key", "1.5");
  CHECK(doc.get_int("run.seed", 0) == 123);
  CHECK(doc.get_ints("dataset.split", {}) == std::vector<int64_t>{8, 1, 1});
  CHECK(doc.get_string("run.out_dir", "") == "other/dir");
  CHECK(doc.get_double("run.fresh_key", 0) == 1.5);
}

TEST_CASE("canonical text is sorted and the hash is stable under reordering") {
  ConfigDoc a = ConfigDoc::parse("[b]\ny = 2\n[a]\nx = 1\n");
  ConfigDoc b = ConfigDoc::parse("[a]\nx = 1\n[b]\ny = 2\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);  // zero-padded hex64

  const std::string canon = a.canonical();
  CHECK(canon.find("a.x") < canon.find("b.y"));

  ConfigDoc c = ConfigDoc::parse("[a]\nx = 3\n[b]\ny = 2\n");
  CHECK(a.hash() != c.hash());
}

TEST_CASE("from_doc maps sections onto the run config") {
  RunConfig rc = RunConfig::from_doc(ConfigDoc::parse(kSample));
  CHECK(rc.reviews_path == "data/reviews.jsonl");
  CHECK(rc.k_core == 5);
  CHECK(rc.ratios.train == 3);
  CHECK(rc.ratios.val == 1);
  CHECK(rc.train.learning_rate == 2e-3);
  CHECK(rc.train.batch_size == 128);
  CHECK(rc.train.pool == PoolMode::Avg);
  CHECK(rc.Ks == std::vector<int>{10, 20});
  CHECK(rc.seeds == std::vector<uint64_t>{1, 2, 3});
  CHECK(rc.out_dir == "runs/a");
  CHECK(rc.seed == 9);
  CHECK(!rc.config_hash.empty());

  // total_dim splits the budget across the two branches
  CHECK(rc.total_dim == 256);
  CHECK(rc.train.d_g == 128);
  CHECK(rc.train.d_star == 128);

  // deterministic forces a single thread despite threads = 8
  CHECK(rc.deterministic);
  CHECK(rc.threads == 1);
  CHECK(rc.train.threads == 1);
  CHECK(rc.train.seed == 9);
}

TEST_CASE("defaults hold for an empty document") {
  RunConfig rc = RunConfig::from_doc(ConfigDoc::parse(""));
  CHECK(rc.k_core == 10);
  CHECK(rc.train.d_g == 256);
  CHECK(rc.train.d_star == 256);
  CHECK(rc.train.pool == PoolMode::Max);
  CHECK(rc.Ks == std::vector<int>{10, 20});
  CHECK(rc.seeds.size() == 5);
  CHECK(rc.ablate_variants ==
        std::vector<std::string>{"full", "avg_pool", "no_mfa_mlp"});
  CHECK(rc.noise_ratios == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(rc.sweep_n == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(rc.total_dim == 0);
  CHECK(!rc.deterministic);
  CHECK(rc.load_factors().size() == 7);  // built-in restaurant factors
}

TEST_CASE("explicit branch dims beat the total budget") {
  ConfigDoc doc = ConfigDoc::parse("[train]\ntotal_dim = 256\nd_g = 64\n");
  RunConfig rc = RunConfig::from_doc(doc);
  CHECK(rc.train.d_g == 64);     // explicit wins
  CHECK(rc.train.d_star == 128);  // still from the budget
}

TEST_CASE("bad enum values and malformed budgets are rejected") {
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[dataset]\nformat = \"xml\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[train]\npool = \"median\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[llm]\nkind = \"gpt\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[encoder]\nkind = \"bert\"\n")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[train]\ntotal_dim = 255\n")),
                  ConfigError);  // odd budget cannot split
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[train]\ntotal_dim = -2\n")),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::from_doc(ConfigDoc::parse("[dataset]\nsplit = [1, 1]\n")),
                  ConfigError);  // needs three entries
}

TEST_CASE("http defaults differ from mock defaults where it matters") {
  RunConfig mock_rc = RunConfig::from_doc(ConfigDoc::parse("[encoder]\nkind = \"hash_mock\"\n"));
  CHECK(mock_rc.encoder.dim == 32);
  RunConfig http_rc =
      RunConfig::from_doc(ConfigDoc::parse("[encoder]\nkind = \"http_embeddings\"\n"));
  CHECK(http_rc.encoder.dim == 768);
  RunConfig http_small = RunConfig::from_doc(
      ConfigDoc::parse("[encoder]\nkind = \"http_embeddings\"\ndim = 64\n"));
  CHECK(http_small.encoder.dim == 64);
}

TEST_CASE("factor files load and validate") {
  const std::string path = "/tmp/reform_test_factors.json";
  nlohmann::json j;
  j["factors"] = nlohmann::json::array();
  j["factors"].push_back({{"name", "sound"}, {"description", "Noise level and music."}});
  j["factors"].push_back({{"name", "light"}, {"description", "How bright it is."}});
  write_text_file(path, j.dump());

  ConfigDoc doc = ConfigDoc::parse("[factors]\nfile = \"" + path + "\"\n");
  RunConfig rc = RunConfig::from_doc(doc);
  FactorSet f = rc.load_factors();
  REQUIRE(f.size() == 2);
  CHECK(f.names[0] == "sound");
  CHECK(f.descriptions[1] == "How bright it is.");

  write_text_file(path, "[]");  // missing the factors key entirely
  CHECK_THROWS_AS(rc.load_factors(), FormatError);
  write_text_file(path, R"({"factors": []})");
  CHECK_THROWS_AS(rc.load_factors(), ConfigError);
  write_text_file(
      path, R"({"factors": [{"name":"dup","description":"x"},{"name":"dup","description":"y"}]})");
  CHECK_THROWS_AS(rc.load_factors(), ConfigError);
  std::remove(path.c_str());
}

TEST_CASE("parse_file errors name the missing path") {
  try {
    ConfigDoc::parse_file("/tmp/reform_no_such_config.toml");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("/tmp/reform_no_such_config.toml") != std::string::npos);
  }
}

}  // TEST_SUITE
