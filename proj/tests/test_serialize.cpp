#include <cmath>
#include <string>

#include "doctest.h"
#include "halluc/serialize.hpp"

using namespace halluc;

TEST_SUITE("serialize") {
  TEST_CASE("FNV-1a test vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    CHECK(hex64(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
    CHECK(hex64(1) == "0000000000000001");
  }

  TEST_CASE("prompt names") {
    CHECK(prompt_name(0) == "c0");
    CHECK(prompt_name(4711) == "c4711");
    CHECK(parse_prompt_name("c4711") == 4711);
    CHECK_THROWS_AS(parse_prompt_name("c"), InvalidInput);
    CHECK_THROWS_AS(parse_prompt_name("c01"), InvalidInput);
    CHECK_THROWS_AS(parse_prompt_name("d1"), InvalidInput);
    CHECK_THROWS_AS(parse_prompt_name("c1x"), InvalidInput);
  }

  TEST_CASE("world round trip") {
    ArbitraryFactsSpec s;
    s.n_prompts = 50;
    s.response_set_size = 30;
    s.alpha = 0.3;
    s.seed = 12;
    const World w = build_arbitrary_facts(s);
    const nlohmann::json j = to_json(w);
    CHECK(j["schema"] == "halluc.world");
    CHECK(j["schema_version"] == 1);
    CHECK(j["prompts"][3]["id"] == "c3");
    CHECK(world_from_json(j) == w);
    CHECK(world_from_json(nlohmann::json::parse(j.dump())) == w);
  }

  TEST_CASE("training round trip") {
    ArbitraryFactsSpec s;
    s.n_prompts = 20;
    s.response_set_size = 5;
    s.alpha = 0.5;
    const World w = build_arbitrary_facts(s);
    const TrainingSet t = sample_training(w, 300, 3);
    const nlohmann::json j = to_json(t);
    CHECK(j["schema"] == "halluc.training");
    CHECK(training_from_json(nlohmann::json::parse(j.dump())) == t);
  }

  TEST_CASE("schema checks") {
    ArbitraryFactsSpec s;
    s.n_prompts = 2;
    s.response_set_size = 4;
    nlohmann::json j = to_json(build_arbitrary_facts(s));
    nlohmann::json wrong_version = j;
    wrong_version["schema_version"] = 2;
    CHECK_THROWS_AS(world_from_json(wrong_version), InvalidInput);
    nlohmann::json wrong_schema = j;
    wrong_schema["schema"] = "halluc.training";
    CHECK_THROWS_AS(world_from_json(wrong_schema), InvalidInput);
    nlohmann::json bad_mu = j;
    bad_mu["prompts"][0]["mu"] = 0.9;
    CHECK_THROWS_AS(world_from_json(bad_mu), InvalidInput);
    nlohmann::json out_of_order = j;
    out_of_order["prompts"][0]["id"] = "c1";
    CHECK_THROWS_AS(world_from_json(out_of_order), InvalidInput);
    CHECK_THROWS_AS(training_from_json(nlohmann::json::array()), InvalidInput);
  }

  TEST_CASE("double formatting round-trips") {
    for (double x : {0.0, 1.0, 0.1, 1.0 / 3.0, 364.0 / 365.0, -2.5e-300, 1e300}) {
      CHECK(std::stod(format_double(x)) == x);
    }
    CHECK(format_double(NAN) == "nan");
    CHECK(format_double(INFINITY) == "inf");
    CHECK(format_double(-INFINITY) == "-inf");
    CHECK(format_double(0.5) == "0.5");
  }

  TEST_CASE("CSV quoting") {
    CsvTable t({"a", "b"});
    t.row({"1", "x,y"});
    t.row({"say \"hi\"", "line\nbreak"});
    CHECK(t.rows() == 2);
    CHECK(t.str() == "a,b\n1,\"x,y\"\n\"say \"\"hi\"\"\",\"line\nbreak\"\n");
    CHECK_THROWS(t.row({"only one"}));
  }
}
