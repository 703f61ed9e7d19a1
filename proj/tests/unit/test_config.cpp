#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "ulm/config.hpp"

using namespace ulm;

TEST_SUITE("config") {

TEST_CASE("JSON round trip preserves every field") {
    for (const char* profile : {"desk", "paper"}) {
        RunConfig c = RunConfig::for_profile(profile);
        c.seed = 77;
        c.data.test_densities = {2, 4};
        c.training.phase1.schedule.milestones = {3, 9};
        const std::string text = to_json_text(c);
        const RunConfig back = parse_run_config(text, "paper");
        CHECK(to_json_text(back) == text);
        CHECK(back.seed == 77);
        CHECK(back.profile == profile);
    }
}

TEST_CASE("partial files overlay the named profile") {
    const RunConfig c = parse_run_config(R"({"profile": "desk", "training": {"phase1": {"epochs": 7}}})");
    RunConfig expect = RunConfig::desk();
    expect.training.phase1.epochs = 7;
    CHECK(to_json_text(c) == to_json_text(expect));
    CHECK(to_json_text(parse_run_config("{}", "paper")) == to_json_text(RunConfig::paper()));
}

TEST_CASE("block geometry drives the model input shape") {
    const RunConfig c = parse_run_config(R"({"blocks": {"nt": 64}})", "desk");
    CHECK(c.model.nt == 64);
    CHECK(c.model.nz == c.simulation.nz);
    CHECK(c.model.r == c.simulation.r);
}

TEST_CASE("invalid configurations are rejected") {
    CHECK_THROWS_AS(parse_run_config(R"({"colour": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"model": {"widths": [1]}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"version": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"profile": "huge"})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[1, 2]"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"threads": 0})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"seed": "one"})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"blocks": {"r": 3}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"blocks": {"nt": 100}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"evaluation": {"checkpoints": [100000]}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"inference": {"crop_margin": 64}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"training": "fast"})"), ConfigError);
}

TEST_CASE("configuration files") {
    const auto dir = test::scratch("config");
    std::ofstream(dir / "run.json") << R"({"profile": "paper", "seed": 5})";
    const RunConfig c = load_run_config(dir / "run.json");
    CHECK(c.profile == "paper");
    CHECK(c.seed == 5);
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
}

}  // TEST_SUITE
