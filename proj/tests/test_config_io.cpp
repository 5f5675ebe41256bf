#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "klctl/config.hpp"
#include "klctl/error.hpp"
#include "klctl/io.hpp"

using namespace klctl;
namespace fs = std::filesystem;

TEST_CASE("loop config round trips losslessly") {
    LoopConfig cfg;
    cfg.plant = plant_preset("mnist");
    cfg.plant.noise_std = 0.03;
    cfg.schedule.c_final = 1.0 / 3.0 + 10.0;
    cfg.gains = {0.1 / 3.0, 0.005};
    cfg.variant = Variant::step_only_anneal;
    cfg.seed = 18446744073709551615ULL;
    const Json j = to_json(cfg);
    const LoopConfig back = loop_config_from_json(parse_json(j.dump()));
    CHECK(to_json(back).dump() == j.dump());
    CHECK(back.schedule.c_final == cfg.schedule.c_final);
    CHECK(back.gains.kp == cfg.gains.kp);
    CHECK(back.plant.a == cfg.plant.a);
    CHECK(back.seed == cfg.seed);
    CHECK(config_digest(back) == config_digest(cfg));
    LoopConfig other = cfg;
    other.seed = 1;
    CHECK(config_digest(other) != config_digest(cfg));
}

TEST_CASE("plant preset form expands to explicit fields") {
    const auto p = plant_from_json(parse_json(R"({"preset":"dsprites","noise_std":0.02})"));
    CHECK(p.a == doctest::Approx(1.0 / 2500.0));
    CHECK(p.noise_std == 0.02);
    const Json j = to_json(p);
    CHECK(j.contains("amplitude"));
    CHECK_FALSE(j.contains("preset"));
    CHECK(plant_from_json(j).g.rate == p.g.rate);
}

TEST_CASE("strict schema rejects unknown and mistyped keys") {
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"stepz": 10})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"schedule": {"c0": 0.5, "cfinal": 3}})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"steps": "100"})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"steps": 1.5})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"plant": {"preset": "mnist", "a": 1}})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"({"seed": -1})")), ConfigError);
    CHECK_THROWS_AS((void)loop_config_from_json(parse_json(R"([1,2])")), ConfigError);
    CHECK_THROWS_AS((void)parse_json("{oops"), ConfigError);
    const auto sc = simulate_config_from_json(parse_json(R"({"steps": 10, "seeds": [1, 2], "output": "x.csv"})"));
    CHECK(sc.seeds.size() == 2);
    CHECK(*sc.output == "x.csv");
    CHECK_THROWS_AS((void)simulate_config_from_json(parse_json(R"({"seeds": [-3]})")), ConfigError);
}

TEST_CASE("toy config round trips") {
    toyvae::ToyTrainConfig cfg;
    cfg.fixed_beta = 1.0;
    cfg.learning_rate = 1e-3;
    cfg.variant = Variant::no_smoothing;
    const Json j = to_json(cfg);
    const auto back = toy_config_from_json(j);
    CHECK(to_json(back).dump() == j.dump());
    CHECK(*back.fixed_beta == 1.0);
    CHECK_THROWS_AS((void)toy_config_from_json(parse_json(R"({"latent": 3})")), ConfigError);
    CHECK_THROWS_AS((void)toy_config_from_json(parse_json(R"({"batch_size": 0})")), ConfigError);
    CHECK_THROWS_AS((void)toy_config_from_json(parse_json(R"({"fixed_beta": "one"})")), ConfigError);
}

TEST_CASE("format_double round trips") {
    for (double v : {0.0, 0.1, 1.0 / 3.0, 150.01, 1e-300, 12345678.9, -2.5}) {
        const std::string s = format_double(v);
        CHECK(std::stod(s) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(20.0) == "20");
}

TEST_CASE("CSV parsing") {
    const auto t = parse_csv("step,kl\r\n0,0\n1,0.5\n\n2,1e-3\n");
    CHECK(t.header.size() == 2);
    CHECK(t.rows.size() == 3);
    CHECK(t.rows[2][1] == 1e-3);
    CHECK(read_step_kl("step,kl\n0,1\n").size() == 1);
    CHECK(read_beta_kl("kl,beta\n3,1\n")[0].first == 1.0);
    CHECK_THROWS_AS((void)parse_csv("a,b\n1\n"), ConfigError);
    CHECK_THROWS_AS((void)parse_csv("a,b\n1,x\n"), ConfigError);
    CHECK_THROWS_AS((void)read_step_kl("t,y\n1,2\n"), ConfigError);
}

TEST_CASE("trajectory CSV layout") {
    Trajectory tr;
    tr.rows.push_back({0, 0.5, 0.25, 0.25, 150.0});
    tr.rows.push_back({1, 0.5, 0.3, 0.275, 150.01});
    CHECK(trajectory_csv(tr) == "step,setpoint,kl_raw,kl_smoothed,beta\n0,0.5,0.25,0.25,150\n1,0.5,0.3,0.275,150.01\n");
}

TEST_CASE("atomic write replaces the file and leaves no temp behind") {
    const fs::path dir = fs::temp_directory_path() / "klctl_io_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path f = dir / "out.txt";
    write_file_atomic(f, "first");
    write_file_atomic(f, "second");
    CHECK(read_text_file(f) == "second");
    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "x.txt", "x"), ConfigError);
    fs::remove_all(dir);
}
