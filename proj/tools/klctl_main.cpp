// klctl: command-line front end for the KL set-point control toolkit.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "klctl/config.hpp"
#include "klctl/error.hpp"
#include "klctl/io.hpp"
#include "klctl/plant.hpp"
#include "klctl/simloop.hpp"
#include "klctl/stability.hpp"
#include "klctl/toyvae/model.hpp"
#include "klctl/toyvae/trainer.hpp"

namespace fs = std::filesystem;
using klctl::Json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

Json metrics_json(const klctl::TrackingMetrics& m) {
    return Json{{"max_overshoot", m.max_overshoot},
                {"settle_step", m.settle_step},
                {"settled", m.settled},
                {"steady_err", m.steady_err}};
}

// <dir>/<stem><suffix>
fs::path sibling(const fs::path& base, const std::string& suffix) {
    return base.parent_path() / (base.stem().string() + suffix);
}

struct SimulateArgs {
    std::string config;
    std::string output;
    std::vector<std::uint64_t> seeds;
};

int cmd_simulate(const SimulateArgs& args) {
    klctl::SimulateConfig sc =
        klctl::simulate_config_from_json(klctl::parse_json(klctl::read_text_file(args.config)));
    fs::path out = args.output.empty() ? fs::path(sc.output.value_or("trajectory.csv")) : fs::path(args.output);
    std::vector<std::uint64_t> seeds = args.seeds.empty() ? sc.seeds : args.seeds;

    if (seeds.empty()) {
        const klctl::Trajectory traj = klctl::run_closed_loop(sc.loop);
        const auto m = klctl::tracking_metrics(traj);
        Json mj = metrics_json(m);
        mj["config_digest"] = traj.config_digest;
        mj["seed"] = sc.loop.seed;
        klctl::write_file_atomic(out, klctl::trajectory_csv(traj));
        klctl::write_file_atomic(sibling(out, "_metrics.json"), mj.dump(2) + "\n");
        return 0;
    }

    // Fan out one loop per seed; results land in fixed slots so naming and
    // content never depend on thread scheduling.
    std::vector<std::optional<klctl::Trajectory>> results(seeds.size());
    std::vector<std::exception_ptr> errors(seeds.size());
    const std::size_t workers =
        std::max<std::size_t>(1, std::min<std::size_t>(seeds.size(), std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < seeds.size(); i += workers) {
                try {
                    klctl::LoopConfig cfg = sc.loop;
                    cfg.seed = seeds[i];
                    results[i] = klctl::run_closed_loop(cfg);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const auto& traj = *results[i];
        const std::string tag = "_seed" + std::to_string(seeds[i]);
        Json mj = metrics_json(klctl::tracking_metrics(traj));
        mj["config_digest"] = traj.config_digest;
        mj["seed"] = seeds[i];
        klctl::write_file_atomic(sibling(out, tag + ".csv"), klctl::trajectory_csv(traj));
        klctl::write_file_atomic(sibling(out, tag + "_metrics.json"), mj.dump(2) + "\n");
    }
    return 0;
}

struct StabilityArgs {
    double kp = 0.01;
    double ki = 0.005;
    std::optional<double> a;
    std::optional<double> g_prime;
    std::string preset;
    std::optional<double> setpoint;
    bool region = false;
    std::vector<double> kp_range;
    std::vector<double> ki_range;
    std::size_t kp_steps = 100;
    std::size_t ki_steps = 100;
    std::string output;
};

Json report_json(const klctl::StabilityReport& r, double kp, double ki, double a, double g) {
    Json eig = Json::array();
    for (const auto& z : r.eigenvalues) eig.push_back(Json{{"re", z.real()}, {"im", z.imag()}});
    Json violated = Json::array();
    for (auto c : r.violated_conditions) {
        violated.push_back(Json{{"id", std::string(klctl::condition_id(c))},
                                {"condition", std::string(klctl::condition_text(c))}});
    }
    return Json{{"kp", kp},
                {"ki", ki},
                {"a", a},
                {"g_prime", g},
                {"stable", r.stable()},
                {"routh_stable", r.routh_stable},
                {"eig_stable", r.eig_stable},
                {"verdicts_agree", r.verdicts_agree},
                {"marginal", r.marginal},
                {"spectral_radius", r.spectral_radius},
                {"b_coeffs", {r.b_coeffs[0], r.b_coeffs[1], r.b_coeffs[2], r.b_coeffs[3]}},
                {"eigenvalues", eig},
                {"violated_conditions", violated}};
}

int cmd_stability(const StabilityArgs& args) {
    double a = 0.0;
    double g = 0.0;
    if (!args.preset.empty()) {
        const klctl::PlantParams p = klctl::plant_preset(args.preset);
        a = p.a;
        g = args.setpoint ? p.g.derivative(p.g.inverse(*args.setpoint))
                          : klctl::preset_g_prime_min(args.preset);
    }
    if (args.a) a = *args.a;
    if (args.g_prime) g = *args.g_prime;
    if (args.preset.empty() && (!args.a || !args.g_prime)) {
        throw klctl::ConfigError("give --preset or both --a and --g-prime");
    }

    if (args.region) {
        if (args.kp_range.size() != 2 || args.ki_range.size() != 2) {
            throw klctl::ConfigError("--region needs --kp-range LO HI and --ki-range LO HI");
        }
        const auto cells = klctl::stability_region(a, g, {args.kp_range[0], args.kp_range[1]},
                                                   {args.ki_range[0], args.ki_range[1]},
                                                   args.kp_steps, args.ki_steps);
        const std::string csv = klctl::region_csv(cells);
        if (args.output.empty()) {
            std::cout << csv;
        } else {
            klctl::write_file_atomic(args.output, csv);
        }
        return 0;
    }

    const klctl::StabilityReport r = klctl::check_stability(args.kp, args.ki, a, g);
    const std::string text = report_json(r, args.kp, args.ki, a, g).dump(2) + "\n";
    if (args.output.empty()) {
        std::cout << text;
    } else {
        klctl::write_file_atomic(args.output, text);
    }
    std::cerr << (r.stable() ? "stable" : "not stable") << " (routh: "
              << (r.routh_stable ? "stable" : "unstable")
              << ", eigenvalues: " << (r.eig_stable ? "stable" : "unstable") << ")\n";
    for (auto c : r.violated_conditions) {
        std::cerr << "condition " << klctl::condition_text(c) << " violated\n";
    }
    return 0;
}

struct IdentifyArgs {
    std::string open_loop;
    std::string samples;
    std::optional<double> c_prime;
    std::string output = "plant.json";
};

int cmd_identify(const IdentifyArgs& args) {
    const auto traj = klctl::read_step_kl(klctl::read_text_file(args.open_loop));
    const auto samples = klctl::read_beta_kl(klctl::read_text_file(args.samples));
    if (traj.empty()) throw klctl::ConfigError("open-loop CSV has no rows");
    double c_prime = 0.0;
    if (args.c_prime) {
        c_prime = *args.c_prime;
    } else {
        // Final value: mean of the last 5% of the record.
        const std::size_t n = std::max<std::size_t>(1, traj.size() / 20);
        for (std::size_t i = traj.size() - n; i < traj.size(); ++i) c_prime += traj[i].second;
        c_prime /= static_cast<double>(n);
    }
    const double a = klctl::estimate_a(traj, c_prime);
    const klctl::ExpMap g = klctl::fit_exp_map(samples);
    klctl::PlantParams p;
    p.a = a;
    p.g = g;
    p.validate();
    klctl::write_file_atomic(args.output, klctl::to_json(p).dump(2) + "\n");
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string variant;
    std::string output;
};

int cmd_train_toy(const TrainArgs& args) {
    klctl::TrainToyConfig tc =
        klctl::train_toy_config_from_json(klctl::parse_json(klctl::read_text_file(args.config)));
    if (!args.variant.empty()) tc.train.variant = klctl::parse_variant(args.variant);
    const fs::path stem = args.output.empty() ? fs::path(tc.output.value_or("toyvae")) : fs::path(args.output);

    const auto result = klctl::toyvae::train_with_controller(tc.train);
    const auto& log = result.log;
    const auto m = klctl::toyvae::tracking_metrics(log, tc.train.schedule.c_final);
    Json act = Json::array();
    for (const auto& s : klctl::toyvae::dimwise_kl_trace(log)) {
        act.push_back(s ? Json(*s) : Json(nullptr));
    }
    Json evals = Json::array();
    for (const auto& e : log.evals) {
        evals.push_back(Json{{"step", e.step}, {"mig", e.mig}, {"recon_nll", e.recon_nll}, {"kl_total", e.kl_total}});
    }
    Json mj{{"mig", log.mig},
            {"final_beta", log.rows.back().beta},
            {"final_kl_smoothed", log.rows.back().kl_smoothed},
            {"recon_final", log.recon_final},
            {"tracking", metrics_json(m)},
            {"activation_steps", act},
            {"evals", evals},
            {"config", klctl::to_json(tc.train)}};

    klctl::write_file_atomic(stem.string() + ".csv", klctl::toyvae::train_log_csv(log));
    const auto ckpt = klctl::toyvae::checkpoint_bytes(result.model);
    klctl::write_file_atomic(stem.string() + ".ckpt", std::string_view(ckpt.data(), ckpt.size()));
    klctl::write_file_atomic(stem.string() + ".json", mj.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"KL-divergence set-point control: simulation, stability analysis, plant identification and a toy VAE"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run the closed loop on the simulated plant");
    simulate->add_option("config", sim.config, "Run config JSON")->required()->check(CLI::ExistingFile);
    simulate->add_option("-o,--output", sim.output, "Trajectory CSV (default from config, else trajectory.csv)");
    simulate->add_option("--seeds", sim.seeds, "Fan out over these seeds: <stem>_seed<k>.csv");

    StabilityArgs st;
    auto* stability = app.add_subcommand("stability", "Check the stability conditions of the PI loop");
    stability->add_option("--kp", st.kp, "Proportional gain")->capture_default_str();
    stability->add_option("--ki", st.ki, "Integral gain")->capture_default_str();
    stability->add_option("--a", st.a, "Plant time-constant parameter");
    stability->add_option("--g-prime", st.g_prime, "g'(x) at equilibrium (negative)");
    stability->add_option("--preset", st.preset, "Plant preset (mnist, dsprites); default g' is the preset bound");
    stability->add_option("--setpoint", st.setpoint, "With --preset: evaluate g' at g^-1(setpoint)");
    stability->add_flag("--region", st.region, "Sweep a kp/ki grid and emit CSV");
    stability->add_option("--kp-range", st.kp_range, "LO HI")->expected(2);
    stability->add_option("--ki-range", st.ki_range, "LO HI")->expected(2);
    stability->add_option("--kp-steps", st.kp_steps, "Grid points along kp")->capture_default_str();
    stability->add_option("--ki-steps", st.ki_steps, "Grid points along ki")->capture_default_str();
    stability->add_option("-o,--output", st.output, "Write the report/CSV here instead of stdout");

    IdentifyArgs id;
    auto* identify = app.add_subcommand("identify", "Identify a first-order plant from open-loop data");
    identify->add_option("--open-loop", id.open_loop, "CSV with header step,kl")->required()->check(CLI::ExistingFile);
    identify->add_option("--samples", id.samples, "CSV with header beta,kl (converged KL per beta)")->required()->check(CLI::ExistingFile);
    identify->add_option("--c-prime", id.c_prime, "Final open-loop KL (default: mean of last 5%)");
    identify->add_option("-o,--output", id.output, "Plant JSON")->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train-toy", "Train the toy VAE under KL control");
    train->add_option("config", tr.config, "Training config JSON")->required()->check(CLI::ExistingFile);
    train->add_option("--variant", tr.variant, "full | positional | step-anneal | no-smooth");
    train->add_option("-o,--output", tr.output, "Output stem for .csv/.ckpt/.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*simulate) return cmd_simulate(sim);
        if (*stability) return cmd_stability(st);
        if (*identify) return cmd_identify(id);
        if (*train) return cmd_train_toy(tr);
    } catch (const klctl::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return 0;
}
