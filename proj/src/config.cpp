#include "klctl/config.hpp"

#include <cstdio>
#include <initializer_list>
#include <string>

#include "klctl/error.hpp"

namespace klctl {

namespace {

void require_object(const Json& j, std::string_view what) {
    if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
}

void reject_unknown(const Json& j, std::string_view what,
                    std::initializer_list<std::string_view> allowed) {
    for (const auto& item : j.items()) {
        bool ok = false;
        for (auto k : allowed) ok = ok || item.key() == k;
        if (!ok) {
            throw ConfigError("unknown key '" + item.key() + "' in " + std::string(what));
        }
    }
}

double get_number(const Json& j, std::string_view key, double fallback) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw ConfigError("'" + std::string(key) + "' must be a number");
    return it->get<double>();
}

std::int64_t get_int(const Json& j, std::string_view key, std::int64_t fallback) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return fallback;
    if (!it->is_number_integer()) throw ConfigError("'" + std::string(key) + "' must be an integer");
    return it->get<std::int64_t>();
}

std::uint64_t get_seed(const Json& j, std::string_view key, std::uint64_t fallback) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return fallback;
    if (it->is_number_unsigned()) return it->get<std::uint64_t>();
    if (it->is_number_integer() && it->get<std::int64_t>() >= 0) {
        return static_cast<std::uint64_t>(it->get<std::int64_t>());
    }
    throw ConfigError("'" + std::string(key) + "' must be a nonnegative integer");
}

std::string get_string(const Json& j, std::string_view key, std::string fallback) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return fallback;
    if (!it->is_string()) throw ConfigError("'" + std::string(key) + "' must be a string");
    return it->get<std::string>();
}

const Json* find_object(const Json& j, std::string_view key) {
    const auto it = j.find(std::string(key));
    if (it == j.end()) return nullptr;
    require_object(*it, key);
    return &*it;
}

Gains gains_from_json(const Json& j) {
    require_object(j, "gains");
    reject_unknown(j, "gains", {"kp", "ki"});
    Gains g;
    g.kp = get_number(j, "kp", g.kp);
    g.ki = get_number(j, "ki", g.ki);
    return g;
}

Json gains_to_json(const Gains& g) { return Json{{"kp", g.kp}, {"ki", g.ki}}; }

}  // namespace

Json parse_json(std::string_view text) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& err) {
        throw ConfigError(std::string("malformed JSON: ") + err.what());
    }
}

Json to_json(const AnnealSchedule& s) {
    return Json{{"c0", s.c0},
                {"c_final", s.c_final},
                {"step_size", s.step_size},
                {"plateau_len", s.plateau_len},
                {"ramp_len", s.ramp_len},
                {"mode", std::string(to_string(s.mode))}};
}

AnnealSchedule schedule_from_json(const Json& j) {
    require_object(j, "schedule");
    reject_unknown(j, "schedule", {"c0", "c_final", "step_size", "plateau_len", "ramp_len", "mode"});
    AnnealSchedule s;
    s.c0 = get_number(j, "c0", s.c0);
    s.c_final = get_number(j, "c_final", s.c_final);
    s.step_size = get_number(j, "step_size", s.step_size);
    s.plateau_len = get_int(j, "plateau_len", s.plateau_len);
    s.ramp_len = get_int(j, "ramp_len", s.ramp_len);
    s.mode = parse_anneal_mode(get_string(j, "mode", std::string(to_string(s.mode))));
    s.validate();
    return s;
}

Json to_json(const PlantParams& p) {
    return Json{{"a", p.a},
                {"amplitude", p.g.amplitude},
                {"rate", p.g.rate},
                {"y0", p.y0},
                {"noise_std", p.noise_std}};
}

PlantParams plant_from_json(const Json& j) {
    require_object(j, "plant");
    PlantParams p;
    if (j.contains("preset")) {
        reject_unknown(j, "plant", {"preset", "y0", "noise_std"});
        p = plant_preset(get_string(j, "preset", ""));
    } else {
        reject_unknown(j, "plant", {"a", "amplitude", "rate", "y0", "noise_std"});
        p.a = get_number(j, "a", p.a);
        p.g.amplitude = get_number(j, "amplitude", p.g.amplitude);
        p.g.rate = get_number(j, "rate", p.g.rate);
    }
    p.y0 = get_number(j, "y0", p.y0);
    p.noise_std = get_number(j, "noise_std", p.noise_std);
    p.validate();
    return p;
}

Json to_json(const LoopConfig& cfg) {
    return Json{{"schedule", to_json(cfg.schedule)},
                {"gains", gains_to_json(cfg.gains)},
                {"beta0", cfg.beta0},
                {"beta_min", cfg.beta_min},
                {"window_t", cfg.window_t},
                {"plant", to_json(cfg.plant)},
                {"steps", cfg.steps},
                {"variant", std::string(to_string(cfg.variant))},
                {"seed", cfg.seed}};
}

namespace {

LoopConfig loop_fields(const Json& j) {
    LoopConfig cfg;
    if (const Json* s = find_object(j, "schedule")) cfg.schedule = schedule_from_json(*s);
    if (const Json* g = find_object(j, "gains")) cfg.gains = gains_from_json(*g);
    cfg.beta0 = get_number(j, "beta0", cfg.beta0);
    cfg.beta_min = get_number(j, "beta_min", cfg.beta_min);
    cfg.window_t = get_int(j, "window_t", cfg.window_t);
    if (const Json* p = find_object(j, "plant")) cfg.plant = plant_from_json(*p);
    cfg.steps = get_int(j, "steps", cfg.steps);
    cfg.variant = parse_variant(get_string(j, "variant", std::string(to_string(cfg.variant))));
    cfg.seed = get_seed(j, "seed", cfg.seed);
    cfg.validate();
    return cfg;
}

}  // namespace

LoopConfig loop_config_from_json(const Json& j) {
    require_object(j, "config");
    reject_unknown(j, "config", {"schedule", "gains", "beta0", "beta_min", "window_t", "plant",
                                 "steps", "variant", "seed"});
    return loop_fields(j);
}

SimulateConfig simulate_config_from_json(const Json& j) {
    require_object(j, "config");
    reject_unknown(j, "config", {"schedule", "gains", "beta0", "beta_min", "window_t", "plant",
                                 "steps", "variant", "seed", "output", "seeds"});
    SimulateConfig out;
    out.loop = loop_fields(j);
    if (j.contains("output")) out.output = get_string(j, "output", "");
    if (const auto it = j.find("seeds"); it != j.end()) {
        if (!it->is_array()) throw ConfigError("'seeds' must be an array of integers");
        for (const auto& s : *it) {
            if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<std::int64_t>() >= 0)) {
                throw ConfigError("'seeds' must contain nonnegative integers");
            }
            out.seeds.push_back(s.get<std::uint64_t>());
        }
    }
    return out;
}

Json to_json(const toyvae::ToyTrainConfig& cfg) {
    Json j{{"nx", cfg.nx},
           {"ny", cfg.ny},
           {"ns", cfg.ns},
           {"image_size", cfg.image_size},
           {"hidden_dim", cfg.shape.hidden_dim},
           {"latent_dim", cfg.shape.latent_dim},
           {"batch_size", cfg.batch_size},
           {"learning_rate", cfg.learning_rate},
           {"schedule", to_json(cfg.schedule)},
           {"gains", gains_to_json(cfg.gains)},
           {"beta0", cfg.beta0},
           {"beta_min", cfg.beta_min},
           {"window_t", cfg.window_t},
           {"variant", std::string(to_string(cfg.variant))},
           {"fixed_beta", nullptr},
           {"steps", cfg.steps},
           {"seed", cfg.seed},
           {"eval_every", cfg.eval_every},
           {"mig_bins", cfg.mig_bins}};
    if (cfg.fixed_beta) j["fixed_beta"] = *cfg.fixed_beta;
    return j;
}

namespace {

toyvae::ToyTrainConfig toy_fields(const Json& j) {
    toyvae::ToyTrainConfig cfg;
    const auto small_int = [&](std::string_view key, int fallback) {
        const std::int64_t v = get_int(j, key, fallback);
        if (v < 1 || v > 1'000'000) throw ConfigError("'" + std::string(key) + "' out of range");
        return static_cast<int>(v);
    };
    cfg.nx = small_int("nx", cfg.nx);
    cfg.ny = small_int("ny", cfg.ny);
    cfg.ns = small_int("ns", cfg.ns);
    cfg.image_size = small_int("image_size", cfg.image_size);
    cfg.shape.input_dim = cfg.image_size * cfg.image_size;
    cfg.shape.hidden_dim = small_int("hidden_dim", cfg.shape.hidden_dim);
    cfg.shape.latent_dim = small_int("latent_dim", cfg.shape.latent_dim);
    cfg.batch_size = small_int("batch_size", cfg.batch_size);
    cfg.learning_rate = get_number(j, "learning_rate", cfg.learning_rate);
    if (const Json* s = find_object(j, "schedule")) cfg.schedule = schedule_from_json(*s);
    if (const Json* g = find_object(j, "gains")) cfg.gains = gains_from_json(*g);
    cfg.beta0 = get_number(j, "beta0", cfg.beta0);
    cfg.beta_min = get_number(j, "beta_min", cfg.beta_min);
    cfg.window_t = get_int(j, "window_t", cfg.window_t);
    cfg.variant = parse_variant(get_string(j, "variant", std::string(to_string(cfg.variant))));
    if (const auto it = j.find("fixed_beta"); it != j.end() && !it->is_null()) {
        if (!it->is_number()) throw ConfigError("'fixed_beta' must be a number or null");
        cfg.fixed_beta = it->get<double>();
    }
    cfg.steps = get_int(j, "steps", cfg.steps);
    cfg.seed = get_seed(j, "seed", cfg.seed);
    cfg.eval_every = get_int(j, "eval_every", cfg.eval_every);
    cfg.mig_bins = small_int("mig_bins", cfg.mig_bins);
    cfg.validate();
    return cfg;
}

}  // namespace

toyvae::ToyTrainConfig toy_config_from_json(const Json& j) {
    require_object(j, "config");
    reject_unknown(j, "config",
                   {"nx", "ny", "ns", "image_size", "hidden_dim", "latent_dim", "batch_size",
                    "learning_rate", "schedule", "gains", "beta0", "beta_min", "window_t",
                    "variant", "fixed_beta", "steps", "seed", "eval_every", "mig_bins"});
    return toy_fields(j);
}

TrainToyConfig train_toy_config_from_json(const Json& j) {
    require_object(j, "config");
    reject_unknown(j, "config",
                   {"nx", "ny", "ns", "image_size", "hidden_dim", "latent_dim", "batch_size",
                    "learning_rate", "schedule", "gains", "beta0", "beta_min", "window_t",
                    "variant", "fixed_beta", "steps", "seed", "eval_every", "mig_bins", "output"});
    TrainToyConfig out;
    out.train = toy_fields(j);
    if (j.contains("output")) out.output = get_string(j, "output", "");
    return out;
}

std::string canonical_dump(const LoopConfig& cfg) { return to_json(cfg).dump(); }

std::string config_digest(const LoopConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_dump(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace klctl
