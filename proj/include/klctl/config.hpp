#pragma once

/**
 * @file config.hpp
 * @brief Strict JSON run configurations.
 *
 * Unknown keys are rejected at every level. Missing keys take the library
 * defaults. A plant may be given as {"preset": "mnist"} (optionally with
 * "noise_std" / "y0") or by explicit fields; serialisation always writes the
 * explicit fields, so parse → dump → parse is lossless.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "klctl/simloop.hpp"
#include "klctl/toyvae/trainer.hpp"

namespace klctl {

using Json = nlohmann::ordered_json;

[[nodiscard]] Json to_json(const AnnealSchedule& s);
[[nodiscard]] Json to_json(const PlantParams& p);
[[nodiscard]] Json to_json(const LoopConfig& cfg);
[[nodiscard]] Json to_json(const toyvae::ToyTrainConfig& cfg);

/// Each throws ConfigError on unknown keys, wrong types or invalid values.
[[nodiscard]] AnnealSchedule schedule_from_json(const Json& j);
[[nodiscard]] PlantParams plant_from_json(const Json& j);
[[nodiscard]] LoopConfig loop_config_from_json(const Json& j);
[[nodiscard]] toyvae::ToyTrainConfig toy_config_from_json(const Json& j);

/// Parses JSON text; malformed input becomes ConfigError.
[[nodiscard]] Json parse_json(std::string_view text);

/// Canonical, compact serialisation (fixed key order, shortest doubles).
[[nodiscard]] std::string canonical_dump(const LoopConfig& cfg);

/// 16 hex digits of FNV-1a 64 over canonical_dump.
[[nodiscard]] std::string config_digest(const LoopConfig& cfg);

/// `simulate` config file: a LoopConfig plus optional CLI-level settings.
struct SimulateConfig {
    LoopConfig loop;
    std::optional<std::string> output;     ///< trajectory CSV path
    std::vector<std::uint64_t> seeds;      ///< fan-out seeds; empty = loop.seed only
};
[[nodiscard]] SimulateConfig simulate_config_from_json(const Json& j);

/// `train-toy` config file: a ToyTrainConfig plus an optional output stem.
struct TrainToyConfig {
    toyvae::ToyTrainConfig train;
    std::optional<std::string> output;  ///< stem for <stem>.csv, .ckpt, .json
};
[[nodiscard]] TrainToyConfig train_toy_config_from_json(const Json& j);

}  // namespace klctl
