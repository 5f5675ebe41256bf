#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "klctl/control.hpp"
#include "klctl/schedule.hpp"
#include "klctl/simloop.hpp"
#include "klctl/toyvae/dataset.hpp"
#include "klctl/toyvae/model.hpp"

namespace klctl::toyvae {

/// Everything a controlled toy training run needs. The loop settings mirror
/// LoopConfig without the plant: the VAE itself is the plant here.
struct ToyTrainConfig {
    int nx = 11;
    int ny = 11;
    int ns = 3;
    int image_size = 16;
    VaeShape shape;
    int batch_size = 128;
    double learning_rate = 5e-4;

    AnnealSchedule schedule{0.5, 9.5, 0.5, 500, 100, AnnealMode::hybrid};
    Gains gains{0.01, 0.001};
    double beta0 = 20.0;
    double beta_min = 0.0;
    std::int64_t window_t = 5;
    Variant variant = Variant::full;
    /// When set, the controller is bypassed and β stays at this value.
    std::optional<double> fixed_beta;

    std::int64_t steps = 30000;
    std::uint64_t seed = 0;

    std::int64_t eval_every = 200;  ///< MIG / eval-NLL cadence in steps (0 disables)
    int mig_bins = 20;

    void validate() const;
};

struct TrainRow {
    std::int64_t step = 0;
    double setpoint = 0.0;
    double kl_total = 0.0;
    double kl_smoothed = 0.0;
    double beta = 0.0;  ///< β multiplying kl_total in this step's loss
    double recon_loss = 0.0;
    std::vector<double> kl_per_dim;
};

/// Model quality measured on the whole dataset with fixed evaluation noise.
struct EvalPoint {
    std::int64_t step = 0;  ///< evaluated after this many updates
    double mig = 0.0;
    double recon_nll = 0.0;
    double kl_total = 0.0;
};

struct TrainLog {
    std::vector<TrainRow> rows;
    std::vector<EvalPoint> evals;
    double mig = 0.0;          ///< final
    double recon_final = 0.0;  ///< final evaluation NLL, nats
};

struct TrainResult {
    ToyVae model;
    TrainLog log;
};

/// Controlled (or fixed-β) training on the dataset described by @p cfg.
/// Throws NumericalError naming the step if the loss stops being finite.
[[nodiscard]] TrainResult train_with_controller(const ToyTrainConfig& cfg);
[[nodiscard]] TrainResult train_with_controller(const FactorDataset& data,
                                                const ToyTrainConfig& cfg);

/// First step at which each latent's trailing-mean KL (over @p window rows)
/// exceeds @p threshold; std::nullopt for dims that never activate.
[[nodiscard]] std::vector<std::optional<std::int64_t>> dimwise_kl_trace(
    const TrainLog& log, double threshold = 0.1, std::size_t window = 50);

/// Tracking metrics of the logged smoothed KL against the set point.
[[nodiscard]] TrackingMetrics tracking_metrics(const TrainLog& log, double c_final);

/// `step,setpoint,kl_total,kl_smoothed,beta,recon_loss,kl_dim_0..`
[[nodiscard]] std::string train_log_csv(const TrainLog& log);

}  // namespace klctl::toyvae
