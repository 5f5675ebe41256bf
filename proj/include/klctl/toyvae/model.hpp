#pragma once

/**
 * @file model.hpp
 * @brief Small fully connected VAE with hand-written backpropagation.
 *
 * Encoder  x -> ReLU(x W_enc + b_enc) -> (μ, log σ²)
 * Decoder  z -> ReLU(z W_dec1 + b_dec1) -> Bernoulli logits
 *
 * The posterior is a diagonal Gaussian, z = μ + σ ⊙ ε with one sample per
 * datum, and log σ² is clamped to [-10, 10]. The objective is
 *
 *   loss = recon_nll + β · KL(q(z|x) || N(0, I))
 *
 * with recon_nll the per-image Bernoulli negative log likelihood in nats,
 * both terms averaged over the batch.
 */

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace klctl::toyvae {

struct VaeShape {
    int input_dim = 256;
    int hidden_dim = 128;
    int latent_dim = 6;
};

/// Parameter tensors in a fixed order. Biases are stored as 1×n matrices.
enum Tensor : std::size_t {
    w_enc, b_enc, w_mu, b_mu, w_logvar, b_logvar, w_dec1, b_dec1, w_dec2, b_dec2,
    kNumTensors
};

[[nodiscard]] std::string_view tensor_name(std::size_t index) noexcept;

struct ParamSet {
    std::array<Eigen::MatrixXd, kNumTensors> t;

    /// Zero-filled set with the same shapes as @p like.
    [[nodiscard]] static ParamSet zeros_like(const ParamSet& like);
    [[nodiscard]] bool all_finite() const;
    [[nodiscard]] std::size_t count() const;
};

struct ElboTerms {
    double recon_nll = 0.0;
    double kl_total = 0.0;
    std::vector<double> kl_per_dim;
    double loss = 0.0;
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

class ToyVae {
public:
    ToyVae(VaeShape shape, std::uint64_t seed);
    ToyVae(VaeShape shape, ParamSet params);

    /// ELBO terms for @p batch (one image per row) with fixed reparameterisation
    /// noise @p eps (batch × latent). When @p grad is non-null it receives
    /// d loss / d params. Throws NumericalError on non-finite activations.
    ElboTerms elbo_terms(const Eigen::MatrixXd& batch, double beta, const Eigen::MatrixXd& eps,
                         ParamSet* grad = nullptr) const;

    /// Same, drawing ε ~ N(0, I) from @p rng.
    ElboTerms elbo_terms(const Eigen::MatrixXd& batch, double beta, std::mt19937_64& rng,
                         ParamSet* grad = nullptr) const;

    /// Posterior means, one row per input row.
    [[nodiscard]] Eigen::MatrixXd encode_mean(const Eigen::MatrixXd& x) const;

    [[nodiscard]] const VaeShape& shape() const noexcept { return shape_; }
    [[nodiscard]] const ParamSet& params() const noexcept { return params_; }
    [[nodiscard]] ParamSet& params() noexcept { return params_; }

private:
    VaeShape shape_;
    ParamSet params_;
};

[[nodiscard]] Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols,
                                              std::mt19937_64& rng);

/// Adaptive-moment optimiser with bias correction.
class Adam {
public:
    Adam(const ParamSet& like, double learning_rate, double beta1 = 0.9, double beta2 = 0.99,
         double epsilon = 1e-8);

    void step(ParamSet& params, const ParamSet& grads);

    [[nodiscard]] std::int64_t steps() const noexcept { return t_; }

private:
    ParamSet m_;
    ParamSet v_;
    double lr_;
    double b1_;
    double b2_;
    double eps_;
    std::int64_t t_ = 0;
};

/// Checkpoint file: u64 little-endian header length, a JSON header with the
/// shape and tensor layout, then every tensor as row-major little-endian f64.
void save_checkpoint(const ToyVae& model, const std::filesystem::path& path);
[[nodiscard]] ToyVae load_checkpoint(const std::filesystem::path& path);
/// Serialised bytes, as written by save_checkpoint.
[[nodiscard]] std::vector<char> checkpoint_bytes(const ToyVae& model);

}  // namespace klctl::toyvae
