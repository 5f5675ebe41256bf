#include "klctl/toyvae/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "json.hpp"

#include "klctl/error.hpp"
#include "klctl/io.hpp"

namespace klctl::toyvae {

namespace {

using Eigen::MatrixXd;

constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
    "w_enc", "b_enc", "w_mu", "b_mu", "w_logvar", "b_logvar", "w_dec1", "b_dec1", "w_dec2", "b_dec2"};

double stable_sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

MatrixXd affine(const MatrixXd& x, const MatrixXd& w, const MatrixXd& b) {
    MatrixXd out(x.rows(), w.cols());
    out.noalias() = x * w;
    out.rowwise() += b.row(0);
    return out;
}

std::array<std::pair<int, int>, kNumTensors> tensor_shapes(const VaeShape& s) {
    return {{{s.input_dim, s.hidden_dim},
             {1, s.hidden_dim},
             {s.hidden_dim, s.latent_dim},
             {1, s.latent_dim},
             {s.hidden_dim, s.latent_dim},
             {1, s.latent_dim},
             {s.latent_dim, s.hidden_dim},
             {1, s.hidden_dim},
             {s.hidden_dim, s.input_dim},
             {1, s.input_dim}}};
}

void validate_shape(const VaeShape& s) {
    if (s.input_dim < 1 || s.hidden_dim < 1 || s.latent_dim < 1) {
        throw ConfigError("VAE dimensions must be positive");
    }
}

}  // namespace

std::string_view tensor_name(std::size_t index) noexcept {
    return index < kNumTensors ? kTensorNames[index] : std::string_view("?");
}

ParamSet ParamSet::zeros_like(const ParamSet& like) {
    ParamSet out;
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        out.t[i] = MatrixXd::Zero(like.t[i].rows(), like.t[i].cols());
    }
    return out;
}

bool ParamSet::all_finite() const {
    for (const auto& m : t) {
        if (!m.allFinite()) return false;
    }
    return true;
}

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& m : t) n += static_cast<std::size_t>(m.size());
    return n;
}

MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd out(rows, cols);
    // Fill in row-major order so the draw sequence does not depend on storage order.
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = nd(rng);
    }
    return out;
}

ToyVae::ToyVae(VaeShape shape, std::uint64_t seed) : shape_(shape) {
    validate_shape(shape_);
    std::mt19937_64 rng(seed);
    const auto shapes = tensor_shapes(shape_);
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        const auto [rows, cols] = shapes[i];
        if (rows == 1) {
            params_.t[i] = MatrixXd::Zero(rows, cols);
            continue;
        }
        // He initialisation; the heads producing μ, log σ² and logits start smaller.
        double scale = std::sqrt(2.0 / rows);
        if (i == w_mu || i == w_logvar || i == w_dec2) scale *= 0.5;
        params_.t[i] = standard_normal(rows, cols, rng) * scale;
    }
}

ToyVae::ToyVae(VaeShape shape, ParamSet params) : shape_(shape), params_(std::move(params)) {
    validate_shape(shape_);
    const auto shapes = tensor_shapes(shape_);
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        if (params_.t[i].rows() != shapes[i].first || params_.t[i].cols() != shapes[i].second) {
            throw ConfigError("parameter tensor '" + std::string(tensor_name(i)) +
                              "' does not match the VAE shape");
        }
    }
}

ElboTerms ToyVae::elbo_terms(const MatrixXd& x, double beta, const MatrixXd& eps,
                             ParamSet* grad) const {
    const auto& p = params_.t;
    const Eigen::Index batch = x.rows();
    const int latent = shape_.latent_dim;
    if (batch == 0) throw std::invalid_argument("ELBO needs a nonempty batch");
    if (x.cols() != shape_.input_dim || eps.rows() != batch || eps.cols() != latent) {
        throw std::invalid_argument("ELBO batch or noise has the wrong shape");
    }
    const double inv_b = 1.0 / static_cast<double>(batch);

    const MatrixXd a1 = affine(x, p[w_enc], p[b_enc]);
    const MatrixXd h1 = a1.cwiseMax(0.0);
    const MatrixXd mu = affine(h1, p[w_mu], p[b_mu]);
    const MatrixXd logvar_raw = affine(h1, p[w_logvar], p[b_logvar]);
    const MatrixXd logvar = logvar_raw.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
    const MatrixXd sd = (0.5 * logvar.array()).exp().matrix();
    const MatrixXd z = mu + sd.cwiseProduct(eps);
    const MatrixXd a2 = affine(z, p[w_dec1], p[b_dec1]);
    const MatrixXd h2 = a2.cwiseMax(0.0);
    const MatrixXd logits = affine(h2, p[w_dec2], p[b_dec2]);

    if (!logits.allFinite() || !mu.allFinite() || !logvar.allFinite()) {
        throw NumericalError("non-finite activations in VAE forward pass");
    }

    ElboTerms out;
    // Bernoulli NLL with logits: max(l,0) - l·x + log(1 + exp(-|l|)).
    const auto la = logits.array();
    out.recon_nll =
        (la.max(0.0) - la * x.array() + (-la.abs()).exp().log1p()).sum() * inv_b;

    const MatrixXd kl_elem =
        0.5 * (mu.array().square() + logvar.array().exp() - logvar.array() - 1.0).matrix();
    out.kl_per_dim.resize(static_cast<std::size_t>(latent));
    out.kl_total = 0.0;
    for (int j = 0; j < latent; ++j) {
        out.kl_per_dim[static_cast<std::size_t>(j)] = kl_elem.col(j).sum() * inv_b;
        out.kl_total += out.kl_per_dim[static_cast<std::size_t>(j)];
    }
    out.loss = out.recon_nll + beta * out.kl_total;

    if (grad == nullptr) return out;
    auto& g = grad->t;

    const MatrixXd d_logits = (logits.unaryExpr(&stable_sigmoid) - x) * inv_b;
    g[w_dec2].noalias() = h2.transpose() * d_logits;
    g[b_dec2] = d_logits.colwise().sum();
    MatrixXd d_a2(batch, shape_.hidden_dim);
    d_a2.noalias() = d_logits * p[w_dec2].transpose();
    d_a2.array() *= (a2.array() > 0.0).cast<double>();
    g[w_dec1].noalias() = z.transpose() * d_a2;
    g[b_dec1] = d_a2.colwise().sum();
    MatrixXd d_z(batch, latent);
    d_z.noalias() = d_a2 * p[w_dec1].transpose();

    const MatrixXd d_mu = d_z + (beta * inv_b) * mu;
    MatrixXd d_logvar =
        (0.5 * d_z.array() * eps.array() * sd.array() +
         (0.5 * beta * inv_b) * (logvar.array().exp() - 1.0))
            .matrix();
    const auto inside = (logvar_raw.array() > kLogVarMin) && (logvar_raw.array() < kLogVarMax);
    d_logvar.array() *= inside.cast<double>();

    g[w_mu].noalias() = h1.transpose() * d_mu;
    g[b_mu] = d_mu.colwise().sum();
    g[w_logvar].noalias() = h1.transpose() * d_logvar;
    g[b_logvar] = d_logvar.colwise().sum();
    MatrixXd d_a1(batch, shape_.hidden_dim);
    d_a1.noalias() = d_mu * p[w_mu].transpose();
    d_a1.noalias() += d_logvar * p[w_logvar].transpose();
    d_a1.array() *= (a1.array() > 0.0).cast<double>();
    g[w_enc].noalias() = x.transpose() * d_a1;
    g[b_enc] = d_a1.colwise().sum();
    return out;
}

ElboTerms ToyVae::elbo_terms(const MatrixXd& batch, double beta, std::mt19937_64& rng,
                             ParamSet* grad) const {
    const MatrixXd eps = standard_normal(batch.rows(), shape_.latent_dim, rng);
    return elbo_terms(batch, beta, eps, grad);
}

MatrixXd ToyVae::encode_mean(const MatrixXd& x) const {
    const MatrixXd h1 = affine(x, params_.t[w_enc], params_.t[b_enc]).cwiseMax(0.0);
    return affine(h1, params_.t[w_mu], params_.t[b_mu]);
}

Adam::Adam(const ParamSet& like, double learning_rate, double beta1, double beta2,
           double epsilon)
    : m_(ParamSet::zeros_like(like)),
      v_(ParamSet::zeros_like(like)),
      lr_(learning_rate),
      b1_(beta1),
      b2_(beta2),
      eps_(epsilon) {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("Adam decay rates must lie in [0, 1)");
    }
}

void Adam::step(ParamSet& params, const ParamSet& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        auto m = m_.t[i].array();
        auto v = v_.t[i].array();
        const auto g = grads.t[i].array();
        m = b1_ * m + (1.0 - b1_) * g;
        v = b2_ * v + (1.0 - b2_) * g.square();
        params.t[i].array() -= lr_ * (m / c1) / ((v / c2).sqrt() + eps_);
    }
}

std::vector<char> checkpoint_bytes(const ToyVae& model) {
    nlohmann::json header;
    header["format"] = "klctl-toyvae";
    header["version"] = 1;
    header["shape"] = {{"input_dim", model.shape().input_dim},
                       {"hidden_dim", model.shape().hidden_dim},
                       {"latent_dim", model.shape().latent_dim}};
    header["dtype"] = "f64-le";
    header["order"] = "row-major";
    auto tensors = nlohmann::json::array();
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        tensors.push_back({{"name", tensor_name(i)},
                           {"rows", model.params().t[i].rows()},
                           {"cols", model.params().t[i].cols()}});
    }
    header["tensors"] = tensors;
    const std::string text = header.dump();

    std::vector<char> out;
    auto put_u64 = [&out](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
    };
    put_u64(text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& m : model.params().t) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) put_u64(std::bit_cast<std::uint64_t>(m(r, c)));
        }
    }
    return out;
}

void save_checkpoint(const ToyVae& model, const std::filesystem::path& path) {
    const auto bytes = checkpoint_bytes(model);
    write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

ToyVae load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path.string());
    const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                           std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto get_u64 = [&]() {
        if (pos + 8 > bytes.size()) throw ConfigError("truncated checkpoint " + path.string());
        std::uint64_t v = 0;
        for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[pos + b]) << (8 * b);
        pos += 8;
        return v;
    };
    const std::uint64_t header_len = get_u64();
    if (pos + header_len > bytes.size()) throw ConfigError("truncated checkpoint header");
    const std::string text(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                           bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
    pos += header_len;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad checkpoint header: ") + e.what());
    }
    if (header.value("format", "") != "klctl-toyvae" || header.value("version", 0) != 1) {
        throw ConfigError("unsupported checkpoint format");
    }
    VaeShape shape;
    shape.input_dim = header.at("shape").at("input_dim").get<int>();
    shape.hidden_dim = header.at("shape").at("hidden_dim").get<int>();
    shape.latent_dim = header.at("shape").at("latent_dim").get<int>();
    ParamSet params;
    const auto& tensors = header.at("tensors");
    if (tensors.size() != kNumTensors) throw ConfigError("checkpoint tensor count mismatch");
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        const auto rows = tensors[i].at("rows").get<Eigen::Index>();
        const auto cols = tensors[i].at("cols").get<Eigen::Index>();
        params.t[i].resize(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) params.t[i](r, c) = std::bit_cast<double>(get_u64());
        }
    }
    if (pos != bytes.size()) throw ConfigError("trailing bytes in checkpoint");
    return ToyVae(shape, std::move(params));
}

}  // namespace klctl::toyvae
