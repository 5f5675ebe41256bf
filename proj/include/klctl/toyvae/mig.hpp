#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "klctl/toyvae/dataset.hpp"
#include "klctl/toyvae/model.hpp"

namespace klctl::toyvae {

/// Equal-frequency discretisation of one column into @p bins bins. Tied
/// values always share a bin, so a constant column maps to a single bin.
[[nodiscard]] std::vector<int> equal_frequency_bins(const Eigen::VectorXd& column, int bins);

/// Plug-in mutual information (nats) between two discrete label vectors.
[[nodiscard]] double discrete_mutual_info(const std::vector<int>& a, const std::vector<int>& b);

/// Plug-in entropy (nats) of a discrete label vector.
[[nodiscard]] double discrete_entropy(const std::vector<int>& a);

/// Mutual information gap of @p latents (one row per sample) against ground
/// truth @p factors (one column per factor):
///   mean_k [I(z_(1); v_k) - I(z_(2); v_k)] / H(v_k)
/// with z_(1), z_(2) the two latents most informative about v_k.
[[nodiscard]] double mig_score(const Eigen::MatrixXd& latents,
                               const std::vector<std::vector<int>>& factors, int bins = 20);

/// MIG of the model's posterior means over the whole dataset.
[[nodiscard]] double mig_score(const ToyVae& model, const FactorDataset& data, int bins = 20);

}  // namespace klctl::toyvae
