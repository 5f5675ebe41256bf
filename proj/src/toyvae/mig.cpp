#include "klctl/toyvae/mig.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace klctl::toyvae {

std::vector<int> equal_frequency_bins(const Eigen::VectorXd& column, int bins) {
    if (bins < 2) throw std::invalid_argument("MIG needs at least 2 bins");
    const auto n = static_cast<std::size_t>(column.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
        return column(static_cast<Eigen::Index>(i)) < column(static_cast<Eigen::Index>(j));
    });
    std::vector<int> label(n, 0);
    std::size_t rank = 0;
    while (rank < n) {
        // A run of tied values takes the bin of its first rank.
        std::size_t end = rank + 1;
        const double v = column(static_cast<Eigen::Index>(order[rank]));
        while (end < n && column(static_cast<Eigen::Index>(order[end])) == v) ++end;
        const int bin = static_cast<int>((rank * static_cast<std::size_t>(bins)) / n);
        for (std::size_t r = rank; r < end; ++r) label[order[r]] = bin;
        rank = end;
    }
    return label;
}

double discrete_mutual_info(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("mutual information needs equal-length, nonempty labels");
    }
    std::map<int, double> pa;
    std::map<int, double> pb;
    std::map<std::pair<int, int>, double> pab;
    const double w = 1.0 / static_cast<double>(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        pa[a[i]] += w;
        pb[b[i]] += w;
        pab[{a[i], b[i]}] += w;
    }
    double mi = 0.0;
    for (const auto& [key, p] : pab) mi += p * std::log(p / (pa[key.first] * pb[key.second]));
    return std::max(mi, 0.0);
}

double discrete_entropy(const std::vector<int>& a) {
    if (a.empty()) throw std::invalid_argument("entropy needs nonempty labels");
    std::map<int, double> pa;
    const double w = 1.0 / static_cast<double>(a.size());
    for (int v : a) pa[v] += w;
    double h = 0.0;
    for (const auto& [v, p] : pa) h -= p * std::log(p);
    return h;
}

double mig_score(const Eigen::MatrixXd& latents, const std::vector<std::vector<int>>& factors,
                 int bins) {
    if (factors.empty()) throw std::invalid_argument("MIG needs at least one factor");
    std::vector<std::vector<int>> binned;
    binned.reserve(static_cast<std::size_t>(latents.cols()));
    for (Eigen::Index j = 0; j < latents.cols(); ++j) {
        binned.push_back(equal_frequency_bins(latents.col(j), bins));
    }
    double total = 0.0;
    for (const auto& v : factors) {
        if (v.size() != static_cast<std::size_t>(latents.rows())) {
            throw std::invalid_argument("factor and latent sample counts differ");
        }
        const double h = discrete_entropy(v);
        if (!(h > 0.0)) throw std::invalid_argument("MIG factor has zero entropy");
        double first = 0.0;
        double second = 0.0;
        for (const auto& z : binned) {
            const double mi = discrete_mutual_info(z, v);
            if (mi > first) {
                second = first;
                first = mi;
            } else if (mi > second) {
                second = mi;
            }
        }
        total += (first - second) / h;
    }
    return std::clamp(total / static_cast<double>(factors.size()), 0.0, 1.0);
}

double mig_score(const ToyVae& model, const FactorDataset& data, int bins) {
    const Eigen::MatrixXd means = model.encode_mean(data.images);
    std::vector<std::vector<int>> factors(3, std::vector<int>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t k = 0; k < 3; ++k) factors[k][i] = data.factors[i][k];
    }
    return mig_score(means, factors, bins);
}

}  // namespace klctl::toyvae
