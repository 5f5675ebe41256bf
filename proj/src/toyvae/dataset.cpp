#include "klctl/toyvae/dataset.hpp"

#include <algorithm>
#include <string>

#include "klctl/error.hpp"

namespace klctl::toyvae {

FactorDataset make_factor_dataset(int nx, int ny, int ns, int image_size) {
    if (nx < 1 || ny < 1 || ns < 1 || image_size < 1) {
        throw ConfigError("factor grid sizes and image size must be positive");
    }
    const int max_side = square_side(ns - 1);
    const int extent_x = (nx - 1) + max_side;
    const int extent_y = (ny - 1) + max_side;
    if (max_side > image_size || extent_x > image_size || extent_y > image_size) {
        throw ConfigError("factor grid does not fit: needs " +
                          std::to_string(std::max(extent_x, extent_y)) + " pixels, canvas has " +
                          std::to_string(image_size));
    }
    const int origin_x = (image_size - extent_x) / 2;
    const int origin_y = (image_size - extent_y) / 2;

    FactorDataset ds;
    ds.nx = nx;
    ds.ny = ny;
    ds.ns = ns;
    ds.image_size = image_size;
    const int n = nx * ny * ns;
    ds.images = Eigen::MatrixXd::Zero(n, image_size * image_size);
    ds.factors.reserve(static_cast<std::size_t>(n));

    int row = 0;
    for (int i = 0; i < nx; ++i) {
        for (int j = 0; j < ny; ++j) {
            for (int k = 0; k < ns; ++k) {
                const int side = square_side(k);
                const int inset = (max_side - side) / 2;
                const int left = origin_x + i + inset;
                const int top = origin_y + j + inset;
                for (int r = top; r < top + side; ++r) {
                    for (int c = left; c < left + side; ++c) ds.images(row, r * image_size + c) = 1.0;
                }
                ds.factors.push_back({i, j, k});
                ++row;
            }
        }
    }
    return ds;
}

}  // namespace klctl::toyvae
