#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace klctl::toyvae {

/// Synthetic images with known generative factors: one white axis-aligned
/// square per (x position, y position, scale) tuple on a black canvas.
///
/// Positions move the square by one pixel per index and the grid is centred
/// on the canvas; scale index k gives a square of side 2 + 2k.
struct FactorDataset {
    int nx = 0;
    int ny = 0;
    int ns = 0;
    int image_size = 0;
    Eigen::MatrixXd images;  ///< one image per row, pixels in {0, 1}, row-major raster
    std::vector<std::array<int, 3>> factors;

    [[nodiscard]] std::size_t size() const noexcept { return factors.size(); }
    [[nodiscard]] int pixels() const noexcept { return image_size * image_size; }
    [[nodiscard]] std::array<int, 3> grid() const noexcept { return {nx, ny, ns}; }
};

[[nodiscard]] constexpr int square_side(int scale_index) noexcept { return 2 + 2 * scale_index; }

/// Renders every factor combination once. Throws ConfigError if the grid
/// does not fit inside the canvas.
[[nodiscard]] FactorDataset make_factor_dataset(int nx, int ny, int ns, int image_size);

}  // namespace klctl::toyvae
