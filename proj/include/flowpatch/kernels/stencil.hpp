#pragma once

// Data-parallel raster kernels. Every kernel exists twice: `serial` is the
// plain reference kept for testing, `omp` is the OpenMP version the library
// calls. Forward kernels agree bit-for-bit; adjoints (gather vs. scatter) agree
// to rounding.
//
// Planes are single-channel, row-major. Horn–Schunck state is 5-channel
// interleaved: [Ix, Iy, It, u, v]. All boundaries replicate the edge pixel.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace flowpatch::kernels {

struct Extent {
  int height = 0;
  int width = 0;
  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
};

inline constexpr int kHsChannels = 5;

/// Top-left offsets of K-sized blocks at stride K-O along an axis; a final
/// block is clamped to the border when the stride does not land on it.
/// Throws ConfigError if K > extent or O is outside [0, K).
std::vector<int> block_origins(int extent, int block, int overlap);

namespace serial {

/// sqrt(dx^2 + dy^2) of forward differences.
void forward_gradient_magnitude(Extent e, std::span<const double> in, std::span<double> out);
/// out = J^T cot of the map above; subgradient 0 where the magnitude is 0.
void forward_gradient_magnitude_adjoint(Extent e, std::span<const double> in, std::span<const double> cot,
                                        std::span<double> out);
/// Signed 5-point Laplacian. Self-adjoint.
void laplacian(Extent e, std::span<const double> in, std::span<double> out);
/// Mean of the 4 neighbours. Self-adjoint.
void neighbor_average(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_x(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_y(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_x_adjoint(Extent e, std::span<const double> cot, std::span<double> out);
void central_difference_y_adjoint(Extent e, std::span<const double> cot, std::span<double> out);
/// One Jacobi sweep: u <- ubar - Ix (Ix ubar + Iy vbar + It) / (alpha2 + Ix^2 + Iy^2), v likewise.
void hs_jacobi_step(Extent e, double alpha2, std::span<const double> state, std::span<double> next);
/// VJP of one sweep with respect to all five input channels.
void hs_jacobi_step_adjoint(Extent e, double alpha2, std::span<const double> state, std::span<const double> cot,
                            std::span<double> grad);
/// Pixel set iff some enclosing block has mean strictly above threshold.
void block_vote(Extent e, std::span<const double> gbar, int block, int overlap, double threshold,
                std::span<std::uint8_t> mask);

}  // namespace serial

namespace omp {

void forward_gradient_magnitude(Extent e, std::span<const double> in, std::span<double> out);
void forward_gradient_magnitude_adjoint(Extent e, std::span<const double> in, std::span<const double> cot,
                                        std::span<double> out);
void laplacian(Extent e, std::span<const double> in, std::span<double> out);
void neighbor_average(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_x(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_y(Extent e, std::span<const double> in, std::span<double> out);
void central_difference_x_adjoint(Extent e, std::span<const double> cot, std::span<double> out);
void central_difference_y_adjoint(Extent e, std::span<const double> cot, std::span<double> out);
void hs_jacobi_step(Extent e, double alpha2, std::span<const double> state, std::span<double> next);
void hs_jacobi_step_adjoint(Extent e, double alpha2, std::span<const double> state, std::span<const double> cot,
                            std::span<double> grad);
void block_vote(Extent e, std::span<const double> gbar, int block, int overlap, double threshold,
                std::span<std::uint8_t> mask);

}  // namespace omp

}  // namespace flowpatch::kernels
