#pragma once

#include "pags/common.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace pags {

constexpr int kMaxShDegree = 2;
/// Degree-0 basis constant; color = kShC0 * dc + 0.5.
constexpr double kShC0 = 0.28209479177387814;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// Degree implied by a coefficient count; throws UnsupportedDegreeError for
/// counts that are not (d+1)^2 with d <= kMaxShDegree.
int sh_degree_for_count(std::size_t count);

/// One RGB coefficient per basis function.
using ShBlock = std::vector<Vec3>;

/// Real SH basis values Y_k(dir) for k < (degree+1)^2, graphics sign convention.
std::array<double, 9> sh_basis(const Vec3& dir, int degree);

/// color = clamp(0.5 + sum_k c_k Y_k(dir), 0, 1) per channel.
/// Throws UnsupportedDegreeError for degree > 2 and DimensionError when the
/// coefficient count does not match the degree.
Vec3 evaluate_sh(std::span<const Vec3> coeffs, const Vec3& view_dir, int degree);

/// Gradients of an evaluate_sh call.
struct ShGrad {
    std::vector<Vec3> coeffs;  ///< dL/dc_k
    Vec3 view_dir;             ///< dL/d(dir), dir treated as a free 3-vector
};

/// Backward pass of evaluate_sh given dL/dcolor. Channels that were clamped
/// receive zero gradient.
ShGrad evaluate_sh_backward(std::span<const Vec3> coeffs, const Vec3& view_dir, int degree, const Vec3& dL_dcolor);

/// Fourier-in-time SH coefficients of a dynamic Gaussian.
struct TimeVaryingSH {
    int order = 0;                 ///< Fourier order M
    ShBlock a0;                    ///< base block
    std::vector<ShBlock> cos_coeffs;  ///< M blocks
    std::vector<ShBlock> sin_coeffs;  ///< M blocks
    double period = 1.0;           ///< normalization span T (seconds)

    int degree() const { return sh_degree_for_count(a0.size()); }

    /// Zero-initialized coefficients of the given degree and order.
    static TimeVaryingSH zeros(int degree, int order, double period);
};

/// Effective SH block at `time`:
/// a0 + sum_m cos_m cos(2 pi m t / T) + sin_m sin(2 pi m t / T).
ShBlock resolve_time_varying_sh(const TimeVaryingSH& tsh, double time);

Vec3 evaluate_time_varying_sh(const TimeVaryingSH& tsh, double time, const Vec3& view_dir);

/// Number of evaluate_sh calls made so far in this process (all threads).
std::uint64_t sh_evaluation_count();

}  // namespace pags
