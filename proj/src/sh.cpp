#include "pags/sh.hpp"

#include <algorithm>
#include <atomic>
#include <numbers>

namespace pags {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};

std::atomic<std::uint64_t> g_sh_evaluations{0};

void check_block(std::size_t count, int degree) {
    if (degree < 0 || degree > kMaxShDegree) {
        throw UnsupportedDegreeError("unsupported SH degree " + std::to_string(degree));
    }
    if (count != static_cast<std::size_t>(sh_coeff_count(degree))) {
        throw DimensionError("SH block has " + std::to_string(count) + " coefficients, degree " +
                             std::to_string(degree) + " needs " + std::to_string(sh_coeff_count(degree)));
    }
}

// Rows: d Y_k / d(x, y, z).
std::array<Vec3, 9> sh_basis_gradient(const Vec3& d, int degree) {
    std::array<Vec3, 9> g{};
    for (auto& v : g) v.setZero();
    if (degree < 1) return g;
    const double x = d.x(), y = d.y(), z = d.z();
    g[1] = Vec3(0, -kC1, 0);
    g[2] = Vec3(0, 0, kC1);
    g[3] = Vec3(-kC1, 0, 0);
    if (degree < 2) return g;
    g[4] = kC2[0] * Vec3(y, x, 0);
    g[5] = kC2[1] * Vec3(0, z, y);
    g[6] = kC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    g[7] = kC2[3] * Vec3(z, 0, x);
    g[8] = kC2[4] * Vec3(2 * x, -2 * y, 0);
    return g;
}

}  // namespace

int sh_degree_for_count(std::size_t count) {
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (count == static_cast<std::size_t>(sh_coeff_count(d))) return d;
    }
    throw UnsupportedDegreeError("SH coefficient count " + std::to_string(count) + " does not match degree 0..2");
}

std::array<double, 9> sh_basis(const Vec3& d, int degree) {
    std::array<double, 9> y{};
    y[0] = kC0;
    if (degree < 1) return y;
    y[1] = -kC1 * d.y();
    y[2] = kC1 * d.z();
    y[3] = -kC1 * d.x();
    if (degree < 2) return y;
    const double xx = d.x() * d.x(), yy = d.y() * d.y(), zz = d.z() * d.z();
    y[4] = kC2[0] * d.x() * d.y();
    y[5] = kC2[1] * d.y() * d.z();
    y[6] = kC2[2] * (2.0 * zz - xx - yy);
    y[7] = kC2[3] * d.x() * d.z();
    y[8] = kC2[4] * (xx - yy);
    return y;
}

Vec3 evaluate_sh(std::span<const Vec3> coeffs, const Vec3& view_dir, int degree) {
    check_block(coeffs.size(), degree);
    g_sh_evaluations.fetch_add(1, std::memory_order_relaxed);
    const auto basis = sh_basis(view_dir, degree);
    Vec3 c = Vec3::Constant(0.5);
    for (std::size_t k = 0; k < coeffs.size(); ++k) c += basis[k] * coeffs[k];
    return c.cwiseMax(0.0).cwiseMin(1.0);
}

ShGrad evaluate_sh_backward(std::span<const Vec3> coeffs, const Vec3& view_dir, int degree, const Vec3& dL_dcolor) {
    check_block(coeffs.size(), degree);
    const auto basis = sh_basis(view_dir, degree);
    Vec3 raw = Vec3::Constant(0.5);
    for (std::size_t k = 0; k < coeffs.size(); ++k) raw += basis[k] * coeffs[k];
    Vec3 g = dL_dcolor;
    for (int ch = 0; ch < 3; ++ch) {
        if (raw[ch] < 0.0 || raw[ch] > 1.0) g[ch] = 0.0;
    }
    ShGrad out;
    out.coeffs.resize(coeffs.size());
    out.view_dir.setZero();
    const auto dbasis = sh_basis_gradient(view_dir, degree);
    for (std::size_t k = 0; k < coeffs.size(); ++k) {
        out.coeffs[k] = basis[k] * g;
        out.view_dir += coeffs[k].dot(g) * dbasis[k];
    }
    return out;
}

TimeVaryingSH TimeVaryingSH::zeros(int degree, int order, double period) {
    TimeVaryingSH t;
    t.order = order;
    t.period = period;
    t.a0.assign(static_cast<std::size_t>(sh_coeff_count(degree)), Vec3::Zero());
    t.cos_coeffs.assign(static_cast<std::size_t>(order), t.a0);
    t.sin_coeffs.assign(static_cast<std::size_t>(order), t.a0);
    return t;
}

ShBlock resolve_time_varying_sh(const TimeVaryingSH& tsh, double time) {
    ShBlock c = tsh.a0;
    for (int m = 1; m <= tsh.order; ++m) {
        const double phase = 2.0 * std::numbers::pi * m * time / tsh.period;
        const double cm = std::cos(phase), sm = std::sin(phase);
        const auto& cb = tsh.cos_coeffs[static_cast<std::size_t>(m - 1)];
        const auto& sb = tsh.sin_coeffs[static_cast<std::size_t>(m - 1)];
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += cm * cb[k] + sm * sb[k];
    }
    return c;
}

Vec3 evaluate_time_varying_sh(const TimeVaryingSH& tsh, double time, const Vec3& view_dir) {
    const ShBlock c = resolve_time_varying_sh(tsh, time);
    return evaluate_sh(c, view_dir, tsh.degree());
}

std::uint64_t sh_evaluation_count() { return g_sh_evaluations.load(std::memory_order_relaxed); }

}  // namespace pags
