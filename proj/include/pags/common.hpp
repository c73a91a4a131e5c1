#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pags {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// Quaternion stored as (w, x, y, z). Kept as a plain 4-vector so optimizer
/// updates and gradients can treat it like any other parameter block.
using Quat = Eigen::Vector4d;

using GaussianId = std::int64_t;

inline Quat identity_quat() { return Quat(1.0, 0.0, 0.0, 0.0); }

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Mismatched image / mask / buffer dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

class UnsupportedDegreeError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents. `offset()` is the byte offset where parsing failed.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Training produced a non-finite loss.
class NumericalError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Warnings

using WarningSink = std::function<void(std::string_view)>;

/// Emits a warning through the installed sink (stderr by default).
void log_warning(std::string_view message);

/// Replaces the warning sink; returns the previous one. Pass an empty
/// function to restore the stderr default.
WarningSink set_warning_sink(WarningSink sink);

/// Total warnings emitted since process start.
std::size_t warning_count();

// ---------------------------------------------------------------------------
// Parallelism

/// Number of workers used when a caller passes 0.
int default_worker_count();

/// Runs fn(i) for i in [0, n) over `workers` threads using a static,
/// contiguous partition. workers <= 1 runs inline.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// Random numbers

/// Uniform double in [0, 1) from the top 53 bits of a 64-bit draw.
template <typename Engine>
double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace pags
