#pragma once

#include "pags/scene.hpp"

#include <string>

namespace pags {

enum class PlyPrecision { Double, Float };

/// Little-endian binary PLY in the common splat layout (x y z, f_dc_*,
/// channel-major f_rest_*, opacity, scale_*, rot_*) plus s_sem, critical and
/// id. Dynamic objects are stored in the extra elements `object`,
/// `object_pose` and `object_vertex`. Double precision round-trips every
/// field exactly; Float matches files produced by common splatting tools.
/// Throws ConfigError when Gaussians of one group mix SH degrees or Fourier
/// orders.
std::string encode_ply(const SceneModel& scene, PlyPrecision precision = PlyPrecision::Double);
void save_ply(const SceneModel& scene, const std::string& path, PlyPrecision precision = PlyPrecision::Double);

/// Parses a PLY produced by encode_ply or a baseline splat PLY. Missing s_sem
/// / critical default to 0 / false with a warning; missing ids are assigned
/// sequentially. Throws ParseError (with byte offset) on malformed headers,
/// truncated bodies or missing required properties.
SceneModel decode_ply(const std::string& bytes);
SceneModel load_ply(const std::string& path);

}  // namespace pags
