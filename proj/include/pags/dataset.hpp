#pragma once

#include "pags/scene.hpp"
#include "pags/semantic.hpp"

#include <string>
#include <vector>

namespace pags {

/// A set of views with optional images and masks, as stored in a views file.
struct Dataset {
    std::vector<CameraView> views;
    std::vector<SemanticMask> masks;  ///< one per view when every view has a mask, else empty
};

/// Views file: `# pags-views v1` header, then one line per view of
/// space-separated key=value tokens: id width height fx fy cx cy qw qx qy qz
/// (world-to-camera rotation) tx ty tz time, optionally image=<png> and
/// mask=<png> relative to the file's directory. `#` starts a comment.
/// Masks are always read; `load_images` false skips the RGB images.
/// Throws ParseError with the byte offset of a malformed line.
Dataset load_dataset(const std::string& views_path, bool load_images = true);

/// Parses views file text without touching image paths.
std::vector<CameraView> parse_views(const std::string& text);

/// Writes views (and, when `image_dir`/`mask_dir` are non-empty, their
/// gt_image / semantic_mask as PNG files `<dir>/view_<id>.png`, referenced
/// relative to the views file).
void save_dataset(const std::string& views_path, const std::vector<CameraView>& views,
                  const std::string& image_dir = "images", const std::string& mask_dir = "masks");

/// Semantic masks taken from the views' semantic_mask fields.
std::vector<SemanticMask> masks_from_views(const std::vector<CameraView>& views);

}  // namespace pags
