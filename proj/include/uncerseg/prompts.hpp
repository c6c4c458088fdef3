#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "uncerseg/raster.hpp"

namespace uncerseg {

/// Axis-aligned box in continuous pixel coordinates; pixel i spans [i, i+1).
struct BBox {
  double x_min = 0;
  double y_min = 0;
  double x_max = 0;
  double y_max = 0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool inside(ImageSize bounds) const {
    return x_min >= 0 && y_min >= 0 && x_max <= bounds.width && y_max <= bounds.height;
  }
  /// True iff the center of pixel (x, y) lies in [x_min, x_max) x [y_min, y_max).
  bool covers_pixel(int x, int y) const {
    const double cx = x + 0.5, cy = y + 0.5;
    return cx >= x_min && cx < x_max && cy >= y_min && cy < y_max;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class PointLabel { positive, negative };

struct PointPrompt {
  double x = 0;
  double y = 0;
  PointLabel label = PointLabel::positive;

  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

struct PromptSet {
  std::vector<BBox> boxes;
  std::vector<PointPrompt> points;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

struct JitterSpec {
  double sigma_frac = 0.05;
  std::uint64_t seed = 0;
};

/// Throws DomainError unless `b` has positive area and lies within `bounds`.
void validate_box(const BBox& b, ImageSize bounds);
void validate_prompts(const PromptSet& prompts, ImageSize bounds);

/// Clamps to bounds; an axis collapsed by clamping is regrown to 1 px.
BBox clamp_box(const BBox& b, ImageSize bounds);

/// Gaussian jitter of each corner coordinate, sigma proportional to the box side.
BBox perturb_box(const BBox& b, const JitterSpec& spec, ImageSize bounds, std::uint64_t draw_index);
std::vector<BBox> gen_box_set(const BBox& b_init, std::size_t n, const JitterSpec& spec, ImageSize bounds);

/// Smallest box containing every foreground pixel. Throws EmptyForeground.
BBox tight_bbox(const BinaryMask& mask);

struct DegradeOptions {
  double tolerance = 0.02;
  int max_proposals = 10000;
  // Proposal family: each side scaled by U(min_scale, max_scale), center
  // shifted by U(-max_shift, max_shift) times the side length.
  double min_scale = 0.6;
  double max_scale = 1.0;
  double max_shift = 0.3;
};

/// A box whose IoU with `gt_box` is within tolerance of `target_iou`.
/// Throws GenerationFailed when the proposal budget is exhausted.
BBox degraded_box(const BBox& gt_box, double target_iou, std::uint64_t seed, ImageSize bounds,
                  const DegradeOptions& options = {});

/// `m` distinct foreground pixel centers sampled without replacement.
std::vector<PointPrompt> sample_positive_points(const BinaryMask& gt, std::size_t m, std::uint64_t seed);

/// Parses "x_min,y_min,x_max,y_max".
BBox parse_box(std::string_view text);
std::string format_box(const BBox& b);

std::string_view to_string(PointLabel label);
PointLabel parse_point_label(std::string_view text);

}  // namespace uncerseg
