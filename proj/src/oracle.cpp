#include <algorithm>
#include <cmath>

#include "uncerseg/segmenter.hpp"

namespace uncerseg {

void validate_oracle_params(const OracleParams& p) {
  auto unit = [](double v) { return v >= 0 && v <= 1; };
  if (!unit(p.fg_in_box) || !unit(p.bg_in_box) || !unit(p.outside_gain) || !unit(p.point_boost)) {
    throw DomainError("oracle params must lie in [0, 1]");
  }
  if (!(p.point_radius_frac > 0)) throw DomainError("oracle point radius must be > 0");
  // Box coverage must decide the 0.5 threshold for foreground pixels.
  if (!(p.fg_in_box > 0.5 && p.bg_in_box < 0.5 && p.fg_in_box * p.outside_gain < 0.5)) {
    throw DomainError("oracle params must satisfy a1 > 0.5 > a0 and a1*e_out < 0.5");
  }
}

ProbMask oracle_segment(const BinaryMask& gt, const BBox& box, std::span<const PointPrompt> points,
                        const OracleParams& params) {
  validate_binary(gt);
  const Eigen::Index h = gt.rows(), w = gt.cols();
  const double rho = params.point_radius_frac * static_cast<double>(std::min(w, h));
  const double inv_two_rho2 = 1.0 / (2.0 * rho * rho);

  ProbMask out(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const bool fg = gt(y, x) != 0;
      const double gain = box.covers_pixel(static_cast<int>(x), static_cast<int>(y)) ? 1.0 : params.outside_gain;
      double p = gain * (fg ? params.fg_in_box : params.bg_in_box);
      if (fg) {
        const double cx = x + 0.5, cy = y + 0.5;
        for (const auto& pt : points) {
          if (pt.label != PointLabel::positive) continue;
          const double dx = cx - pt.x, dy = cy - pt.y;
          p += params.point_boost * std::exp(-(dx * dx + dy * dy) * inv_two_rho2);
        }
      }
      out(y, x) = std::clamp(p, 0.0, 1.0);
    }
  }
  return out;
}

OracleSegmenter::OracleSegmenter(BinaryMask gt, OracleParams params) : gt_(std::move(gt)), params_(params) {
  validate_binary(gt_);
  validate_oracle_params(params_);
}

ProbMask OracleSegmenter::segment_one(const GrayImage& image, const BBox& box,
                                      std::span<const PointPrompt> points) const {
  require_same_size(image, gt_, "oracle segmenter");
  return oracle_segment(gt_, box, points, params_);
}

}  // namespace uncerseg
