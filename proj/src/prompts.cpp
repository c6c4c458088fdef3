#include "uncerseg/prompts.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

#include "uncerseg/metrics.hpp"
#include "uncerseg/random.hpp"

namespace uncerseg {

namespace {

// Orders one axis, clamps it to [0, limit], and regrows it to 1 px when it
// has collapsed below a pixel.
void repair_axis(double& lo, double& hi, double limit) {
  if (lo > hi) std::swap(lo, hi);
  lo = std::clamp(lo, 0.0, limit);
  hi = std::clamp(hi, 0.0, limit);
  const double span = std::min(1.0, limit);
  if (hi - lo < span) {
    const double mid = 0.5 * (lo + hi);
    // Whole-pixel start so that hi - lo comes out as exactly `span`.
    lo = std::floor(std::clamp(mid - 0.5 * span, 0.0, limit - span));
    hi = lo + span;
  }
}

BBox propose(const BBox& gt, Rng& rng, double min_scale, double max_scale, double max_shift) {
  const double w = gt.width() * rng.uniform(min_scale, max_scale);
  const double h = gt.height() * rng.uniform(min_scale, max_scale);
  const double cx = 0.5 * (gt.x_min + gt.x_max) + gt.width() * rng.uniform(-max_shift, max_shift);
  const double cy = 0.5 * (gt.y_min + gt.y_max) + gt.height() * rng.uniform(-max_shift, max_shift);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

}  // namespace

void validate_box(const BBox& b, ImageSize bounds) {
  if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) || !std::isfinite(b.y_max)) {
    throw DomainError("box has non-finite coordinates");
  }
  if (!b.valid()) throw DomainError("box " + format_box(b) + " has non-positive area");
  if (!b.inside(bounds)) {
    throw DomainError(fmt::format("box {} exceeds image bounds {}x{}", format_box(b), bounds.width, bounds.height));
  }
}

void validate_prompts(const PromptSet& prompts, ImageSize bounds) {
  if (prompts.boxes.empty()) throw DomainError("prompt set needs at least one box");
  for (const auto& b : prompts.boxes) validate_box(b, bounds);
  for (const auto& p : prompts.points) {
    if (!(p.x >= 0 && p.x <= bounds.width && p.y >= 0 && p.y <= bounds.height)) {
      throw DomainError(fmt::format("point ({}, {}) outside image bounds", p.x, p.y));
    }
  }
}

BBox clamp_box(const BBox& b, ImageSize bounds) {
  BBox out = b;
  repair_axis(out.x_min, out.x_max, bounds.width);
  repair_axis(out.y_min, out.y_max, bounds.height);
  return out;
}

BBox perturb_box(const BBox& b, const JitterSpec& spec, ImageSize bounds, std::uint64_t draw_index) {
  validate_box(b, bounds);
  if (!(spec.sigma_frac >= 0)) throw DomainError("jitter sigma_frac must be >= 0");
  if (spec.sigma_frac == 0) return b;

  Rng rng(spec.seed, draw_index);
  const double sx = spec.sigma_frac * b.width();
  const double sy = spec.sigma_frac * b.height();
  BBox out{b.x_min + sx * rng.normal(), b.y_min + sy * rng.normal(), b.x_max + sx * rng.normal(),
           b.y_max + sy * rng.normal()};
  return clamp_box(out, bounds);
}

std::vector<BBox> gen_box_set(const BBox& b_init, std::size_t n, const JitterSpec& spec, ImageSize bounds) {
  if (n == 0) throw DomainError("gen_box_set: n must be >= 1");
  std::vector<BBox> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(perturb_box(b_init, spec, bounds, i));
  return out;
}

BBox tight_bbox(const BinaryMask& mask) {
  int x0 = static_cast<int>(mask.cols()), y0 = static_cast<int>(mask.rows()), x1 = -1, y1 = -1;
  for (Eigen::Index y = 0; y < mask.rows(); ++y) {
    for (Eigen::Index x = 0; x < mask.cols(); ++x) {
      if (mask(y, x) == 0) continue;
      x0 = std::min(x0, static_cast<int>(x));
      x1 = std::max(x1, static_cast<int>(x));
      y0 = std::min(y0, static_cast<int>(y));
      y1 = std::max(y1, static_cast<int>(y));
    }
  }
  if (x1 < 0) throw EmptyForeground();
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 + 1),
          static_cast<double>(y1 + 1)};
}

BBox degraded_box(const BBox& gt_box, double target_iou, std::uint64_t seed, ImageSize bounds,
                  const DegradeOptions& options) {
  validate_box(gt_box, bounds);
  if (!(target_iou > 0 && target_iou <= 1)) throw DomainError("degraded_box: target IoU must be in (0, 1]");
  if (target_iou == 1.0) return gt_box;

  Rng rng(seed);
  // Shrink-and-shift proposals first: boxes that cut into the target. What
  // that family misses (very low or very high targets) falls through to a
  // broad family alternating with one sized to the target.
  const int primary = options.max_proposals / 2;
  for (int i = 0; i < options.max_proposals; ++i) {
    BBox candidate;
    if (i < primary) {
      candidate = propose(gt_box, rng, options.min_scale, options.max_scale, options.max_shift);
    } else if (i % 2 == 0) {
      candidate = propose(gt_box, rng, 0.25, 2.0, 1.0);
    } else {
      candidate = propose(gt_box, rng, target_iou, 1.0, 0.5 * (1.0 - target_iou));
    }
    const BBox clamped = clamp_box(candidate, bounds);
    if (std::abs(box_iou(clamped, gt_box) - target_iou) <= options.tolerance) return clamped;
  }
  throw GenerationFailed(fmt::format("degraded_box: no box with IoU {} +/- {} after {} proposals", target_iou,
                                     options.tolerance, options.max_proposals));
}

std::vector<PointPrompt> sample_positive_points(const BinaryMask& gt, std::size_t m, std::uint64_t seed) {
  std::vector<Eigen::Index> fg;
  for (Eigen::Index i = 0; i < gt.size(); ++i) {
    if (gt.data()[i] != 0) fg.push_back(i);
  }
  if (fg.size() < m) throw InsufficientForeground(m, fg.size());

  Rng rng(seed);
  std::vector<PointPrompt> out;
  out.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(fg.size() - k));
    std::swap(fg[k], fg[j]);
    const auto y = fg[k] / gt.cols();
    const auto x = fg[k] % gt.cols();
    out.push_back({static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, PointLabel::positive});
  }
  return out;
}

BBox parse_box(std::string_view text) {
  double v[4];
  std::size_t pos = 0;
  for (int i = 0; i < 4; ++i) {
    const std::size_t end = i < 3 ? text.find(',', pos) : text.size();
    if (end == std::string_view::npos) throw DomainError("box must be x_min,y_min,x_max,y_max");
    const std::string_view field = text.substr(pos, end - pos);
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v[i]);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty() || !std::isfinite(v[i])) {
      throw DomainError("box coordinate '" + std::string(field) + "' is not a number");
    }
    pos = end + 1;
  }
  BBox b{v[0], v[1], v[2], v[3]};
  if (!b.valid()) throw DomainError("box " + std::string(text) + " has non-positive area");
  return b;
}

std::string format_box(const BBox& b) { return fmt::format("{},{},{},{}", b.x_min, b.y_min, b.x_max, b.y_max); }

std::string_view to_string(PointLabel label) { return label == PointLabel::positive ? "positive" : "negative"; }

PointLabel parse_point_label(std::string_view text) {
  if (text == "positive") return PointLabel::positive;
  if (text == "negative") return PointLabel::negative;
  throw DomainError("point label must be 'positive' or 'negative'");
}

}  // namespace uncerseg
