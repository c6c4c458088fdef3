#include "uncerseg/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace uncerseg {

namespace {

struct Overlap {
  double inter = 0;
  double pred = 0;
  double gt = 0;
};

Overlap overlap(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_size(pred, gt, "mask metric");
  const auto p = (pred != 0);
  const auto g = (gt != 0);
  return {static_cast<double>((p && g).count()), static_cast<double>(p.count()), static_cast<double>(g.count())};
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  const Overlap o = overlap(pred, gt);
  const double denom = o.pred + o.gt;
  return denom == 0 ? 1.0 : 2.0 * o.inter / denom;
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
  const Overlap o = overlap(pred, gt);
  const double uni = o.pred + o.gt - o.inter;
  return uni == 0 ? 1.0 : o.inter / uni;
}

double box_iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double ih = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0.0;
}

LossTerms focal_dice_terms(const ProbMask& prob, const BinaryMask& gt, const LossParams& params) {
  require_same_size(prob, gt, "focal_dice_loss");
  validate_probabilities(prob);
  if (!(params.alpha > 0 && params.alpha <= 1) || !(params.gamma >= 0) || !(params.epsilon > 0)) {
    throw DomainError("focal_dice_loss: invalid loss parameters");
  }
  const double eps = params.epsilon;
  const ProbMask clamped = prob.cwiseMax(eps).cwiseMin(1 - eps);
  const ProbMask g = gt.cast<double>();
  // q is the probability assigned to the true label.
  const ProbMask q = g * clamped + (1 - g) * (1 - clamped);
  const ProbMask per_pixel = -params.alpha * (1 - q).pow(params.gamma) * q.log();

  LossTerms terms;
  terms.focal = per_pixel.mean();
  const double mass = prob.sum() + g.sum();
  // Nothing predicted and nothing to find counts as a perfect overlap.
  terms.dice = mass == 0 ? 0.0 : 1.0 - 2.0 * (prob * g).sum() / (mass + eps);
  return terms;
}

double focal_dice_loss(const ProbMask& prob, const BinaryMask& gt, const LossParams& params) {
  return focal_dice_terms(prob, gt, params).total();
}

}  // namespace uncerseg
