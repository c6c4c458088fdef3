#pragma once

#include "uncerseg/prompts.hpp"
#include "uncerseg/raster.hpp"

namespace uncerseg {

/// 2|P∩G| / (|P|+|G|); 1 when both masks are empty.
double dice(const BinaryMask& pred, const BinaryMask& gt);
/// |P∩G| / |P∪G|; 1 when both masks are empty.
double iou(const BinaryMask& pred, const BinaryMask& gt);
/// Continuous-area IoU of two boxes.
double box_iou(const BBox& a, const BBox& b);

struct LossParams {
  double alpha = 0.25;
  double gamma = 2.0;
  double epsilon = 1e-7;
};

struct LossTerms {
  double focal = 0;  // pixel-averaged
  double dice = 0;
  double total() const { return focal + dice; }
};

/// Binary focal term plus soft-Dice term, as a diagnostic.
LossTerms focal_dice_terms(const ProbMask& prob, const BinaryMask& gt, const LossParams& params = {});
double focal_dice_loss(const ProbMask& prob, const BinaryMask& gt, const LossParams& params = {});

}  // namespace uncerseg
