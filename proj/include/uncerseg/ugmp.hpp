#pragma once

// Multi-prompt aggregation: one prediction per box with a shared point
// list, averaged, then scored by per-pixel entropy.

#include <span>
#include <vector>

#include "uncerseg/prompts.hpp"
#include "uncerseg/raster.hpp"
#include "uncerseg/segmenter.hpp"

namespace uncerseg {

/// Per-pixel arithmetic mean of equally sized masks.
template <typename Scalar>
ProbMaskT<Scalar> aggregate(std::span<const ProbMaskT<Scalar>> masks) {
  if (masks.empty()) throw DomainError("aggregate: no masks");
  ProbMaskT<Scalar> sum = masks.front();
  ProbMaskT<Scalar> lo = sum, hi = sum;
  for (std::size_t i = 1; i < masks.size(); ++i) {
    require_same_size(masks[i], sum, "aggregate");
    sum += masks[i];
    lo = lo.cwiseMin(masks[i]);
    hi = hi.cwiseMax(masks[i]);
  }
  // Rounding in the sum may push the mean an ulp past the per-pixel range.
  return (sum / static_cast<Scalar>(masks.size())).cwiseMax(lo).cwiseMin(hi);
}

template <typename Scalar>
ProbMaskT<Scalar> aggregate(const std::vector<ProbMaskT<Scalar>>& masks) {
  return aggregate(std::span<const ProbMaskT<Scalar>>(masks));
}

struct AggregateResult {
  ProbMask mean_mask;
  UncertaintyMap uncertainty;
  std::vector<ProbMask> per_box_masks;  // empty when tracing is off
  double scalar_u = 0;
};

struct UgmpOptions {
  bool keep_per_box = true;
};

/// Runs the backend once per box (concurrently when the backend asks for
/// it), averages the masks and computes the entropy map. Backend failures
/// surface as BoxInferenceError carrying the failing box index, with the
/// original exception nested.
AggregateResult ugmp(const GrayImage& image, const PromptSet& prompts, const Segmenter& backend,
                     const UgmpOptions& options = {});

}  // namespace uncerseg
