#pragma once

// Uncertainty-guided prompt adaptation and the full test-time loop:
//
//   1. jitter the initial box into N boxes
//   2. aggregate -> (mean mask, uncertainty)
//   3. enclosing box of the high-uncertainty region, jittered into N
//      boxes, plus the K most uncertain pixels as positive points
//   4. aggregate again with the refined prompts
//   5. keep the refined result only if its mean entropy is strictly lower

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uncerseg/errors.hpp"
#include "uncerseg/prompts.hpp"
#include "uncerseg/raster.hpp"
#include "uncerseg/segmenter.hpp"
#include "uncerseg/ugmp.hpp"

namespace uncerseg {

struct RefineConfig {
  std::size_t n_boxes = 3;
  double sigma_frac = 0.05;
  std::size_t k_points = 10;
  double tau = 0.5;                // region threshold as a fraction of the map maximum
  int min_point_separation = 5;    // Chebyshev pixels
  int rounds = 1;
  double binarize_threshold = 0.5;
  std::uint64_t seed = 0;
};

void validate_config(const RefineConfig& cfg);

/// pixel = 1 iff u >= tau * max(u); an all-zero map gives an empty region.
BinaryMask uncertainty_region(const UncertaintyMap& u, double tau);

/// Region pixels with a 4-neighbour outside the region or on the image border.
BinaryMask region_boundary(const BinaryMask& region);

/// Box enclosing the region's boundary pixels. Throws EmptyUncertainty.
BBox edge_bbox(const BinaryMask& region);

/// Greedy pick in (value desc, row-major index asc) order, skipping any pixel
/// closer than `min_separation` (Chebyshev) to one already chosen. Points sit
/// at pixel centers and are labelled positive.
std::vector<PointPrompt> top_k_points(const UncertaintyMap& u, std::size_t k, int min_separation);

/// Refined boxes from the uncertainty edges plus the top-K uncertain points,
/// seeded by cfg.seed.
PromptSet refine_prompts(const UncertaintyMap& u, const RefineConfig& cfg, ImageSize bounds);

struct RoundRecord {
  int index = 0;
  PromptSet prompts;  // prompts behind the result this round tried to improve
  double scalar_u = 0;
  std::optional<PromptSet> refined;
  std::optional<double> refined_scalar_u;
  bool accepted = false;
  std::string note;
};

struct RefineTrace {
  BBox initial_box;
  std::vector<PointPrompt> initial_points;
  std::vector<RoundRecord> rounds;
  int final_round = 0;  // 0 = initial aggregate, r = refined result of round r
  std::size_t backend_calls = 0;
  double initial_scalar_u = 0;
  double final_scalar_u = 0;
};

struct RefineResult {
  ProbMask mask;                 // final probability mask
  UncertaintyMap uncertainty;    // final uncertainty map
  AggregateResult initial;       // first aggregate, kept for reporting
  RefineTrace trace;
};

/// A backend failure part-way through; carries what was traced so far and
/// nests the original exception.
class RefineError : public SegmenterError {
 public:
  RefineError(const std::string& what, RefineTrace partial)
      : SegmenterError(what), trace_(std::make_shared<RefineTrace>(std::move(partial))) {}
  const RefineTrace& partial_trace() const { return *trace_; }

 private:
  std::shared_ptr<const RefineTrace> trace_;
};

/// Full test-time loop from one initial box. `initial_points` are used for
/// the first aggregate only; refined rounds replace them.
RefineResult refine_segmentation(const GrayImage& image, const BBox& initial_box, const RefineConfig& cfg,
                                 const Segmenter& backend, const std::vector<PointPrompt>& initial_points = {});

}  // namespace uncerseg
