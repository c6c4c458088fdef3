#include "uncerseg/ugmp.hpp"

#include <exception>
#include <future>

namespace uncerseg {

namespace {

ProbMask checked_call(const Segmenter& backend, const GrayImage& image, const BBox& box,
                      std::span<const PointPrompt> points, std::size_t index) {
  ProbMask m;
  try {
    m = backend.segment_one(image, box, points);
  } catch (const std::exception& e) {
    std::throw_with_nested(BoxInferenceError(index, e.what()));
  }
  if (m.rows() != image.rows() || m.cols() != image.cols()) {
    throw BoxInferenceError(index, "backend returned a mask of the wrong size");
  }
  try {
    validate_probabilities(m);
  } catch (const DomainError& e) {
    throw BoxInferenceError(index, e.what());
  }
  return m;
}

}  // namespace

AggregateResult ugmp(const GrayImage& image, const PromptSet& prompts, const Segmenter& backend,
                     const UgmpOptions& options) {
  validate_prompts(prompts, size_of(image));
  const std::span<const PointPrompt> points(prompts.points);
  const std::size_t n = prompts.boxes.size();

  std::vector<ProbMask> masks(n);
  const std::size_t width = std::min(backend.preferred_parallelism(), n);
  if (width <= 1) {
    for (std::size_t i = 0; i < n; ++i) masks[i] = checked_call(backend, image, prompts.boxes[i], points, i);
  } else {
    // Slots are indexed by box, so completion order never reorders results.
    std::vector<std::future<ProbMask>> pending(n);
    for (std::size_t i = 0; i < n; ++i) {
      pending[i] = std::async(std::launch::async, [&, i] {
        return checked_call(backend, image, prompts.boxes[i], points, i);
      });
    }
    std::exception_ptr first_error;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        masks[i] = pending[i].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }

  AggregateResult out;
  out.mean_mask = aggregate(masks);
  out.uncertainty = entropy_map(out.mean_mask);
  out.scalar_u = scalar_uncertainty(out.uncertainty);
  if (options.keep_per_box) out.per_box_masks = std::move(masks);
  return out;
}

}  // namespace uncerseg
