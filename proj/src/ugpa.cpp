#include "uncerseg/ugpa.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>

#include "uncerseg/random.hpp"

namespace uncerseg {

void validate_config(const RefineConfig& cfg) {
  if (cfg.n_boxes < 1) throw DomainError("n_boxes must be >= 1");
  if (!(cfg.sigma_frac >= 0)) throw DomainError("sigma_frac must be >= 0");
  if (!(cfg.tau > 0 && cfg.tau <= 1)) throw DomainError("tau must be in (0, 1]");
  if (cfg.rounds < 1) throw DomainError("rounds must be >= 1");
  if (cfg.min_point_separation < 0) throw DomainError("min_point_separation must be >= 0");
  if (!(cfg.binarize_threshold >= 0 && cfg.binarize_threshold <= 1)) {
    throw DomainError("binarize_threshold must be in [0, 1]");
  }
}

BinaryMask uncertainty_region(const UncertaintyMap& u, double tau) {
  if (!(tau > 0 && tau <= 1)) throw DomainError("uncertainty_region: tau must be in (0, 1]");
  const double peak = u.maxCoeff();
  if (!(peak > 0)) return BinaryMask::Zero(u.rows(), u.cols());
  return (u >= tau * peak).cast<std::uint8_t>();
}

BinaryMask region_boundary(const BinaryMask& region) {
  const Eigen::Index h = region.rows(), w = region.cols();
  BinaryMask edge = BinaryMask::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (region(y, x) == 0) continue;
      const bool border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
      if (border || region(y, x - 1) == 0 || region(y, x + 1) == 0 || region(y - 1, x) == 0 ||
          region(y + 1, x) == 0) {
        edge(y, x) = 1;
      }
    }
  }
  return edge;
}

BBox edge_bbox(const BinaryMask& region) {
  try {
    // Boundary and region share their extremes, so this is also the
    // region's tight box.
    return tight_bbox(region_boundary(region));
  } catch (const EmptyForeground&) {
    throw EmptyUncertainty();
  }
}

std::vector<PointPrompt> top_k_points(const UncertaintyMap& u, std::size_t k, int min_separation) {
  std::vector<PointPrompt> out;
  if (k == 0) return out;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(u.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double* v = u.data();
  std::stable_sort(order.begin(), order.end(), [v](Eigen::Index a, Eigen::Index b) { return v[a] > v[b]; });

  std::vector<std::pair<Eigen::Index, Eigen::Index>> chosen;  // (x, y)
  for (Eigen::Index idx : order) {
    if (chosen.size() == k) break;
    const Eigen::Index y = idx / u.cols(), x = idx % u.cols();
    const bool too_close = std::any_of(chosen.begin(), chosen.end(), [&](const auto& c) {
      return std::max(std::abs(c.first - x), std::abs(c.second - y)) < min_separation;
    });
    if (too_close) continue;
    chosen.emplace_back(x, y);
    out.push_back({static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, PointLabel::positive});
  }
  return out;
}

PromptSet refine_prompts(const UncertaintyMap& u, const RefineConfig& cfg, ImageSize bounds) {
  validate_config(cfg);
  validate_probabilities(u);
  if (size_of(u) != bounds) throw DomainError("refine_prompts: map size differs from image bounds");
  PromptSet out;
  const BBox edge = edge_bbox(uncertainty_region(u, cfg.tau));
  out.boxes = gen_box_set(edge, cfg.n_boxes, JitterSpec{cfg.sigma_frac, cfg.seed}, bounds);
  out.points = top_k_points(u, cfg.k_points, cfg.min_point_separation);
  return out;
}

RefineResult refine_segmentation(const GrayImage& image, const BBox& initial_box, const RefineConfig& cfg,
                                 const Segmenter& backend, const std::vector<PointPrompt>& initial_points) {
  validate_config(cfg);
  const ImageSize bounds = size_of(image);
  validate_box(initial_box, bounds);

  RefineTrace trace;
  trace.initial_box = initial_box;
  trace.initial_points = initial_points;

  auto run = [&](const PromptSet& prompts) {
    try {
      AggregateResult r = ugmp(image, prompts, backend);
      trace.backend_calls += prompts.boxes.size();
      return r;
    } catch (const SegmenterError& e) {
      std::throw_with_nested(RefineError(e.what(), trace));
    }
  };

  PromptSet prompts;
  prompts.boxes = gen_box_set(initial_box, cfg.n_boxes,
                              JitterSpec{cfg.sigma_frac, derive_seed(cfg.seed, "initial-boxes")}, bounds);
  prompts.points = initial_points;

  RefineResult result;
  result.initial = run(prompts);
  trace.initial_scalar_u = result.initial.scalar_u;

  // `current` is whichever aggregate is presently accepted.
  const AggregateResult* current = &result.initial;
  AggregateResult accepted;
  for (int r = 1; r <= cfg.rounds; ++r) {
    RoundRecord rec;
    rec.index = r;
    rec.prompts = prompts;
    rec.scalar_u = current->scalar_u;

    RefineConfig round_cfg = cfg;
    round_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
    PromptSet refined;
    try {
      refined = refine_prompts(current->uncertainty, round_cfg, bounds);
    } catch (const EmptyUncertainty&) {
      rec.note = "refinement skipped: empty uncertainty region";
      trace.rounds.push_back(std::move(rec));
      break;
    }

    AggregateResult candidate = run(refined);
    rec.refined = refined;
    rec.refined_scalar_u = candidate.scalar_u;
    rec.accepted = current->scalar_u > candidate.scalar_u;
    const bool stop = !rec.accepted;
    rec.note = rec.accepted ? "refined prompts accepted" : "refined prompts rejected: uncertainty not reduced";
    trace.rounds.push_back(std::move(rec));
    if (stop) break;

    accepted = std::move(candidate);
    current = &accepted;
    prompts = std::move(refined);
    trace.final_round = r;
  }

  result.mask = current->mean_mask;
  result.uncertainty = current->uncertainty;
  trace.final_scalar_u = current->scalar_u;
  result.trace = std::move(trace);
  return result;
}

}  // namespace uncerseg
