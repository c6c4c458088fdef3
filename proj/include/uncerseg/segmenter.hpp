#pragma once

// Promptable segmenters: (image, box, shared points) -> probability mask.

#include <chrono>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "uncerseg/prompts.hpp"
#include "uncerseg/raster.hpp"
#include "uncerseg/raster_io.hpp"

namespace uncerseg {

class Segmenter {
 public:
  virtual ~Segmenter() = default;

  /// One mask for one box; the output has the image's dimensions.
  /// Implementations must be safe to call concurrently.
  virtual ProbMask segment_one(const GrayImage& image, const BBox& box,
                               std::span<const PointPrompt> points) const = 0;

  virtual bool supports_points() const { return true; }
  virtual std::size_t max_boxes_per_call() const { return 1; }
  /// How many segment_one calls are worth issuing at once.
  virtual std::size_t preferred_parallelism() const { return 1; }
};

/// Constants of the synthetic backend.
struct OracleParams {
  double fg_in_box = 0.9;       // probability for GT pixels covered by the box
  double bg_in_box = 0.15;      // probability for background covered by the box
  double outside_gain = 0.1;    // attenuation outside the box
  double point_boost = 0.6;     // Gaussian bump amplitude per point, GT pixels only
  double point_radius_frac = 0.05;  // bump sigma as a fraction of min(W, H)
};

void validate_oracle_params(const OracleParams& params);

/// Ground-truth-aware stand-in for a trained model:
///
///   p(x) = clamp01( m(x)·[a1·g(x) + a0·(1−g(x))] + g(x)·Σ_j b·exp(−‖x−p_j‖² / 2ρ²) )
///
/// with m(x) = 1 for pixel centers inside the box and `outside_gain`
/// elsewhere. Distances are measured between pixel centers and points.
ProbMask oracle_segment(const BinaryMask& gt, const BBox& box, std::span<const PointPrompt> points,
                        const OracleParams& params = {});

class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(BinaryMask gt, OracleParams params = {});

  ProbMask segment_one(const GrayImage& image, const BBox& box,
                       std::span<const PointPrompt> points) const override;

  const BinaryMask& ground_truth() const { return gt_; }
  const OracleParams& params() const { return params_; }

 private:
  BinaryMask gt_;
  OracleParams params_;
};

// ---- remote backend -------------------------------------------------------

struct SegmentRequest {
  Bytes image_png;  // 8-bit grayscale
  std::vector<BBox> boxes;
  std::vector<PointPrompt> points;
};

struct SegmentResponse {
  std::vector<Bytes> mask_pngs;  // 16-bit grayscale, one per box
};

std::string encode_request_json(const SegmentRequest& request);
/// Throws ProtocolError on malformed bodies.
SegmentRequest decode_request_json(const std::string& body);
std::string encode_response_json(const SegmentResponse& response);
SegmentResponse decode_response_json(const std::string& body);

struct RemoteOptions {
  std::chrono::milliseconds timeout{30000};
  int retries = 3;
  std::chrono::milliseconds base_delay{200};
  std::size_t pool_size = 4;
};

struct Endpoint {
  std::string scheme_host_port;  // e.g. "http://127.0.0.1:8080"
  std::string base_path;         // prefix before /v1/..., usually empty
};

/// Splits a URL into the host part and any path prefix.
Endpoint parse_endpoint(const std::string& url);

/// HTTP client for the segment protocol (POST /v1/segment, GET /v1/health).
class RemoteSegmenter final : public Segmenter {
 public:
  explicit RemoteSegmenter(std::string endpoint_url, RemoteOptions options = {});
  ~RemoteSegmenter() override;
  RemoteSegmenter(const RemoteSegmenter&) = delete;
  RemoteSegmenter& operator=(const RemoteSegmenter&) = delete;

  ProbMask segment_one(const GrayImage& image, const BBox& box,
                       std::span<const PointPrompt> points) const override;
  std::size_t max_boxes_per_call() const override;
  std::size_t preferred_parallelism() const override;

  /// Sends one request and checks the response against it: mask count
  /// equals box count, every mask decodes as 16-bit at the image's size.
  SegmentResponse segment(const SegmentRequest& request) const;
  /// Decoded masks for `request`, same order as its boxes.
  std::vector<ProbMask> segment_masks(const SegmentRequest& request) const;
  /// True iff GET /v1/health answers {"status":"ok"}.
  bool healthy() const;

 private:
  class Pool;
  std::unique_ptr<Pool> pool_;
  RemoteOptions options_;
};

/// Free-function form of one remote round trip.
SegmentResponse remote_segment(const std::string& endpoint_url, const SegmentRequest& request,
                               std::chrono::milliseconds timeout, int retries);

}  // namespace uncerseg
