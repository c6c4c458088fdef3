#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "uncerseg/metrics.hpp"
#include "uncerseg/segmenter.hpp"

using namespace uncerseg;

TEST_CASE("oracle with a box covering everything") {
  const BinaryMask gt = testing::left_two_columns();
  const ProbMask p = oracle_segment(gt, {0, 0, 4, 4}, {});
  CHECK((p.leftCols(2) == 0.9).all());
  CHECK(((p.rightCols(2) - 0.15).abs() < 1e-15).all());
  CHECK((threshold_mask(p, 0.5) == gt).all());
}

TEST_CASE("oracle with a one-column box") {
  const BinaryMask gt = testing::left_two_columns();
  const ProbMask p = oracle_segment(gt, {0, 0, 1, 4}, {});
  for (int y = 0; y < 4; ++y) {
    CHECK(p(y, 0) == doctest::Approx(0.9));
    CHECK(p(y, 1) == doctest::Approx(0.09));
    CHECK(p(y, 2) == doctest::Approx(0.015));
    CHECK(p(y, 3) == doctest::Approx(0.015));
  }
  CHECK(scalar_uncertainty(entropy_map(p)) == doctest::Approx(0.28254670771303436).epsilon(1e-12));
  const BinaryMask pred = threshold_mask(p, 0.5);
  CHECK(dice(pred, gt) == doctest::Approx(2.0 / 3.0));
  CHECK(iou(pred, gt) == doctest::Approx(0.5));
}

TEST_CASE("positive point boosts only ground-truth pixels") {
  const BinaryMask gt = testing::left_two_columns();
  const std::vector<PointPrompt> pts{{1.5, 1.5, PointLabel::positive}};
  const ProbMask p = oracle_segment(gt, {0, 0, 1, 4}, pts);
  // Pixel (1,1) sits outside the box on the point itself: 0.1 * 0.9 + 0.6.
  CHECK(p(1, 1) == doctest::Approx(0.69));
  CHECK(p(1, 0) == doctest::Approx(0.9).epsilon(1e-4));  // one pixel away, bump has decayed
  CHECK(p(1, 2) == doctest::Approx(0.015));
  const std::vector<PointPrompt> on_box{{0.5, 1.5, PointLabel::positive}};
  CHECK(oracle_segment(gt, {0, 0, 1, 4}, on_box)(1, 0) == 1.0);  // 0.9 + 0.6 clamped

  const std::vector<PointPrompt> neg{{1.5, 1.5, PointLabel::negative}};
  CHECK((oracle_segment(gt, {0, 0, 1, 4}, neg) == oracle_segment(gt, {0, 0, 1, 4}, {})).all());
}

TEST_CASE("background pixels do not depend on the point boost") {
  std::mt19937_64 gen(7);
  for (int i = 0; i < 30; ++i) {
    const BinaryMask gt = testing::random_mask(gen, 12, 12, 0.4);
    const std::vector<PointPrompt> pts{{3.5, 4.5, PointLabel::positive}, {8.5, 2.5, PointLabel::positive}};
    OracleParams a, b;
    b.point_boost = 0.2;
    const ProbMask pa = oracle_segment(gt, {2, 2, 9, 10}, pts, a);
    const ProbMask pb = oracle_segment(gt, {2, 2, 9, 10}, pts, b);
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        if (!gt(y, x)) CHECK(pa(y, x) == pb(y, x));
  }
}

TEST_CASE("dice does not drop as the box approaches the ground-truth box") {
  BinaryMask gt = BinaryMask::Zero(64, 64);
  gt.block(16, 16, 32, 32).setOnes();
  double prev = -1;
  for (int shrink = 16; shrink >= 0; --shrink) {
    const BBox box{16.0 + shrink, 16.0 + shrink, 48.0, 48.0};
    const double d = dice(threshold_mask(oracle_segment(gt, box, {}), 0.5), gt);
    CHECK(d >= prev);
    prev = d;
  }
  CHECK(prev == 1.0);
}

TEST_CASE("oracle is pure and ignores the image") {
  const BinaryMask gt = testing::left_two_columns();
  const OracleSegmenter seg(gt);
  const ProbMask a = seg.segment_one(GrayImage::Zero(4, 4), {0, 0, 3, 3}, {});
  const ProbMask b = seg.segment_one(GrayImage::Constant(4, 4, 200), {0, 0, 3, 3}, {});
  CHECK((a == b).all());
  CHECK_THROWS_AS(seg.segment_one(GrayImage::Zero(5, 4), {0, 0, 3, 3}, {}), DomainError);
}

TEST_CASE("oracle parameter validation") {
  OracleParams p;
  CHECK_NOTHROW(validate_oracle_params(p));
  p.fg_in_box = 0.4;
  CHECK_THROWS_AS(validate_oracle_params(p), DomainError);
  p = {};
  p.outside_gain = 0.7;
  CHECK_THROWS_AS(validate_oracle_params(p), DomainError);
  p = {};
  p.point_radius_frac = 0;
  CHECK_THROWS_AS(validate_oracle_params(p), DomainError);
}

TEST_CASE("request and response JSON round trip") {
  SegmentRequest req;
  req.image_png = encode_gray8_png(GrayImage::Constant(3, 5, 17));
  req.boxes = {{0, 0, 2, 2}, {1, 0.5, 5, 3}};
  req.points = {{1.5, 2.5, PointLabel::positive}, {0.5, 0.5, PointLabel::negative}};
  const SegmentRequest back = decode_request_json(encode_request_json(req));
  CHECK(back.image_png == req.image_png);
  CHECK(back.boxes == req.boxes);
  CHECK(back.points == req.points);

  SegmentResponse resp;
  resp.mask_pngs = {encode_prob_png(ProbMask::Constant(3, 5, 0.25))};
  CHECK(decode_response_json(encode_response_json(resp)).mask_pngs == resp.mask_pngs);

  CHECK_THROWS_AS(decode_response_json("{\"masks\": 3}"), ProtocolError);
  CHECK_THROWS_AS(decode_response_json("not json"), ProtocolError);
  CHECK_THROWS_AS(decode_request_json("{}"), ProtocolError);
}

TEST_CASE("parse_endpoint") {
  const Endpoint a = parse_endpoint("http://127.0.0.1:8080");
  CHECK(a.scheme_host_port == "http://127.0.0.1:8080");
  CHECK(a.base_path.empty());
  const Endpoint b = parse_endpoint("http://host:9000/seg/");
  CHECK(b.scheme_host_port == "http://host:9000");
  CHECK(b.base_path == "/seg");
  CHECK_THROWS_AS(parse_endpoint("127.0.0.1:8080"), DomainError);
}

TEST_CASE("dice is non-decreasing over the box IoU sweep") {
  BinaryMask gt = BinaryMask::Zero(64, 64);
  gt.block(16, 16, 32, 32).setOnes();
  const BBox gt_box = tight_bbox(gt);
  double prev = -1;
  for (double target : {0.3, 0.5, 0.7, 0.9, 1.0}) {
    // Full-height box over the left fraction of the object.
    const BBox box{16, 16, 16 + 32 * target, 48};
    REQUIRE(box_iou(box, gt_box) == doctest::Approx(target));
    const double d = dice(threshold_mask(oracle_segment(gt, box, {}), 0.5), gt);
    CHECK(d >= prev);
    prev = d;
  }
  CHECK(prev == 1.0);
}
