#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "uncerseg/harness.hpp"
#include "uncerseg/raster_io.hpp"

using namespace uncerseg;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) { write_file(p, Bytes(s.begin(), s.end())); }

Dataset small_dataset(std::size_t n, std::uint64_t seed = 11) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) d.samples.push_back(synthetic_sample(seed, i, {48, 48}));
  return d;
}

}  // namespace

TEST_CASE("manifest round trip") {
  DatasetManifest m;
  m.modality = "ct";
  m.entries = {{"a", "images/a.png", "masks/a.png"}, {"b", "/abs/b.png", "masks/b.png"}};
  const DatasetManifest back = parse_manifest(manifest_to_json(m));
  CHECK(back.modality == "ct");
  REQUIRE(back.entries.size() == 2);
  CHECK(back.entries[1].id == "b");
  CHECK(back.entries[1].image_path == "/abs/b.png");
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(parse_manifest("{"), DatasetError);
  CHECK_THROWS_AS(parse_manifest("{\"entries\": 4}"), DatasetError);
  CHECK_THROWS_AS(parse_manifest(R"({"entries":[{"id":"a","image_path":"x"}]})"), DatasetError);
  CHECK_THROWS_AS(
      parse_manifest(R"({"entries":[{"id":"a","image_path":"x","mask_path":"y"},{"id":"a","image_path":"x","mask_path":"y"}]})"),
      DatasetError);
  CHECK(parse_manifest(R"({"entries":[]})").entries.empty());
}

TEST_CASE("load_dataset resolves relative paths and names bad entries") {
  const fs::path dir = testing::scratch_dir("harness_load");
  fs::create_directories(dir / "img");
  write_gray8(dir / "img" / "one.png", GrayImage::Constant(6, 5, 40));
  write_binary(dir / "img" / "one_mask.png", BinaryMask::Ones(6, 5));
  write_prob(dir / "img" / "wide_mask.png", ProbMask::Constant(6, 5, 0.5));
  write_text(dir / "manifest.json",
             R"({"modality":"mri","entries":[{"id":"one","image_path":"img/one.png","mask_path":"img/one_mask.png"}]})");
  const Dataset d = load_dataset(dir / "manifest.json");
  REQUIRE(d.samples.size() == 1);
  CHECK(d.samples[0].image.rows() == 6);
  CHECK(count_foreground(d.samples[0].mask) == 30);

  write_text(dir / "bad.json",
             R"({"entries":[{"id":"sixteen","image_path":"img/one.png","mask_path":"img/wide_mask.png"}]})");
  try {
    load_dataset(dir / "bad.json");
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("sixteen") != std::string::npos);
  }
  write_text(dir / "missing.json",
             R"({"entries":[{"id":"gone","image_path":"img/nope.png","mask_path":"img/one_mask.png"}]})");
  CHECK_THROWS_AS(load_dataset(dir / "missing.json"), DatasetError);
}

TEST_CASE("synthetic samples have bounded foreground and are reproducible") {
  for (std::size_t i = 0; i < 40; ++i) {
    const Sample s = synthetic_sample(7, i, {96, 64});
    CHECK(s.image.rows() == 64);
    CHECK(s.image.cols() == 96);
    const double frac = static_cast<double>(count_foreground(s.mask)) / (96.0 * 64.0);
    CHECK(frac >= 0.02);
    CHECK(frac <= 0.45);
    const Sample again = synthetic_sample(7, i, {96, 64});
    CHECK((again.mask == s.mask).all());
    CHECK((again.image == s.image).all());
  }
  CHECK(synthetic_sample(7, 3, {32, 32}).id == "synth_0003");
  CHECK_FALSE((synthetic_sample(7, 0, {32, 32}).mask == synthetic_sample(8, 0, {32, 32}).mask).all());
}

TEST_CASE("gen_synthetic writes a loadable corpus") {
  const fs::path dir = testing::scratch_dir("harness_gen");
  const DatasetManifest m = gen_synthetic(dir, 5, 3, {40, 40});
  CHECK(m.entries.size() == 5);
  const Dataset d = load_dataset(dir / "manifest.json");
  REQUIRE(d.samples.size() == 5);
  CHECK((d.samples[2].mask == synthetic_sample(3, 2, {40, 40}).mask).all());
  CHECK((d.samples[2].image == synthetic_sample(3, 2, {40, 40}).image).all());
}

TEST_CASE("setting labels and parsing") {
  const PromptSetting a = parse_setting("3B:0.5");
  CHECK(a.n_boxes == 3);
  CHECK(a.n_points == 0);
  CHECK(a.ratio == 0.5);
  CHECK(a.label() == "3B(0.5)");
  const PromptSetting b = parse_setting("3P&3B:0.75");
  CHECK(b.n_points == 3);
  CHECK(b.label() == "3P&3B(0.75)");
  CHECK(parse_setting("3B(1)").ratio == 1.0);
  PromptSetting k = a;
  k.k_points = 10;
  CHECK(k.label() == "3B(0.5)/k=10");
  CHECK(k.base_label() == "3B(0.5)");

  const auto list = parse_settings("3B:0.5, 3B:0.75");
  REQUIRE(list.size() == 2);
  CHECK(list[1].ratio == 0.75);
  CHECK_THROWS_AS(parse_setting("3X:0.5"), DomainError);
  CHECK_THROWS_AS(parse_setting("3B:1.5"), DomainError);
  CHECK_THROWS_AS(parse_setting("0B:0.5"), DomainError);
  CHECK_THROWS_AS(parse_settings(""), DomainError);
}

TEST_CASE("run_eval orders rows, is reproducible and independent of thread count") {
  const Dataset d = small_dataset(8);
  const auto settings = parse_settings("3B:0.5,3P&3B:0.75");
  RefineConfig cfg;
  cfg.seed = 4;
  EvalOptions one;
  one.threads = 1;
  EvalOptions many;
  many.threads = 4;
  const auto a = run_eval(d, settings, cfg, oracle_factory(), one);
  const auto b = run_eval(d, settings, cfg, oracle_factory(), many);
  REQUIRE(a.size() == 16);
  CHECK(records_to_csv(a) == records_to_csv(b));
  CHECK(a[0].setting == "3B(0.5)");
  CHECK(a[8].setting == "3P&3B(0.75)");
  for (std::size_t i = 1; i < 8; ++i) CHECK(a[i - 1].id < a[i].id);
  for (const auto& r : a) {
    CHECK(r.ok());
    CHECK(r.u_after <= r.u_before);
    if (r.accepted) CHECK(r.u_after < r.u_before);
    CHECK(r.wall_ms == 0.0);
    CHECK(r.dice_after >= r.iou_after);
  }
}

TEST_CASE("report recomputes the per-setting means") {
  const Dataset d = small_dataset(6);
  const auto records = run_eval(d, parse_settings("3B:0.5"), RefineConfig{}, oracle_factory());
  const SweepReport rep = report(records);
  REQUIRE(rep.rows.size() == 1);
  double before = 0, after = 0, acc = 0;
  for (const auto& r : records) {
    before += r.dice_before;
    after += r.dice_after;
    acc += r.accepted;
  }
  const SummaryRow& row = rep.rows[0];
  CHECK(row.count == 6);
  CHECK(row.dice_before_mean == doctest::Approx(before / 6));
  CHECK(row.dice_after_mean == doctest::Approx(after / 6));
  CHECK(row.dice_gain_mean == doctest::Approx((after - before) / 6));
  CHECK(row.acceptance_rate == doctest::Approx(acc / 6));
  double ss = 0;
  for (const auto& r : records) ss += std::pow(r.dice_after - after / 6, 2);
  CHECK(row.dice_after_std == doctest::Approx(std::sqrt(ss / 5)));
}

TEST_CASE("csv layout") {
  EvalRecord ok{"s1", "3B(0.5)", 0.5, 0.25, 0.75, 0.6, true, 0.3, 0.2, 0, std::nullopt};
  EvalRecord bad{"s2", "3B(0.5)"};
  bad.error = "boom";
  const std::string csv = records_to_csv({ok, bad});
  CHECK(csv.rfind(std::string(kRecordCsvHeader) + "\n", 0) == 0);
  CHECK(csv.find("s1,3B(0.5),0.500000,0.250000,0.750000,0.600000,true,0.300000,0.200000,0.000\n") !=
        std::string::npos);
  CHECK(csv.find("s2,3B(0.5),,,,,error,,,") != std::string::npos);
  const SweepReport rep = report({ok, bad});
  CHECK(rep.rows[0].count == 1);
  CHECK(rep.rows[0].failures == 1);
  CHECK(summary_to_csv(rep).rfind(kSummaryCsvHeader, 0) == 0);
}

TEST_CASE("a failing backend beyond the allowed rate aborts the run") {
  const Dataset d = small_dataset(4);
  BackendFactory broken = [](const Sample&) -> std::shared_ptr<const Segmenter> {
    struct Broken final : Segmenter {
      ProbMask segment_one(const GrayImage&, const BBox&, std::span<const PointPrompt>) const override {
        throw BackendError("down");
      }
    };
    return std::make_shared<Broken>();
  };
  try {
    run_eval(d, parse_settings("3B:0.5"), RefineConfig{}, broken);
    FAIL("expected RunFailed");
  } catch (const RunFailed& e) {
    CHECK(e.records().size() == 4);
    for (const auto& r : e.records()) CHECK_FALSE(r.ok());
  }
  CHECK_THROWS_AS(run_eval(Dataset{}, parse_settings("3B:0.5"), RefineConfig{}, oracle_factory()), DomainError);
}

TEST_CASE("dice_non_decreasing") {
  SweepReport r;
  r.rows.resize(3);
  r.rows[0].dice_after_mean = 0.80;
  r.rows[1].dice_after_mean = 0.797;
  r.rows[2].dice_after_mean = 0.85;
  CHECK(dice_non_decreasing(r, 0.005));
  CHECK_FALSE(dice_non_decreasing(r, 0.001));
}
