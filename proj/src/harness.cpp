#include "uncerseg/harness.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <thread>

#include "uncerseg/metrics.hpp"
#include "uncerseg/random.hpp"
#include "uncerseg/raster_io.hpp"

namespace uncerseg {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---- manifests --------------------------------------------------------------

DatasetManifest parse_manifest(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const ordered_json::exception& e) {
    throw DatasetError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("entries") || !j["entries"].is_array()) {
    throw DatasetError("manifest needs an 'entries' array");
  }
  DatasetManifest m;
  m.modality = j.value("modality", std::string());
  std::set<std::string> seen;
  for (const auto& e : j["entries"]) {
    if (!e.is_object() || !e.contains("id") || !e.contains("image_path") || !e.contains("mask_path") ||
        !e["id"].is_string() || !e["image_path"].is_string() || !e["mask_path"].is_string()) {
      throw DatasetError("manifest entry needs string 'id', 'image_path' and 'mask_path'");
    }
    ManifestEntry entry{e["id"].get<std::string>(), e["image_path"].get<std::string>(),
                        e["mask_path"].get<std::string>()};
    if (!seen.insert(entry.id).second) throw DatasetError("duplicate entry id '" + entry.id + "'");
    m.entries.push_back(std::move(entry));
  }
  return m;
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"id", e.id}, {"image_path", e.image_path}, {"mask_path", e.mask_path}});
  }
  return ordered_json{{"modality", manifest.modality}, {"entries", entries}}.dump(2) + "\n";
}

Dataset load_dataset(const fs::path& manifest_path) {
  const Bytes raw = read_file(manifest_path);
  Dataset out;
  out.manifest = parse_manifest(std::string(raw.begin(), raw.end()));
  const fs::path base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };

  for (const auto& e : out.manifest.entries) {
    Sample s;
    s.id = e.id;
    try {
      s.image = read_gray8(resolve(e.image_path));
      s.mask = read_binary(resolve(e.mask_path));
    } catch (const IoError& err) {
      throw DatasetError("entry '" + e.id + "': " + err.what());
    }
    if (s.image.rows() != s.mask.rows() || s.image.cols() != s.mask.cols()) {
      throw DatasetError("entry '" + e.id + "': image and mask dimensions differ");
    }
    out.samples.push_back(std::move(s));
  }
  return out;
}

// ---- synthetic corpus -------------------------------------------------------

Sample synthetic_sample(std::uint64_t seed, std::size_t index, ImageSize dims) {
  if (dims.width < 8 || dims.height < 8) throw DomainError("synthetic images must be at least 8x8");
  Rng rng(seed, index);
  const double frame = static_cast<double>(dims.width) * dims.height;

  BinaryMask mask;
  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) throw GenerationFailed("synthetic blob generation did not converge");
    mask = BinaryMask::Zero(dims.height, dims.width);
    const int ellipses = 1 + static_cast<int>(rng.below(3));
    for (int k = 0, redraws = 0; k < ellipses; ++k) {
      const double area = rng.uniform(0.02, 0.20) * frame;
      const double aspect = rng.uniform(0.5, 2.0);
      const double a = std::sqrt(area / std::numbers::pi * aspect);  // x semi-axis
      const double b = area / (std::numbers::pi * a);                  // y semi-axis
      if (2 * a > dims.width - 2 || 2 * b > dims.height - 2) {
        if (++redraws > 1000) throw GenerationFailed("ellipse does not fit the frame");
        --k;
        continue;
      }
      const double cx = rng.uniform(a + 1, dims.width - a - 1);
      const double cy = rng.uniform(b + 1, dims.height - b - 1);
      for (int y = 0; y < dims.height; ++y) {
        for (int x = 0; x < dims.width; ++x) {
          const double dx = (x + 0.5 - cx) / a, dy = (y + 0.5 - cy) / b;
          if (dx * dx + dy * dy <= 1) mask(y, x) = 1;
        }
      }
    }
    const double fraction = static_cast<double>(count_foreground(mask)) / frame;
    if (fraction >= 0.02 && fraction <= 0.45) break;
  }

  // Bright blobs on a darker shaded background with mild noise.
  GrayImage image(dims.height, dims.width);
  const double tilt = rng.uniform(-20, 20);
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      const double base = mask(y, x) ? 165.0 : 60.0 + tilt * (static_cast<double>(x) / dims.width - 0.5);
      image(y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(base + 12.0 * rng.normal()), 0L, 255L));
    }
  }
  return {fmt::format("synth_{:04d}", index), std::move(image), std::move(mask)};
}

DatasetManifest gen_synthetic(const fs::path& out_dir, std::size_t count, std::uint64_t seed, ImageSize dims) {
  if (count < 1) throw DomainError("gen_synthetic: count must be >= 1");
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (!ec) fs::create_directories(out_dir / "masks", ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  DatasetManifest manifest;
  manifest.modality = "synthetic";
  for (std::size_t i = 0; i < count; ++i) {
    const Sample s = synthetic_sample(seed, i, dims);
    ManifestEntry e{s.id, "images/" + s.id + ".png", "masks/" + s.id + ".png"};
    write_gray8(out_dir / e.image_path, s.image);
    write_binary(out_dir / e.mask_path, s.mask);
    manifest.entries.push_back(std::move(e));
  }
  const std::string text = manifest_to_json(manifest);
  write_file(out_dir / "manifest.json", Bytes(text.begin(), text.end()));
  return manifest;
}

// ---- settings ---------------------------------------------------------------

std::string PromptSetting::base_label() const {
  const std::string boxes = fmt::format("{}B({:g})", n_boxes, ratio);
  return n_points > 0 ? fmt::format("{}P&{}", n_points, boxes) : boxes;
}

std::string PromptSetting::label() const {
  return k_points ? fmt::format("{}/k={}", base_label(), *k_points) : base_label();
}

namespace {

std::size_t parse_count(std::string_view s, std::string_view whole) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DomainError("bad setting '" + std::string(whole) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

PromptSetting parse_setting(std::string_view text) {
  const std::string_view whole = trim(text);
  std::string_view s = whole;
  const auto bad = [&] { return DomainError("bad setting '" + std::string(whole) + "' (expected e.g. 3B:0.5)"); };

  // Split off the ratio: "...:0.5" or "...(0.5)".
  std::string_view head, ratio_text;
  if (const auto colon = s.find(':'); colon != std::string_view::npos) {
    head = s.substr(0, colon);
    ratio_text = s.substr(colon + 1);
  } else if (const auto paren = s.find('('); paren != std::string_view::npos && s.back() == ')') {
    head = s.substr(0, paren);
    ratio_text = s.substr(paren + 1, s.size() - paren - 2);
  } else {
    throw bad();
  }

  PromptSetting out;
  out.n_points = 0;
  if (const auto amp = head.find('&'); amp != std::string_view::npos) {
    const std::string_view pts = head.substr(0, amp);
    if (pts.size() < 2 || pts.back() != 'P') throw bad();
    out.n_points = parse_count(pts.substr(0, pts.size() - 1), whole);
    head = head.substr(amp + 1);
  }
  if (head.size() < 2 || head.back() != 'B') throw bad();
  out.n_boxes = parse_count(head.substr(0, head.size() - 1), whole);
  if (out.n_boxes < 1) throw bad();

  const auto [ptr, ec] = std::from_chars(ratio_text.data(), ratio_text.data() + ratio_text.size(), out.ratio);
  if (ratio_text.empty() || ec != std::errc() || ptr != ratio_text.data() + ratio_text.size()) throw bad();
  if (!(out.ratio > 0 && out.ratio <= 1)) throw DomainError("setting ratio must be in (0, 1]");
  return out;
}

std::vector<PromptSetting> parse_settings(std::string_view text) {
  std::vector<PromptSetting> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto piece = text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
    if (!trim(piece).empty()) out.push_back(parse_setting(piece));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw DomainError("no settings given");
  return out;
}

// ---- evaluation -------------------------------------------------------------

BackendFactory oracle_factory(OracleParams params) {
  validate_oracle_params(params);
  return [params](const Sample& s) { return std::make_shared<OracleSegmenter>(s.mask, params); };
}

EvalRecord evaluate_sample(const Sample& sample, const PromptSetting& setting, const RefineConfig& cfg,
                           const Segmenter& backend) {
  const std::uint64_t entry_seed = derive_seed(derive_seed(cfg.seed, sample.id), setting.base_label());
  const ImageSize dims = size_of(sample.image);

  const BBox gt_box = tight_bbox(sample.mask);
  const BBox init = degraded_box(gt_box, setting.ratio, derive_seed(entry_seed, "initial-box"), dims);
  std::vector<PointPrompt> points;
  if (setting.n_points > 0) {
    points = sample_positive_points(sample.mask, setting.n_points, derive_seed(entry_seed, "initial-points"));
  }

  RefineConfig run_cfg = cfg;
  run_cfg.n_boxes = setting.n_boxes;
  if (setting.k_points) run_cfg.k_points = *setting.k_points;
  run_cfg.seed = derive_seed(entry_seed, "pipeline");

  const RefineResult r = refine_segmentation(sample.image, init, run_cfg, backend, points);
  const BinaryMask before = threshold_mask(r.initial.mean_mask, cfg.binarize_threshold);
  const BinaryMask after = threshold_mask(r.mask, cfg.binarize_threshold);

  EvalRecord rec;
  rec.id = sample.id;
  rec.setting = setting.label();
  rec.dice_before = dice(before, sample.mask);
  rec.iou_before = iou(before, sample.mask);
  rec.dice_after = dice(after, sample.mask);
  rec.iou_after = iou(after, sample.mask);
  rec.accepted = r.trace.final_round > 0;
  rec.u_before = r.trace.initial_scalar_u;
  rec.u_after = r.trace.final_scalar_u;
  if (rec.accepted && !(rec.u_after < rec.u_before)) {
    throw std::logic_error("accepted refinement did not reduce uncertainty");
  }
  if (rec.u_after > rec.u_before) throw std::logic_error("final uncertainty exceeds initial");
  return rec;
}

std::vector<EvalRecord> run_eval(const Dataset& dataset, const std::vector<PromptSetting>& settings,
                                 const RefineConfig& cfg, const BackendFactory& backend,
                                 const EvalOptions& options) {
  if (dataset.samples.empty()) throw DomainError("run_eval: dataset is empty");
  if (settings.empty()) throw DomainError("run_eval: no settings");
  validate_config(cfg);

  const std::size_t n_samples = dataset.samples.size();
  const std::size_t total = n_samples * settings.size();
  std::vector<EvalRecord> rows(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t job = next++; job < total; job = next++) {
      // Setting-major slots give the (setting, sample) order directly.
      const std::size_t si = job / n_samples;
      const Sample& sample = dataset.samples[job % n_samples];
      const auto start = std::chrono::steady_clock::now();
      EvalRecord rec;
      try {
        const auto seg = backend(sample);
        rec = evaluate_sample(sample, settings[si], cfg, *seg);
      } catch (const std::exception& e) {
        rec = EvalRecord{};
        rec.id = sample.id;
        rec.setting = settings[si].label();
        rec.error = e.what();
      }
      if (options.record_timing) {
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      }
      rows[job] = std::move(rec);
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  // Within a setting, order by id.
  for (std::size_t si = 0; si < settings.size(); ++si) {
    auto first = rows.begin() + static_cast<std::ptrdiff_t>(si * n_samples);
    std::stable_sort(first, first + static_cast<std::ptrdiff_t>(n_samples),
                     [](const EvalRecord& a, const EvalRecord& b) { return a.id < b.id; });
  }

  const auto failures = static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const EvalRecord& r) {
    return !r.ok();
  }));
  if (static_cast<double>(failures) > options.max_failure_rate * static_cast<double>(total)) {
    throw RunFailed(fmt::format("{} of {} evaluations failed", failures, total), std::move(rows));
  }
  return rows;
}

// ---- reporting --------------------------------------------------------------

const char* const kRecordCsvHeader = "id,setting,dice_before,iou_before,dice_after,iou_after,accepted,u_before,u_after,wall_ms";
const char* const kSummaryCsvHeader =
    "setting,count,failures,dice_before_mean,dice_before_std,iou_before_mean,iou_before_std,"
    "dice_after_mean,dice_after_std,iou_after_mean,iou_after_std,dice_gain_mean,acceptance_rate";

namespace {

struct MeanStd {
  double mean = 0;
  double std = 0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd out;
  if (v.empty()) return out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

SweepReport report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw DomainError("report: no records");
  std::vector<std::string> order;
  std::map<std::string, std::vector<const EvalRecord*>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace(r.setting);
    if (inserted) order.push_back(r.setting);
    it->second.push_back(&r);
  }

  SweepReport out;
  for (const auto& label : order) {
    SummaryRow row;
    row.setting = label;
    std::vector<double> db, ib, da, ia, gain;
    std::size_t accepted = 0;
    for (const EvalRecord* r : groups[label]) {
      if (!r->ok()) {
        ++row.failures;
        continue;
      }
      db.push_back(r->dice_before);
      ib.push_back(r->iou_before);
      da.push_back(r->dice_after);
      ia.push_back(r->iou_after);
      gain.push_back(r->dice_after - r->dice_before);
      accepted += r->accepted ? 1 : 0;
    }
    row.count = db.size();
    const MeanStd mdb = mean_std(db), mib = mean_std(ib), mda = mean_std(da), mia = mean_std(ia);
    row.dice_before_mean = mdb.mean;
    row.dice_before_std = mdb.std;
    row.iou_before_mean = mib.mean;
    row.iou_before_std = mib.std;
    row.dice_after_mean = mda.mean;
    row.dice_after_std = mda.std;
    row.iou_after_mean = mia.mean;
    row.iou_after_std = mia.std;
    row.dice_gain_mean = mean_std(gain).mean;
    row.acceptance_rate = row.count ? static_cast<double>(accepted) / static_cast<double>(row.count) : 0.0;
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::string out = std::string(kRecordCsvHeader) + "\n";
  for (const auto& r : records) {
    if (!r.ok()) {
      out += fmt::format("{},{},,,,,error,,,{:.3f}\n", csv_field(r.id), csv_field(r.setting), r.wall_ms);
      continue;
    }
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{},{:.6f},{:.6f},{:.3f}\n", csv_field(r.id),
                       csv_field(r.setting), r.dice_before, r.iou_before, r.dice_after, r.iou_after,
                       r.accepted ? "true" : "false", r.u_before, r.u_after, r.wall_ms);
  }
  return out;
}

std::string summary_to_csv(const SweepReport& report) {
  std::string out = std::string(kSummaryCsvHeader) + "\n";
  for (const auto& r : report.rows) {
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                       csv_field(r.setting), r.count, r.failures, r.dice_before_mean, r.dice_before_std,
                       r.iou_before_mean, r.iou_before_std, r.dice_after_mean, r.dice_after_std, r.iou_after_mean,
                       r.iou_after_std, r.dice_gain_mean, r.acceptance_rate);
  }
  return out;
}

std::string report_to_json(const std::vector<EvalRecord>& records, const SweepReport& report) {
  ordered_json recs = ordered_json::array();
  for (const auto& r : records) {
    ordered_json j{{"id", r.id}, {"setting", r.setting}};
    if (r.ok()) {
      j["dice_before"] = r.dice_before;
      j["iou_before"] = r.iou_before;
      j["dice_after"] = r.dice_after;
      j["iou_after"] = r.iou_after;
      j["accepted"] = r.accepted;
      j["u_before"] = r.u_before;
      j["u_after"] = r.u_after;
    } else {
      j["error"] = *r.error;
    }
    j["wall_ms"] = r.wall_ms;
    recs.push_back(std::move(j));
  }
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"setting", r.setting},
                    {"count", r.count},
                    {"failures", r.failures},
                    {"dice_before_mean", r.dice_before_mean},
                    {"dice_before_std", r.dice_before_std},
                    {"iou_before_mean", r.iou_before_mean},
                    {"iou_before_std", r.iou_before_std},
                    {"dice_after_mean", r.dice_after_mean},
                    {"dice_after_std", r.dice_after_std},
                    {"iou_after_mean", r.iou_after_mean},
                    {"iou_after_std", r.iou_after_std},
                    {"dice_gain_mean", r.dice_gain_mean},
                    {"acceptance_rate", r.acceptance_rate}});
  }
  return ordered_json{{"records", recs}, {"summary", rows}}.dump(2) + "\n";
}

std::string format_summary_table(const SweepReport& report) {
  std::string out = fmt::format("{:<20} {:>5} {:>5} {:>12} {:>12} {:>12} {:>12} {:>8} {:>7}\n", "setting", "n",
                                "fail", "dice before", "iou before", "dice after", "iou after", "gain", "accept");
  for (const auto& r : report.rows) {
    out += fmt::format("{:<20} {:>5} {:>5} {:>12.4f} {:>12.4f} {:>12.4f} {:>12.4f} {:>+8.4f} {:>7.2f}\n", r.setting,
                       r.count, r.failures, r.dice_before_mean, r.iou_before_mean, r.dice_after_mean,
                       r.iou_after_mean, r.dice_gain_mean, r.acceptance_rate);
  }
  return out;
}

bool dice_non_decreasing(const SweepReport& report, double tolerance) {
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    if (report.rows[i].dice_after_mean - report.rows[i - 1].dice_after_mean < -tolerance) return false;
  }
  return true;
}

}  // namespace uncerseg
