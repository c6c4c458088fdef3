#pragma once

// Datasets, batch evaluation and report emission.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "uncerseg/errors.hpp"
#include "uncerseg/raster.hpp"
#include "uncerseg/segmenter.hpp"
#include "uncerseg/ugpa.hpp"

namespace uncerseg {

class DatasetError : public IoError {
 public:
  using IoError::IoError;
};

struct ManifestEntry {
  std::string id;
  std::string image_path;  // relative paths resolve against the manifest's directory
  std::string mask_path;
};

struct DatasetManifest {
  std::string modality;
  std::vector<ManifestEntry> entries;
};

struct Sample {
  std::string id;
  GrayImage image;
  BinaryMask mask;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;
};

DatasetManifest parse_manifest(const std::string& json_text);
std::string manifest_to_json(const DatasetManifest& manifest);

/// Reads and validates every entry; masks are binarized (nonzero -> 1).
/// Errors name the offending entry.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes `count` image/mask pairs of ellipse-union blobs plus
/// manifest.json under `out_dir`. Bit-identical for a given seed.
DatasetManifest gen_synthetic(const std::filesystem::path& out_dir, std::size_t count, std::uint64_t seed,
                              ImageSize dims);

/// The blob mask and image for one synthetic sample.
Sample synthetic_sample(std::uint64_t seed, std::size_t index, ImageSize dims);

/// How the initial prompts are fabricated from ground truth.
struct PromptSetting {
  std::size_t n_boxes = 3;
  std::size_t n_points = 0;  // initial user points sampled from GT
  double ratio = 0.5;        // target IoU of the initial box against the GT box
  std::optional<std::size_t> k_points;  // overrides RefineConfig::k_points

  /// "3B(0.5)", "3P&3B(0.75)", with "/k=10" when k_points is set.
  std::string label() const;
  /// Label without the k suffix; seeds derive from this so k sweeps stay paired.
  std::string base_label() const;
};

/// Parses "3B:0.5", "3P&3B:0.75" or the label form "3B(0.5)".
PromptSetting parse_setting(std::string_view text);
std::vector<PromptSetting> parse_settings(std::string_view comma_separated);

struct EvalRecord {
  std::string id;
  std::string setting;
  double dice_before = 0;
  double iou_before = 0;
  double dice_after = 0;
  double iou_after = 0;
  bool accepted = false;
  double u_before = 0;
  double u_after = 0;
  double wall_ms = 0;
  std::optional<std::string> error;  // set for rows that failed

  bool ok() const { return !error.has_value(); }
};

using BackendFactory = std::function<std::shared_ptr<const Segmenter>(const Sample&)>;

/// Factory giving each sample an oracle built from its own mask.
BackendFactory oracle_factory(OracleParams params = {});

struct EvalOptions {
  unsigned threads = 0;  // 0 = hardware concurrency
  bool record_timing = false;  // off keeps reports byte-reproducible
  double max_failure_rate = 0.10;
};

/// More than the allowed fraction of rows failed. Carries the rows.
class RunFailed : public std::runtime_error {
 public:
  RunFailed(const std::string& what, std::vector<EvalRecord> records)
      : std::runtime_error(what), records_(std::move(records)) {}
  const std::vector<EvalRecord>& records() const { return records_; }

 private:
  std::vector<EvalRecord> records_;
};

/// Evaluates every sample under every setting. Rows come back ordered by
/// (setting position, id) whatever the execution order.
std::vector<EvalRecord> run_eval(const Dataset& dataset, const std::vector<PromptSetting>& settings,
                                 const RefineConfig& cfg, const BackendFactory& backend,
                                 const EvalOptions& options = {});

/// One sample under one setting.
EvalRecord evaluate_sample(const Sample& sample, const PromptSetting& setting, const RefineConfig& cfg,
                           const Segmenter& backend);

struct SummaryRow {
  std::string setting;
  std::size_t count = 0;  // successful rows
  std::size_t failures = 0;
  double dice_before_mean = 0, dice_before_std = 0;
  double iou_before_mean = 0, iou_before_std = 0;
  double dice_after_mean = 0, dice_after_std = 0;
  double iou_after_mean = 0, iou_after_std = 0;
  double dice_gain_mean = 0;
  double acceptance_rate = 0;
};

struct SweepReport {
  std::vector<SummaryRow> rows;  // in order of first appearance
};

/// Per-setting aggregates; std is the sample standard deviation (0 for one row).
SweepReport report(const std::vector<EvalRecord>& records);

extern const char* const kRecordCsvHeader;
extern const char* const kSummaryCsvHeader;

std::string records_to_csv(const std::vector<EvalRecord>& records);
std::string summary_to_csv(const SweepReport& report);
std::string report_to_json(const std::vector<EvalRecord>& records, const SweepReport& report);
/// Human-readable table for terminals.
std::string format_summary_table(const SweepReport& report);

/// True iff each row's mean Dice after refinement is no more than
/// `tolerance` below the previous row's.
bool dice_non_decreasing(const SweepReport& report, double tolerance);

}  // namespace uncerseg
