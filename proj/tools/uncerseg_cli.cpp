// uncerseg: uncertainty-guided prompt refinement from the command line.
//
//   uncerseg refine --image img.png --gt gt.png --box 10,10,50,50 --out-dir out/
//   uncerseg gen    --count 100 --seed 7 --dims 128x128 --out-dir corpus/
//   uncerseg eval   --manifest corpus/manifest.json --settings 3B:0.5,3B:0.75 --out report/
//   uncerseg sweep  --manifest corpus/manifest.json --settings 3B:0.5 --k-list 0,3,5,10 --out sweep/
//
// Exit codes: 0 ok, 2 usage, 3 backend, 4 I/O. Logs go to stderr.

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "uncerseg/harness.hpp"
#include "uncerseg/metrics.hpp"
#include "uncerseg/raster_io.hpp"
#include "uncerseg/segmenter.hpp"
#include "uncerseg/trace.hpp"
#include "uncerseg/ugpa.hpp"

namespace fs = std::filesystem;
using namespace uncerseg;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitBackend = 3;
constexpr int kExitIo = 4;

// Thrown for bad flag values discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendFlags {
  std::string kind = "oracle";
  std::string endpoint;
  int timeout_ms = 30000;
  int retries = 3;
};

void add_backend_flags(CLI::App& cmd, BackendFlags& b) {
  cmd.add_option("--backend", b.kind, "Segmenter backend")->check(CLI::IsMember({"oracle", "remote"}));
  cmd.add_option("--endpoint", b.endpoint, "Remote backend URL (default: $UNCERSEG_ENDPOINT)");
  cmd.add_option("--timeout-ms", b.timeout_ms, "Remote request timeout")->check(CLI::PositiveNumber);
  cmd.add_option("--retries", b.retries, "Remote retries on transport failure")->check(CLI::NonNegativeNumber);
}

void add_config_flags(CLI::App& cmd, RefineConfig& cfg) {
  cmd.add_option("--n", cfg.n_boxes, "Boxes per aggregate")->check(CLI::PositiveNumber);
  cmd.add_option("--sigma-frac", cfg.sigma_frac, "Box jitter as a fraction of side length")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--points-k", cfg.k_points, "Refined points taken from the uncertainty map");
  cmd.add_option("--tau", cfg.tau, "Uncertainty region threshold (fraction of the map maximum)")
      ->check(CLI::Range(0.0, 1.0));
  cmd.add_option("--min-sep", cfg.min_point_separation, "Minimum Chebyshev spacing of refined points")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--rounds", cfg.rounds, "Refinement rounds")->check(CLI::PositiveNumber);
  cmd.add_option("--threshold", cfg.binarize_threshold, "Binarization threshold for metrics")
      ->check(CLI::Range(0.0, 1.0));
  cmd.add_option("--seed", cfg.seed, "Global seed");
}

std::string resolve_endpoint(const BackendFlags& b) {
  if (!b.endpoint.empty()) return b.endpoint;
  if (const char* env = std::getenv("UNCERSEG_ENDPOINT"); env && *env) return env;
  throw UsageError("--backend remote needs --endpoint or UNCERSEG_ENDPOINT");
}

std::shared_ptr<const RemoteSegmenter> make_remote(const BackendFlags& b) {
  RemoteOptions opts;
  opts.timeout = std::chrono::milliseconds(b.timeout_ms);
  opts.retries = b.retries;
  try {
    return std::make_shared<RemoteSegmenter>(resolve_endpoint(b), opts);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--endpoint: ") + e.what());
  }
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) { write_file(path, Bytes(text.begin(), text.end())); }

// ---- refine -----------------------------------------------------------------

struct RefineArgs {
  std::string image;
  std::string gt;
  std::string box;
  std::string out_dir;
  BackendFlags backend;
  RefineConfig cfg;
};

int cmd_refine(const RefineArgs& a) {
  BBox box;
  try {
    box = parse_box(a.box);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--box: ") + e.what());
  }
  try {
    validate_config(a.cfg);
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  const GrayImage image = read_gray8(a.image);
  std::optional<BinaryMask> gt;
  if (!a.gt.empty()) gt = read_binary(a.gt);
  if (gt && (gt->rows() != image.rows() || gt->cols() != image.cols())) {
    throw UsageError("--gt dimensions differ from --image");
  }
  try {
    validate_box(box, size_of(image));
  } catch (const DomainError& e) {
    throw UsageError(std::string("--box: ") + e.what());
  }

  std::shared_ptr<const Segmenter> backend;
  if (a.backend.kind == "oracle") {
    if (!gt) throw UsageError("--backend oracle requires --gt");
    backend = std::make_shared<OracleSegmenter>(*gt);
  } else {
    backend = make_remote(a.backend);
  }

  const RefineResult r = refine_segmentation(image, box, a.cfg, *backend);

  const fs::path out(a.out_dir);
  ensure_dir(out);
  const std::map<std::string, std::string> artifacts{{"final_mask", "final_mask.png"},
                                                     {"initial_uncertainty", "uncertainty_initial.png"},
                                                     {"final_uncertainty", "uncertainty_final.png"}};
  const BinaryMask final_mask = threshold_mask(r.mask, a.cfg.binarize_threshold);
  write_binary(out / "final_mask.png", final_mask);
  write_prob(out / "uncertainty_initial.png", r.initial.uncertainty);
  write_prob(out / "uncertainty_final.png", r.uncertainty);
  write_text(out / "trace.json", trace_to_json(r.trace, artifacts));

  const bool accepted = r.trace.final_round > 0;
  std::cerr << fmt::format("refinement {}; mean entropy {:.6f} -> {:.6f}\n", accepted ? "accepted" : "kept initial",
                           r.trace.initial_scalar_u, r.trace.final_scalar_u);
  if (gt) {
    const BinaryMask before = threshold_mask(r.initial.mean_mask, a.cfg.binarize_threshold);
    std::cout << fmt::format("dice_before={:.6f} iou_before={:.6f} dice_after={:.6f} iou_after={:.6f}\n",
                             dice(before, *gt), iou(before, *gt), dice(final_mask, *gt), iou(final_mask, *gt));
  }
  return kExitOk;
}

// ---- eval / sweep -----------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string settings = "3B:0.5";
  std::string k_list = "0,3,5,10";
  std::string out;
  unsigned threads = 0;
  bool timing = false;
  BackendFlags backend;
  RefineConfig cfg;
};

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw UsageError("--k-list: '" + item + "' is not a non-negative integer");
    }
  }
  if (out.empty()) throw UsageError("--k-list is empty");
  return out;
}

int run_batch(const EvalArgs& a, bool sweep) {
  std::vector<PromptSetting> settings;
  try {
    settings = parse_settings(a.settings);
    validate_config(a.cfg);
  } catch (const DomainError& e) {
    throw UsageError(std::string("--settings: ") + e.what());
  }
  if (sweep) {
    std::vector<PromptSetting> expanded;
    const auto ks = parse_k_list(a.k_list);
    for (const auto& s : settings) {
      for (std::size_t k : ks) {
        PromptSetting e = s;
        e.k_points = k;
        expanded.push_back(e);
      }
    }
    settings = std::move(expanded);
  }

  const Dataset dataset = load_dataset(a.manifest);
  if (dataset.samples.empty()) throw UsageError("manifest has no entries");

  BackendFactory factory;
  if (a.backend.kind == "oracle") {
    factory = oracle_factory();
  } else {
    auto remote = make_remote(a.backend);
    factory = [remote](const Sample&) { return remote; };
  }

  EvalOptions opts;
  opts.threads = a.threads;
  opts.record_timing = a.timing;

  std::vector<EvalRecord> records;
  int code = kExitOk;
  try {
    records = run_eval(dataset, settings, a.cfg, factory, opts);
  } catch (const RunFailed& e) {
    std::cerr << "error: " << e.what() << "\n";
    records = e.records();
    code = kExitBackend;
  }
  for (const auto& r : records) {
    if (!r.ok()) std::cerr << fmt::format("row {} / {} failed: {}\n", r.id, r.setting, *r.error);
  }

  const SweepReport rep = report(records);
  const fs::path out(a.out);
  ensure_dir(out);
  write_text(out / "records.csv", records_to_csv(records));
  write_text(out / "summary.csv", summary_to_csv(rep));
  write_text(out / "report.json", report_to_json(records, rep));

  std::cout << format_summary_table(rep);
  if (sweep) {
    // Trend within each base setting, across the k ladder.
    const std::size_t per = parse_k_list(a.k_list).size();
    for (std::size_t i = 0; i + per <= rep.rows.size(); i += per) {
      SweepReport group;
      group.rows.assign(rep.rows.begin() + static_cast<std::ptrdiff_t>(i),
                        rep.rows.begin() + static_cast<std::ptrdiff_t>(i + per));
      std::cout << fmt::format("trend {}: mean Dice {} over k\n", settings[i].base_label(),
                               dice_non_decreasing(group, 0.005) ? "non-decreasing" : "NOT non-decreasing");
    }
  }
  return code;
}

// ---- gen --------------------------------------------------------------------

struct GenArgs {
  std::size_t count = 100;
  std::uint64_t seed = 7;
  std::string dims = "128x128";
  std::string out_dir;
};

int cmd_gen(const GenArgs& a) {
  ImageSize dims;
  if (std::sscanf(a.dims.c_str(), "%dx%d", &dims.width, &dims.height) != 2 || dims.width < 8 || dims.height < 8) {
    throw UsageError("--dims must look like 128x128 (each side >= 8)");
  }
  if (a.count < 1) throw UsageError("--count must be >= 1");
  gen_synthetic(a.out_dir, a.count, a.seed, dims);
  std::cout << (fs::path(a.out_dir) / "manifest.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-guided prompt refinement for promptable segmenters"};
  app.require_subcommand(1);

  RefineArgs refine;
  auto* c_refine = app.add_subcommand("refine", "Refine one image from an initial box");
  c_refine->add_option("--image", refine.image, "8-bit grayscale PNG")->required();
  c_refine->add_option("--gt", refine.gt, "Ground-truth mask PNG (required by the oracle backend)");
  c_refine->add_option("--box", refine.box, "Initial box x_min,y_min,x_max,y_max")->required();
  c_refine->add_option("--out-dir,--out", refine.out_dir, "Artifact directory")->required();
  add_backend_flags(*c_refine, refine.backend);
  add_config_flags(*c_refine, refine.cfg);

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a dataset under prompt settings");
  EvalArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Evaluate settings across a ladder of refined point counts");
  for (auto [cmd, args] : {std::pair{c_eval, &eval}, std::pair{c_sweep, &sweep}}) {
    cmd->add_option("--manifest", args->manifest, "Dataset manifest JSON")->required();
    cmd->add_option("--settings", args->settings, "Comma-separated settings, e.g. 3B:0.5,3P&3B:0.75");
    cmd->add_option("--out,--out-dir", args->out, "Report directory")->required();
    cmd->add_option("--threads", args->threads, "Worker threads (0 = all cores)");
    cmd->add_flag("--timing", args->timing, "Record wall time per row (reports stop being byte-reproducible)");
    add_backend_flags(*cmd, args->backend);
    add_config_flags(*cmd, args->cfg);
  }
  c_sweep->add_option("--k-list", sweep.k_list, "Refined point counts to sweep");

  GenArgs gen;
  auto* c_gen = app.add_subcommand("gen", "Write a synthetic dataset");
  c_gen->add_option("--count", gen.count, "Number of samples");
  c_gen->add_option("--seed", gen.seed, "Seed");
  c_gen->add_option("--dims", gen.dims, "WIDTHxHEIGHT");
  c_gen->add_option("--out-dir,--out", gen.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_refine) return cmd_refine(refine);
    if (*c_eval) return run_batch(eval, false);
    if (*c_sweep) return run_batch(sweep, true);
    if (*c_gen) return cmd_gen(gen);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SegmenterError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
