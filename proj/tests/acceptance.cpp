// End-to-end acceptance run on the synthetic oracle corpus (100 images,
// 128x128, seed 7). Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <fmt/core.h>

#include "uncerseg/harness.hpp"
#include "uncerseg/metrics.hpp"
#include "uncerseg/raster_io.hpp"
#include "uncerseg/ugpa.hpp"

using namespace uncerseg;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kCorpusSeed = 7;
constexpr std::size_t kCorpusSize = 100;
constexpr ImageSize kDims{128, 128};

int failures = 0;

void report_line(bool ok, const std::string& name, const std::string& detail) {
  fmt::print("{}  {:<28} {}\n", ok ? "PASS" : "FAIL", name, detail);
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs one criterion; an escaped exception counts as a failure.
void criterion(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [ok, detail] = body();
    report_line(ok, name, detail);
  } catch (const std::exception& e) {
    report_line(false, name, fmt::format("exception: {}", e.what()));
  }
}

Dataset corpus() {
  Dataset d;
  for (std::size_t i = 0; i < kCorpusSize; ++i) d.samples.push_back(synthetic_sample(kCorpusSeed, i, kDims));
  return d;
}

double mean_gain(const SummaryRow& r) { return r.dice_after_mean - r.dice_before_mean; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UNCERSEG_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// Brute-force references, kept separate from the library code paths.

std::vector<PointPrompt> sorted_greedy_top_k(const UncertaintyMap& u, std::size_t k, int min_sep) {
  std::vector<int> order(static_cast<std::size_t>(u.size()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return u.data()[a] != u.data()[b] ? u.data()[a] > u.data()[b] : a < b;
  });
  const int w = static_cast<int>(u.cols());
  std::vector<PointPrompt> out;
  for (int idx : order) {
    if (out.size() == k) break;
    const int y = idx / w, x = idx % w;
    bool far = true;
    for (const auto& p : out) {
      const int py = static_cast<int>(p.y), px = static_cast<int>(p.x);
      if (std::max(std::abs(py - y), std::abs(px - x)) < min_sep) far = false;
    }
    if (far) out.push_back({x + 0.5, y + 0.5, PointLabel::positive});
  }
  return out;
}

BBox scanned_edge_box(const BinaryMask& r) {
  const int h = static_cast<int>(r.rows()), w = static_cast<int>(r.cols());
  auto in = [&](int y, int x) { return y >= 0 && x >= 0 && y < h && x < w && r(y, x) != 0; };
  double x0 = 1e18, y0 = 1e18, x1 = -1, y1 = -1;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (in(y, x) && !(in(y - 1, x) && in(y + 1, x) && in(y, x - 1) && in(y, x + 1))) {
        x0 = std::min<double>(x0, x);
        y0 = std::min<double>(y0, y);
        x1 = std::max<double>(x1, x + 1);
        y1 = std::max<double>(y1, y + 1);
      }
  return {x0, y0, x1, y1};
}

}  // namespace

int main() {
  std::vector<EvalRecord> all_records;
  std::vector<SweepReport> all_reports;
  auto keep = [&](const std::vector<EvalRecord>& recs) {
    all_records.insert(all_records.end(), recs.begin(), recs.end());
    all_reports.push_back(report(recs));
    return all_reports.back();
  };

  RefineConfig cfg;  // N = 3, k_points = 10
  EvalOptions opts;

  criterion("directional gain 3B(0.5)", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset d = corpus();
    const SweepReport rep = keep(run_eval(d, parse_settings("3B:0.5"), cfg, oracle_factory(), opts));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const SummaryRow& r = rep.rows.at(0);
    const double gain = mean_gain(r);
    return std::pair{r.count == kCorpusSize && gain >= 0.10 && secs < 60.0,
                     fmt::format("dice {:.4f} -> {:.4f} (gain {:+.4f}, need >= 0.10), {:.1f} s (need < 60)",
                                 r.dice_before_mean, r.dice_after_mean, gain, secs)};
  });

  criterion("quality gradient", [&] {
    const SweepReport rep = keep(run_eval(corpus(), parse_settings("3B:0.5,3B:0.75,3B:1.0"), cfg, oracle_factory(), opts));
    const double g05 = mean_gain(rep.rows.at(0)), g075 = mean_gain(rep.rows.at(1)), g1 = mean_gain(rep.rows.at(2));
    return std::pair{g05 > g075 && g075 > g1 && std::abs(g1) <= 0.01,
                     fmt::format("gain {:+.4f} > {:+.4f} > {:+.4f}, |gain at 1.0| <= 0.01", g05, g075, g1)};
  });

  criterion("refined-point ladder", [&] {
    std::vector<PromptSetting> ladder;
    for (std::size_t k : {0u, 3u, 10u}) {
      PromptSetting s = parse_setting("3B:0.5");
      s.k_points = k;
      ladder.push_back(s);
    }
    const SweepReport rep = keep(run_eval(corpus(), ladder, cfg, oracle_factory(), opts));
    const bool ok = dice_non_decreasing(rep, 0.005);
    return std::pair{ok, fmt::format("dice k=0 {:.4f}, k=3 {:.4f}, k=10 {:.4f} (steps >= -0.005)",
                                     rep.rows.at(0).dice_after_mean, rep.rows.at(1).dice_after_mean,
                                     rep.rows.at(2).dice_after_mean)};
  });

  criterion("uncertainty monotonicity", [&] {
    std::size_t bad = 0, accepted = 0;
    for (const auto& r : all_records) {
      if (!r.ok()) {
        ++bad;
        continue;
      }
      accepted += r.accepted;
      if (r.accepted && !(r.u_after < r.u_before)) ++bad;
      if (r.u_after > r.u_before) ++bad;
    }
    return std::pair{bad == 0 && !all_records.empty(),
                     fmt::format("{} records, {} accepted, {} violations", all_records.size(), accepted, bad)};
  });

  criterion("entropy identities", [&] {
    bool ok = std::abs(binary_entropy(0.5) - 1.0) <= 1e-12 && binary_entropy(0.0) == 0.0 &&
              binary_entropy(1.0) == 0.0;
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProbMask m(25, 40);  // 1,000 pixels
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
    const UncertaintyMap h = entropy_map(m);
    double worst = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double p = m.data()[i];
      const double ref = -(p * std::log2(p) + (1 - p) * std::log2(1 - p));
      worst = std::max(worst, std::abs(h.data()[i] - ref));
      worst = std::max(worst, std::abs(binary_entropy(p) - binary_entropy(1 - p)));
    }
    ok = ok && worst <= 1e-12;
    return std::pair{ok, fmt::format("1000 pixels, max deviation {:.2e}", worst)};
  });

  criterion("metric oracle", [&] {
    std::mt19937_64 gen(2);
    std::bernoulli_distribution coin(0.4);
    std::size_t mismatches = 0;
    double worst = 0;
    for (int t = 0; t < 1000; ++t) {
      BinaryMask a(16, 16), b(16, 16);
      long inter = 0, pa = 0, pb = 0, uni = 0;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = coin(gen);
        b.data()[i] = coin(gen);
        inter += a.data()[i] && b.data()[i];
        uni += a.data()[i] || b.data()[i];
        pa += a.data()[i];
        pb += b.data()[i];
      }
      const double d_ref = (pa + pb) == 0 ? 1.0 : 2.0 * inter / static_cast<double>(pa + pb);
      const double j_ref = uni == 0 ? 1.0 : inter / static_cast<double>(uni);
      const double d = dice(a, b), j = iou(a, b);
      if (d != d_ref || j != j_ref) ++mismatches;
      worst = std::max(worst, std::abs(d - 2 * j / (1 + j)));
    }
    std::size_t order_violations = 0;
    for (const auto& r : all_records)
      if (r.ok() && (r.dice_before < r.iou_before || r.dice_after < r.iou_after)) ++order_violations;
    for (const auto& rep : all_reports)
      for (const auto& row : rep.rows)
        if (row.dice_before_mean < row.iou_before_mean || row.dice_after_mean < row.iou_after_mean) ++order_violations;
    return std::pair{mismatches == 0 && worst <= 1e-12 && order_violations == 0,
                     fmt::format("1000 pairs, {} mismatches, identity error {:.2e}, {} dice<iou", mismatches, worst,
                                 order_violations)};
  });

  criterion("top-k and edge box", [&] {
    std::mt19937_64 gen(3);
    std::uniform_int_distribution<int> dim(4, 40), sep(1, 6), kk(0, 15);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::size_t bad = 0;
    for (int t = 0; t < 200; ++t) {
      UncertaintyMap m(dim(gen), dim(gen));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t % 2 ? std::round(u(gen) * 5) / 5 : u(gen);
      const std::size_t k = static_cast<std::size_t>(kk(gen));
      const int d = sep(gen);
      if (top_k_points(m, k, d) != sorted_greedy_top_k(m, k, d)) ++bad;
      const BinaryMask region = uncertainty_region(m, 0.5);
      if (count_foreground(region) > 0 && !(edge_bbox(region) == scanned_edge_box(region))) ++bad;
    }
    return std::pair{bad == 0, fmt::format("200 maps, {} mismatches", bad)};
  });

  criterion("degraded box tolerance", [&] {
    double worst = 0;
    for (double target : {0.5, 0.75}) {
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Sample s = synthetic_sample(kCorpusSeed, seed, kDims);
        const BBox gt = tight_bbox(s.mask);
        worst = std::max(worst, std::abs(box_iou(degraded_box(gt, target, seed, kDims), gt) - target));
      }
    }
    return std::pair{worst <= 0.02, fmt::format("targets 0.5/0.75 x 100 seeds, max |IoU - target| {:.4f}", worst)};
  });

  criterion("cli eval determinism", [&] {
    const fs::path dir = fs::temp_directory_path() / "uncerseg_acceptance";
    fs::remove_all(dir);
    const std::string manifest = (dir / "data" / "manifest.json").string();
    const std::string common = "eval --manifest " + manifest + " --settings '3B:0.5,3P&3B:0.75' --seed 7 --out ";
    const bool ran = run_cli("gen --count 100 --seed 7 --dims 128x128 --out " + (dir / "data").string()) == 0 &&
                     run_cli(common + (dir / "a").string() + " --threads 1") == 0 &&
                     run_cli(common + (dir / "b").string()) == 0;
    const std::string a = ran ? slurp(dir / "a" / "records.csv") : "";
    const std::string b = ran ? slurp(dir / "b" / "records.csv") : "";
    const bool same = ran && !a.empty() && a == b &&
                      slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv");
    fs::remove_all(dir);
    return std::pair{same, fmt::format("records.csv {} bytes, identical across runs: {}", a.size(), same)};
  });

  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
