#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "fsa/bench.hpp"

namespace fsa {

/// Baseline vs fused summary for one (dataset, fanout, batch, width, dedup)
/// configuration. Every figure is the median across repeats of the
/// per-repeat values in the CSV.
struct SpeedupRow {
  std::string dataset;
  std::size_t k1 = 0, k2 = 0, batch = 0;
  int elem_bits = 32;
  bool dedup = false;
  std::size_t repeats_baseline = 0, repeats_fused = 0;
  double baseline_step_ms = 0, fused_step_ms = 0, step_speedup = 0;
  double baseline_pairs_per_s = 0, fused_pairs_per_s = 0, pairs_speedup = 0;
  double baseline_peak_bytes = 0, fused_peak_bytes = 0, mem_ratio = 0;
};

class IncompleteConfig : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Groups rows by configuration and reduces each side to medians first,
/// then forms speedup = baseline / fused step time, pairs speedup =
/// fused / baseline pairs/s and memory ratio = baseline / fused peak.
/// Output is sorted by (dataset, k1, k2, batch, elem_bits, dedup).
inline std::vector<SpeedupRow> report_speedups(const std::vector<BenchRecord>& rows) {
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::size_t, int, bool>;
  struct Side {
    std::vector<double> ms, pairs, peak;
  };
  std::map<Key, std::pair<Side, Side>> groups;  // baseline, fused
  for (const auto& r : rows) {
    auto& g = groups[Key{r.dataset, r.k1, r.k2, r.batch, r.elem_bits, r.dedup}];
    Side& s = r.variant == "fused" ? g.second : g.first;
    s.ms.push_back(r.step_ms_median);
    s.pairs.push_back(r.sampled_pairs_per_s);
    s.peak.push_back(static_cast<double>(r.peak_transient_bytes));
  }
  std::vector<SpeedupRow> out;
  for (const auto& [k, sides] : groups) {
    const auto& [base, fused] = sides;
    const auto& [ds, k1, k2, batch, bits, dedup] = k;
    if (base.ms.empty() || fused.ms.empty()) {
      throw IncompleteConfig("incomplete config: dataset=" + ds + " fanout=" + std::to_string(k1) + "-" +
                             std::to_string(k2) + " batch=" + std::to_string(batch) + " is missing " +
                             (base.ms.empty() ? "baseline" : "fused") + " rows");
    }
    SpeedupRow s;
    s.dataset = ds;
    s.k1 = k1;
    s.k2 = k2;
    s.batch = batch;
    s.elem_bits = bits;
    s.dedup = dedup;
    s.repeats_baseline = base.ms.size();
    s.repeats_fused = fused.ms.size();
    s.baseline_step_ms = median(base.ms);
    s.fused_step_ms = median(fused.ms);
    s.step_speedup = s.baseline_step_ms / s.fused_step_ms;
    s.baseline_pairs_per_s = median(base.pairs);
    s.fused_pairs_per_s = median(fused.pairs);
    s.pairs_speedup = s.fused_pairs_per_s / s.baseline_pairs_per_s;
    s.baseline_peak_bytes = median(base.peak);
    s.fused_peak_bytes = median(fused.peak);
    s.mem_ratio = s.baseline_peak_bytes / s.fused_peak_bytes;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<SpeedupRow> report_speedups(const std::string& csv_path) {
  return report_speedups(read_bench_csv(csv_path));
}

/// Console table, arrows reading baseline -> fused.
inline void print_speedup_table(const std::vector<SpeedupRow>& rows, std::ostream& os) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-44s %-7s %6s %4s %-22s %8s %-28s %8s %-22s %8s\n", "dataset", "fanout", "batch",
                "bits", "step ms (base -> fsa)", "speedup", "pairs/s (base -> fsa)", "speedup", "peak MB (base -> fsa)",
                "ratio");
  os << buf;
  for (const auto& r : rows) {
    const std::string fan = std::to_string(r.k1) + "-" + std::to_string(r.k2);
    const std::string ds = r.dedup ? r.dataset + " [dedup]" : r.dataset;
    char step[64], pairs[80], mem[64];
    std::snprintf(step, sizeof step, "%.2f → %.2f", r.baseline_step_ms, r.fused_step_ms);
    std::snprintf(pairs, sizeof pairs, "%.0f → %.0f", r.baseline_pairs_per_s, r.fused_pairs_per_s);
    std::snprintf(mem, sizeof mem, "%.1f → %.1f", r.baseline_peak_bytes / 1e6, r.fused_peak_bytes / 1e6);
    // The arrow is 3 bytes but one column wide; pad by hand.
    auto pad = [](std::string s, std::size_t w) {
      const std::size_t cols = s.size() - 2;
      if (cols < w) s.append(w - cols, ' ');
      return s;
    };
    std::snprintf(buf, sizeof buf, "%-44s %-7s %6zu %4d %s %8.2f %s %8.2f %s %8.2f\n", ds.c_str(), fan.c_str(),
                  r.batch, r.elem_bits, pad(step, 22).c_str(), r.step_speedup, pad(pairs, 28).c_str(),
                  r.pairs_speedup, pad(mem, 22).c_str(), r.mem_ratio);
    os << buf;
  }
}

inline const std::vector<std::string>& summary_csv_columns() {
  static const std::vector<std::string> cols{
      "dataset",          "k1",
      "k2",               "batch",
      "elem_bits",        "dedup",
      "repeats",          "baseline_step_ms",
      "fused_step_ms",    "step_speedup",
      "baseline_pairs_per_s", "fused_pairs_per_s",
      "pairs_speedup",    "baseline_peak_bytes",
      "fused_peak_bytes", "mem_ratio"};
  return cols;
}

/// Machine-readable summary (consumed by the plotting tool).
inline void write_summary_csv(const std::vector<SpeedupRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write summary: " + path);
  out << csv::join(summary_csv_columns()) << '\n';
  auto g = [](double v) { return detail::fmt_double(v, "%.17g"); };
  for (const auto& r : rows) {
    out << csv::join({r.dataset, std::to_string(r.k1), std::to_string(r.k2), std::to_string(r.batch),
                      std::to_string(r.elem_bits), r.dedup ? "1" : "0",
                      std::to_string(std::min(r.repeats_baseline, r.repeats_fused)), g(r.baseline_step_ms),
                      g(r.fused_step_ms), g(r.step_speedup), g(r.baseline_pairs_per_s), g(r.fused_pairs_per_s),
                      g(r.pairs_speedup), g(r.baseline_peak_bytes), g(r.fused_peak_bytes), g(r.mem_ratio)})
        << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace fsa
