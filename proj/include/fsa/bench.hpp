#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <optional>
#include <set>
#include <stdexcept>
#include <type_traits>
#include <string>
#include <vector>

#include "fsa/csv.hpp"
#include "fsa/dataset.hpp"
#include "fsa/train.hpp"

namespace fsa {

/// One benchmark configuration; each base seed is one repeat.
struct BenchConfig {
  std::string dataset;
  Variant variant = Variant::Fused;
  std::size_t k1 = 15;
  std::size_t k2 = 10;
  std::size_t batch = 1024;
  std::vector<std::uint64_t> base_seeds{42, 43, 44};
  std::size_t steps = 30;
  std::size_t warmup = 5;
  int elem_bits = 32;
  bool dedup = false;
  std::size_t d_feat = 256;
  std::size_t hidden = 256;
  std::size_t classes = 16;

  void validate() const {
    detail::require(steps >= 1, "bench: steps must be >= 1");
    detail::require(batch >= 1, "bench: batch must be >= 1");
    detail::require(k1 >= 1, "bench: k1 must be >= 1");
    detail::require(elem_bits == 32 || elem_bits == 64, "bench: elem_bits must be 32 or 64");
    detail::require(!base_seeds.empty(), "bench: need at least one base seed");
    detail::require(d_feat >= 1 && hidden >= 1 && classes >= 1, "bench: d_feat, hidden, classes must be >= 1");
  }
};

/// One CSV row: a configuration, one repeat, and its measurements.
struct BenchRecord {
  std::string dataset;
  std::string variant;
  std::size_t k1 = 0, k2 = 0, batch = 0, repeat = 0;
  std::uint64_t base_seed = 0;
  std::size_t steps = 0, warmup = 0;
  int elem_bits = 32;
  bool dedup = false;
  std::size_t d_feat = 0, hidden = 0, classes = 0;
  double step_ms_median = 0, step_ms_p10 = 0, step_ms_p90 = 0;
  double sampled_pairs_per_s = 0;
  std::uint64_t peak_transient_bytes = 0;
  std::string timestamp;
  // Not serialized: total sampled pairs over the timed steps.
  std::uint64_t timed_sampled_pairs = 0;

  /// Identity of the row for idempotent re-runs (everything but measurements).
  std::string key() const {
    return csv::join({dataset, variant, std::to_string(k1), std::to_string(k2), std::to_string(batch),
                      std::to_string(repeat), std::to_string(base_seed), std::to_string(steps), std::to_string(warmup),
                      std::to_string(elem_bits), dedup ? "1" : "0", std::to_string(d_feat), std::to_string(hidden),
                      std::to_string(classes)});
  }
};

inline const std::vector<std::string>& bench_csv_columns() {
  static const std::vector<std::string> cols{
      "dataset",       "variant",     "k1",          "k2",
      "batch",         "repeat",      "base_seed",   "steps",
      "warmup",        "elem_bits",   "dedup",       "d_feat",
      "hidden",        "classes",     "step_ms_median", "step_ms_p10",
      "step_ms_p90",   "sampled_pairs_per_s", "peak_transient_bytes", "timestamp_iso8601"};
  return cols;
}

inline std::string bench_csv_header() { return csv::join(bench_csv_columns()); }

namespace detail {
inline std::string fmt_double(double v, const char* f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
}  // namespace detail

inline std::string to_csv_row(const BenchRecord& r) {
  return csv::join({r.dataset, r.variant, std::to_string(r.k1), std::to_string(r.k2), std::to_string(r.batch),
                    std::to_string(r.repeat), std::to_string(r.base_seed), std::to_string(r.steps),
                    std::to_string(r.warmup), std::to_string(r.elem_bits), r.dedup ? "1" : "0",
                    std::to_string(r.d_feat), std::to_string(r.hidden), std::to_string(r.classes),
                    detail::fmt_double(r.step_ms_median, "%.6f"), detail::fmt_double(r.step_ms_p10, "%.6f"),
                    detail::fmt_double(r.step_ms_p90, "%.6f"), detail::fmt_double(r.sampled_pairs_per_s, "%.3f"),
                    std::to_string(r.peak_transient_bytes), r.timestamp});
}

namespace detail {

template <class V>
V parse_field(const std::string& s, const char* name, std::size_t lineno) {
  try {
    std::size_t used = 0;
    V v{};
    if constexpr (std::is_floating_point_v<V>) {
      v = static_cast<V>(std::stod(s, &used));
    } else if constexpr (std::is_signed_v<V>) {
      v = static_cast<V>(std::stoll(s, &used));
    } else {
      if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
      v = static_cast<V>(std::stoull(s, &used));
    }
    if (used != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("bench csv: bad value for '") + name + "': '" + s + "'", lineno);
  }
}

}  // namespace detail

/// Parses a bench CSV. Repeated header lines (from concatenated files) and
/// blank lines are skipped. Errors carry the 1-based line number.
inline std::vector<BenchRecord> parse_bench_csv(std::istream& in) {
  std::vector<BenchRecord> rows;
  const std::string header = bench_csv_header();
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == header) {
      saw_header = true;
      continue;
    }
    if (!saw_header) throw ParseError("bench csv: header does not match schema", lineno);
    const auto f = csv::split(line, lineno);
    if (f.size() != bench_csv_columns().size())
      throw ParseError("bench csv: expected " + std::to_string(bench_csv_columns().size()) + " fields, got " +
                           std::to_string(f.size()),
                       lineno);
    BenchRecord r;
    r.dataset = f[0];
    r.variant = f[1];
    if (r.variant != "fused" && r.variant != "baseline") throw ParseError("bench csv: unknown variant", lineno);
    using detail::parse_field;
    r.k1 = parse_field<std::size_t>(f[2], "k1", lineno);
    r.k2 = parse_field<std::size_t>(f[3], "k2", lineno);
    r.batch = parse_field<std::size_t>(f[4], "batch", lineno);
    r.repeat = parse_field<std::size_t>(f[5], "repeat", lineno);
    r.base_seed = parse_field<std::uint64_t>(f[6], "base_seed", lineno);
    r.steps = parse_field<std::size_t>(f[7], "steps", lineno);
    r.warmup = parse_field<std::size_t>(f[8], "warmup", lineno);
    r.elem_bits = parse_field<int>(f[9], "elem_bits", lineno);
    const int dedup = parse_field<int>(f[10], "dedup", lineno);
    if (dedup != 0 && dedup != 1) throw ParseError("bench csv: dedup must be 0 or 1", lineno);
    r.dedup = dedup == 1;
    r.d_feat = parse_field<std::size_t>(f[11], "d_feat", lineno);
    r.hidden = parse_field<std::size_t>(f[12], "hidden", lineno);
    r.classes = parse_field<std::size_t>(f[13], "classes", lineno);
    r.step_ms_median = parse_field<double>(f[14], "step_ms_median", lineno);
    r.step_ms_p10 = parse_field<double>(f[15], "step_ms_p10", lineno);
    r.step_ms_p90 = parse_field<double>(f[16], "step_ms_p90", lineno);
    r.sampled_pairs_per_s = parse_field<double>(f[17], "sampled_pairs_per_s", lineno);
    r.peak_transient_bytes = parse_field<std::uint64_t>(f[18], "peak_transient_bytes", lineno);
    r.timestamp = f[19];
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<BenchRecord> read_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open csv: " + path);
  return parse_bench_csv(in);
}

/// Record carrying the configuration fields of (cfg, repeat), measurements empty.
inline BenchRecord record_for(const BenchConfig& cfg, std::size_t repeat) {
  BenchRecord r;
  r.dataset = cfg.dataset;
  r.variant = to_string(cfg.variant);
  r.k1 = cfg.k1;
  r.k2 = cfg.k2;
  r.batch = cfg.batch;
  r.repeat = repeat;
  r.base_seed = cfg.base_seeds.at(repeat);
  r.steps = cfg.steps;
  r.warmup = cfg.warmup;
  r.elem_bits = cfg.elem_bits;
  r.dedup = cfg.dedup;
  r.d_feat = cfg.d_feat;
  r.hidden = cfg.hidden;
  r.classes = cfg.classes;
  return r;
}

/// Linear-interpolated percentile (q in [0, 1]) of an unsorted sample.
inline double percentile(std::vector<double> xs, double q) {
  detail::require(!xs.empty(), "percentile of empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return xs[lo] + (xs[hi] - xs[lo]) * frac;
}

inline double median(std::vector<double> xs) { return percentile(std::move(xs), 0.5); }

inline std::string iso8601_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Deterministic Fisher-Yates permutation of [0, n).
inline std::vector<NodeId> shuffled_nodes(std::size_t n, std::uint64_t seed) {
  std::vector<NodeId> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
  RngStream rng = derive_stream(seed, 0, 0x5F, 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

/// Seed batch `step` of a run: consecutive slices of the shuffled order,
/// wrapping around when the order is exhausted.
inline SeedBatch batch_for_step(const std::vector<NodeId>& order, const std::vector<std::int32_t>& labels,
                                std::size_t batch, std::size_t step) {
  SeedBatch b;
  b.seeds.resize(batch);
  b.labels.resize(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const NodeId v = order[(step * batch + i) % order.size()];
    b.seeds[i] = v;
    b.labels[i] = labels[static_cast<std::size_t>(v)];
  }
  return b;
}

/// Runs repeat `repeat` of `cfg`: fresh head seeded from the repeat's base
/// seed, untimed warmup steps, then `steps` timed train_steps. The memory
/// meter's peak is reset at the start of the timed region.
template <class T>
BenchRecord run_repeat(const BenchConfig& cfg, const Dataset<T>& data, std::size_t repeat, unsigned workers = 1) {
  cfg.validate();
  detail::require(repeat < cfg.base_seeds.size(), "bench: repeat index out of range");
  detail::require(data.features.dim == cfg.d_feat, "bench: dataset feature width does not match config");
  detail::require(data.classes == cfg.classes, "bench: dataset class count does not match config");
  const std::uint64_t seed = cfg.base_seeds[repeat];

  MemoryMeter meter;
  const ExecContext ctx{workers, &meter};
  TrainState<T> state = TrainState<T>::init(cfg.d_feat, cfg.hidden, cfg.classes, seed);
  const auto order = shuffled_nodes(data.graph.num_nodes(), seed);
  const Fanouts fan{cfg.k1, cfg.k2};
  const StepOptions opts{cfg.dedup, false};

  std::vector<double> times_ms;
  times_ms.reserve(cfg.steps);
  std::uint64_t pairs = 0;
  double total_s = 0;
  for (std::size_t step = 0; step < cfg.warmup + cfg.steps; ++step) {
    const SeedBatch batch = batch_for_step(order, data.labels, cfg.batch, step);
    const bool timed = step >= cfg.warmup;
    if (step == cfg.warmup) meter.reset_peak();
    const auto t0 = std::chrono::steady_clock::now();
    const StepResult res =
        train_step(data.graph, data.features, batch, fan, step_seed(seed, step), cfg.variant, state, ctx, opts);
    const auto t1 = std::chrono::steady_clock::now();
    if (meter.current() != 0) throw std::logic_error("bench: transient accounting leaked across a step");
    if (!std::isfinite(res.loss)) throw std::runtime_error("bench: non-finite loss");
    if (timed) {
      const double s = std::chrono::duration<double>(t1 - t0).count();
      times_ms.push_back(s * 1e3);
      total_s += s;
      pairs += res.sampled_pairs;
    }
  }

  BenchRecord r = record_for(cfg, repeat);
  r.step_ms_median = median(times_ms);
  r.step_ms_p10 = percentile(times_ms, 0.1);
  r.step_ms_p90 = percentile(times_ms, 0.9);
  r.sampled_pairs_per_s = total_s > 0 ? static_cast<double>(pairs) / total_s : 0.0;
  r.peak_transient_bytes = meter.peak();
  r.timestamp = iso8601_now();
  r.timed_sampled_pairs = pairs;
  return r;
}

/// All repeats of one configuration.
template <class T>
std::vector<BenchRecord> run_config(const BenchConfig& cfg, const Dataset<T>& data, unsigned workers = 1) {
  std::vector<BenchRecord> out;
  for (std::size_t r = 0; r < cfg.base_seeds.size(); ++r) out.push_back(run_repeat(cfg, data, r, workers));
  return out;
}

/// Cross-product benchmark grid.
struct GridSpec {
  std::vector<std::string> datasets;
  std::vector<Fanouts> fanouts{{15, 10}};
  std::vector<std::size_t> batches{1024};
  std::vector<Variant> variants{Variant::Fused, Variant::Baseline};
  std::vector<std::uint64_t> base_seeds{42, 43, 44};
  std::size_t steps = 30;
  std::size_t warmup = 5;
  int elem_bits = 32;
  bool dedup = false;
  std::size_t d_feat = 256;
  std::size_t hidden = 256;
  std::size_t classes = 16;
  unsigned workers = 1;
};

struct GridOutcome {
  std::size_t rows_written = 0;
  std::size_t rows_skipped = 0;
};

namespace detail {
template <class T>
void run_grid_typed(const GridSpec& spec, std::ofstream& out, const std::set<std::string>& done, GridOutcome& oc,
                    std::ostream* log) {
  for (const auto& ds_spec : spec.datasets) {
    std::vector<BenchConfig> configs;
    for (const auto& f : spec.fanouts)
      for (auto b : spec.batches)
        for (auto v : spec.variants) {
          BenchConfig c;
          c.dataset = ds_spec;
          c.variant = v;
          c.k1 = f.k1;
          c.k2 = f.k2;
          c.batch = b;
          c.base_seeds = spec.base_seeds;
          c.steps = spec.steps;
          c.warmup = spec.warmup;
          c.elem_bits = spec.elem_bits;
          c.dedup = spec.dedup;
          c.d_feat = spec.d_feat;
          c.hidden = spec.hidden;
          c.classes = spec.classes;
          c.validate();
          configs.push_back(std::move(c));
        }
    std::optional<Dataset<T>> data;
    for (const auto& c : configs) {
      for (std::size_t r = 0; r < c.base_seeds.size(); ++r) {
        const BenchRecord probe = record_for(c, r);
        if (done.count(probe.key())) {
          ++oc.rows_skipped;
          continue;
        }
        if (!data) {
          if (log) *log << "loading " << ds_spec << " ...\n";
          data.emplace(load_dataset<T>(ds_spec, spec.d_feat, spec.classes));
          if (log)
            *log << "  N=" << data->graph.num_nodes() << " E=" << data->graph.num_edges()
                 << " mean_deg=" << data->graph.mean_degree() << "\n";
        }
        BenchRecord rec = run_repeat(c, *data, r, spec.workers);
        out << to_csv_row(rec) << '\n';
        out.flush();
        if (!out) throw std::runtime_error("bench: write failed");
        ++oc.rows_written;
        if (log)
          *log << "  " << rec.variant << " k=(" << rec.k1 << "," << rec.k2 << ") B=" << rec.batch << " repeat "
               << rec.repeat << ": median " << rec.step_ms_median << " ms, "
               << static_cast<std::uint64_t>(rec.sampled_pairs_per_s) << " pairs/s, peak "
               << rec.peak_transient_bytes << " B\n";
      }
    }
  }
}
}  // namespace detail

/// Runs every (dataset, fanout, batch, variant, repeat) and appends one CSV
/// row per pair to `out_path`. Rows already present (same key) are skipped,
/// so an interrupted grid can be resumed by re-running it.
inline GridOutcome run_grid(const GridSpec& spec, const std::string& out_path, std::ostream* log = nullptr) {
  detail::require(!spec.datasets.empty(), "bench: no datasets");
  detail::require(spec.elem_bits == 32 || spec.elem_bits == 64, "bench: elem_bits must be 32 or 64");
  std::set<std::string> done;
  bool need_header = true;
  std::error_code ec;
  if (std::filesystem::exists(out_path, ec) && std::filesystem::file_size(out_path, ec) > 0) {
    for (const auto& r : read_bench_csv(out_path)) done.insert(r.key());
    need_header = false;
  }
  std::ofstream out(out_path, std::ios::app);
  if (!out) throw InvalidArgument("cannot write csv: " + out_path);
  if (need_header) out << bench_csv_header() << '\n';

  GridOutcome oc;
  if (spec.elem_bits == 64)
    detail::run_grid_typed<double>(spec, out, done, oc, log);
  else
    detail::run_grid_typed<float>(spec, out, done, oc, log);
  return oc;
}

}  // namespace fsa
