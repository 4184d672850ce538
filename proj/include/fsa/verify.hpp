#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "fsa/baseline.hpp"
#include "fsa/fused.hpp"
#include "fsa/generators.hpp"

// Randomized self-checks behind `fsa verify` and `fsa grad-check`.

namespace fsa {

template <class T>
bool bitwise_equal(std::span<const T> a, std::span<const T> b) {
  return a.size() == b.size() && (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

/// A random aggregation problem.
template <class T>
struct Instance {
  CsrGraph graph;
  FeatureMatrix<T> x;
  SeedBatch seeds;
  std::size_t k1 = 1, k2 = 1;
  std::uint64_t base_seed = 0;
  std::uint64_t instance_seed = 0;

  std::string describe() const {
    std::ostringstream os;
    os << "instance_seed=" << instance_seed << " N=" << graph.num_nodes() << " E=" << graph.num_edges()
       << " D=" << x.dim << " B=" << seeds.size() << " k1=" << k1 << " k2=" << k2 << " base_seed=" << base_seed;
    return os.str();
  }
};

struct InstanceLimits {
  std::size_t max_n = 200;
  std::size_t max_d = 8;
  std::size_t max_fanout = 8;
  std::size_t max_batch = 32;
};

/// Mixes three graph families: sparse random edge sets (isolated nodes,
/// self-loops, directed edges), power-law graphs and regular-degree graphs.
template <class T>
Instance<T> random_instance(std::uint64_t seed, const InstanceLimits& lim) {
  RngStream rng = derive_stream(seed, 0, 0x7E57, 0);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + uniform_index(rng, hi - lo + 1); };
  Instance<T> inst;
  inst.instance_seed = seed;
  const std::size_t n = pick(2, std::max<std::size_t>(2, lim.max_n));
  switch (uniform_index(rng, 3)) {
    case 0: {
      std::vector<Edge> edges;
      const std::size_t m = pick(0, 4 * n);
      for (std::size_t e = 0; e < m; ++e) edges.emplace_back(uniform_index(rng, n), uniform_index(rng, n));
      inst.graph = build_csr(edges, n, uniform_index(rng, 2) == 0);
      break;
    }
    case 1: {
      // Stay under the generator's density limit (edges <= half of all pairs).
      const std::size_t pn = std::max<std::size_t>(n, 8);
      const double avg = std::min(1.0 + static_cast<double>(uniform_index(rng, 8)), 0.45 * static_cast<double>(pn - 1));
      inst.graph = gen_power_law(pn, avg, 2.1, next_u64(rng));
      break;
    }
    default:
      inst.graph = gen_uniform(n, pick(1, std::min<std::size_t>(n - 1, 12)), next_u64(rng));
      break;
  }
  const std::size_t d = pick(1, std::max<std::size_t>(1, lim.max_d));
  inst.x = random_features<T>(inst.graph.num_nodes(), d, next_u64(rng));
  inst.k1 = pick(1, lim.max_fanout);
  inst.k2 = pick(1, lim.max_fanout);
  const std::size_t b = pick(1, lim.max_batch);
  for (std::size_t i = 0; i < b; ++i)
    inst.seeds.seeds.push_back(static_cast<NodeId>(uniform_index(rng, inst.graph.num_nodes())));
  inst.base_seed = next_u64(rng);
  return inst;
}

/// Mean recomputed straight from saved 1-hop indices.
template <class T>
std::vector<T> replay_mean_1hop(const FeatureMatrix<T>& x, const SampledIndices1& idx) {
  std::vector<T> out(idx.batch * x.dim, T{});
  for (std::size_t i = 0; i < idx.batch; ++i) {
    const auto take = static_cast<std::size_t>(idx.takes[i]);
    for (std::size_t d = 0; d < x.dim; ++d) {
      T acc{};
      for (std::size_t t = 0; t < take; ++t) acc += x.at(static_cast<std::size_t>(idx.row(i)[t]), d);
      out[i * x.dim + d] = acc / static_cast<T>(take > 0 ? take : 1);
    }
  }
  return out;
}

/// Nested mean recomputed straight from saved 2-hop indices.
template <class T>
std::vector<T> replay_mean_2hop(const FeatureMatrix<T>& x, const SampledIndices2& idx) {
  std::vector<T> out(idx.batch * x.dim, T{});
  for (std::size_t r = 0; r < idx.batch; ++r) {
    std::size_t valid1 = 0;
    for (NodeId u : idx.hop1(r)) valid1 += u >= 0;
    for (std::size_t d = 0; d < x.dim; ++d) {
      T acc{};
      for (std::size_t j = 0; j < idx.k1; ++j) {
        if (idx.hop1(r)[j] < 0) continue;
        T acc2{};
        std::size_t valid2 = 0;
        for (NodeId w : idx.hop2(r, j)) {
          if (w < 0) continue;
          acc2 += x.at(static_cast<std::size_t>(w), d);
          ++valid2;
        }
        acc += acc2 / static_cast<T>(valid2 > 0 ? valid2 : 1);
      }
      out[r * x.dim + d] = acc / static_cast<T>(valid1 > 0 ? valid1 : 1);
    }
  }
  return out;
}

/// Structural contract of a -1 padded slot row sampled from `owner`'s
/// neighbors: valid prefix, distinct ids, all neighbors, count == take.
inline std::optional<std::string> check_slot_row(const CsrGraph& g, NodeId owner, std::span<const NodeId> row,
                                                 std::size_t expected_take) {
  std::size_t valid = 0;
  for (std::size_t t = 0; t < row.size(); ++t) {
    if (row[t] < 0) {
      if (row[t] != kPad) return "entry below -1";
      continue;
    }
    if (t != valid) return "valid entries are not a prefix";
    ++valid;
    if (!g.contains(row[t]) || !g.has_edge(owner, row[t])) return "sampled id is not a neighbor";
    for (std::size_t s = 0; s < t; ++s)
      if (row[s] == row[t]) return "duplicate id within a sample row";
  }
  if (valid != expected_take) return "valid count does not match take";
  const std::size_t want = std::min(g.degree(owner), row.size());
  if (valid != want) return "take is not min(deg, fanout)";
  return std::nullopt;
}

struct VerifyOptions {
  std::size_t trials = 100;
  InstanceLimits limits;
  std::uint64_t seed = 1;
  bool inject_fault = false;
};

struct VerifyReport {
  std::size_t trials = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  std::string counterexample;
  bool passed() const noexcept { return failures == 0; }
};

// Runs on each random instance: fused vs materialized equality (forward and
// backward, 1- and 2-hop, with and without dedup), replay exactness, sample
// structure, nosave equality, and determinism across worker counts
// {1, 4, 8}. With inject_fault one saved sample is corrupted before the
// replay and structure checks, which must then fail.
inline VerifyReport verify_suite(const VerifyOptions& opt, std::ostream* log = nullptr) {
  VerifyReport rep;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    const auto inst = random_instance<double>(opt.seed * 1000003ULL + trial, opt.limits);
    const auto& g = inst.graph;
    const std::size_t n = g.num_nodes(), d = inst.x.dim, b = inst.seeds.size();
    std::vector<std::string> failed;
    auto check = [&](bool ok, const char* what) {
      ++rep.checks;
      if (!ok) failed.emplace_back(what);
    };
    auto cspan = [](const auto& buf) { return std::span<const double>(buf.data(), buf.size()); };

    std::vector<double> grad_out(b * d);
    RngStream grng = derive_stream(inst.instance_seed, 0, 0x6AD, 0);
    for (auto& v : grad_out) v = 2.0 * uniform_unit(grng) - 1.0;

    // Reference results at one worker.
    auto f1 = fused_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, true, {1, nullptr});
    auto f2 = fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true, {1, nullptr});
    if (opt.inject_fault) {
      for (auto& v : f2.indices->s1)
        if (v >= 0) {
          v = static_cast<NodeId>((v + 1) % static_cast<NodeId>(n));
          break;
        }
    }

    auto b1 = baseline_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, false, {1, nullptr});
    auto b2 = baseline_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, false, {1, nullptr});
    auto b2d = baseline_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true, {1, nullptr});
    check(bitwise_equal(cspan(f1.out.values), cspan(b1.out.values)), "1-hop fused != baseline (forward)");
    check(bitwise_equal(cspan(f2.out.values), cspan(b2.out.values)), "2-hop fused != baseline (forward)");
    check(bitwise_equal(cspan(f2.out.values), cspan(b2d.out.values)), "2-hop fused != dedup baseline (forward)");
    check(f1.sampled_pairs == b1.sampled_pairs && f2.sampled_pairs == b2.sampled_pairs,
          "sampled pair counts differ between fused and baseline");

    check(bitwise_equal(cspan(f1.out.values), std::span<const double>(replay_mean_1hop(inst.x, *f1.indices))),
          "1-hop replay mismatch");
    check(bitwise_equal(cspan(f2.out.values), std::span<const double>(replay_mean_2hop(inst.x, *f2.indices))),
          "2-hop replay mismatch");

    bool structure_ok = true;
    for (std::size_t i = 0; i < b && structure_ok; ++i) {
      structure_ok &= !check_slot_row(g, inst.seeds.seeds[i], f1.indices->row(i),
                                      static_cast<std::size_t>(f1.indices->takes[i]));
      const auto u = f2.indices->hop1(i);
      structure_ok &= !check_slot_row(g, inst.seeds.seeds[i], u, count_valid(u));
      for (std::size_t j = 0; j < inst.k1 && structure_ok; ++j) {
        const auto w = f2.indices->hop2(i, j);
        if (u[j] < 0)
          structure_ok &= count_valid(w) == 0;
        else
          structure_ok &= !check_slot_row(g, u[j], w, count_valid(w));
      }
    }
    check(structure_ok, "sample structure (prefix/distinct/neighbor/take) violated");

    const std::span<const double> go(grad_out);
    auto gf1 = fused_1hop_backward<double>(go, d, *f1.indices, n);
    auto gb1 = baseline_backward<double>(go, b1.block, n);
    check(bitwise_equal(cspan(gf1.values), cspan(gb1.values)), "1-hop fused != baseline (backward)");
    if (!opt.inject_fault) {
      auto gf2 = fused_2hop_backward<double>(go, d, *f2.indices, n);
      auto gb2 = baseline_backward<double>(go, b2.block, n);
      auto gb2d = baseline_backward<double>(go, b2d.block, n);
      check(bitwise_equal(cspan(gf2.values), cspan(gb2.values)), "2-hop fused != baseline (backward)");
      check(bitwise_equal(cspan(gf2.values), cspan(gb2d.values)), "2-hop fused != dedup baseline (backward)");
    }

    auto ns = fused_2hop_forward_nosave(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed);
    check(bitwise_equal(cspan(ns.out.values), cspan(f2.out.values)) || opt.inject_fault,
          "nosave output differs from save output");
    check(fused_2hop_backward<double>(go, d, ns.indices, n).all_zero(), "nosave backward is not zero");

    for (unsigned workers : {4u, 8u}) {
      const ExecContext ctx{workers, nullptr};
      auto w1 = fused_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, true, ctx);
      auto w2 = fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true, ctx);
      auto fresh = fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true, {1, nullptr});
      check(w1.indices->samples == f1.indices->samples && w1.indices->takes == f1.indices->takes &&
                bitwise_equal(cspan(w1.out.values), cspan(f1.out.values)),
            "1-hop result depends on worker count");
      check(w2.indices->s1 == fresh.indices->s1 && w2.indices->s2 == fresh.indices->s2 &&
                bitwise_equal(cspan(w2.out.values), cspan(fresh.out.values)),
            "2-hop result depends on worker count");
      auto gw = fused_2hop_backward<double>(go, d, *w2.indices, n, ctx);
      auto g1 = fused_2hop_backward<double>(go, d, *fresh.indices, n, {1, nullptr});
      check(bitwise_equal(cspan(gw.values), cspan(g1.values)), "2-hop backward depends on worker count");
    }

    ++rep.trials;
    if (!failed.empty()) {
      ++rep.failures;
      if (rep.counterexample.empty()) {
        rep.counterexample = inst.describe() + ": " + failed.front();
        for (std::size_t i = 1; i < failed.size(); ++i) rep.counterexample += "; " + failed[i];
      }
      if (log) *log << "FAIL trial " << trial << ": " << inst.describe() << ": " << failed.front() << "\n";
    }
  }
  return rep;
}

struct GradCheckOptions {
  std::size_t trials = 20;
  double eps = 1e-6;
  InstanceLimits limits{50, 4, 6, 8};
  std::uint64_t seed = 7;
  bool nosave = false;
};

struct GradCheckReport {
  std::size_t trials = 0;
  double max_rel_err_1hop = 0;
  double max_rel_err_2hop = 0;
  double max_abs_grad_nosave = 0;  // only meaningful with nosave
  std::string worst;
  double max_rel_err() const noexcept { return std::max(max_rel_err_1hop, max_rel_err_2hop); }
};

/// |a - b| / max(|a|, |b|), floored at 1e-8 in the denominator so exact
/// zeros on both sides count as zero error.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central finite differences of L(X) = sum(G .* forward(X)) against the
// replayed backward, at 64-bit width, for both hops.
inline GradCheckReport grad_check(const GradCheckOptions& opt) {
  GradCheckReport rep;
  for (std::size_t trial = 0; trial < opt.trials; ++trial) {
    auto inst = random_instance<double>(opt.seed * 7919ULL + trial, opt.limits);
    const auto& g = inst.graph;
    const std::size_t n = g.num_nodes(), d = inst.x.dim, b = inst.seeds.size();
    std::vector<double> gout(b * d);
    RngStream grng = derive_stream(inst.instance_seed, 0, 0x6C, 0);
    for (auto& v : gout) v = 2.0 * uniform_unit(grng) - 1.0;
    auto loss = [&](const AggregatedOutput<double>& out) {
      double s = 0;
      for (std::size_t i = 0; i < gout.size(); ++i) s += gout[i] * out.values[i];
      return s;
    };

    if (opt.nosave) {
      auto f = fused_2hop_forward_nosave(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed);
      auto gx = fused_2hop_backward<double>(gout, d, f.indices, n);
      for (double v : gx.values) rep.max_abs_grad_nosave = std::max(rep.max_abs_grad_nosave, std::abs(v));
      ++rep.trials;
      continue;
    }

    auto f1 = fused_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, true);
    auto f2 = fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, true);
    auto g1 = fused_1hop_backward<double>(gout, d, *f1.indices, n);
    auto g2 = fused_2hop_backward<double>(gout, d, *f2.indices, n);
    for (std::size_t v = 0; v < n; ++v)
      for (std::size_t c = 0; c < d; ++c) {
        double& xv = inst.x.at(v, c);
        const double orig = xv;
        xv = orig + opt.eps;
        const double p1 = loss(fused_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, false).out);
        const double p2 =
            loss(fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, false).out);
        xv = orig - opt.eps;
        const double m1 = loss(fused_1hop_forward(g, inst.x, inst.seeds, inst.k1, inst.base_seed, false).out);
        const double m2 =
            loss(fused_2hop_forward(g, inst.x, inst.seeds, inst.k1, inst.k2, inst.base_seed, false).out);
        xv = orig;
        const double e1 = relative_error(g1.at(v, c), (p1 - m1) / (2 * opt.eps));
        const double e2 = relative_error(g2.at(v, c), (p2 - m2) / (2 * opt.eps));
        if (std::max(e1, e2) > rep.max_rel_err()) rep.worst = inst.describe();
        rep.max_rel_err_1hop = std::max(rep.max_rel_err_1hop, e1);
        rep.max_rel_err_2hop = std::max(rep.max_rel_err_2hop, e2);
      }
    ++rep.trials;
  }
  return rep;
}

}  // namespace fsa
