// fsa: generate graphs, run the verification suites, run benchmark grids and
// summarize their CSVs.
//
// Exit codes: 0 success, 1 usage or input error, 2 a checked property failed.

#include <cstdio>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fsa/fsa.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitProperty = 2;

struct GenArgs {
  std::string dataset;
  std::string out;
  std::string format = "csr";
};

struct BenchArgs {
  std::string out;
  std::vector<std::string> datasets{"synth:powerlaw:N=100000,deg=20,exp=2.1,seed=42"};
  std::vector<std::string> fanouts{"15 10"};
  std::vector<std::size_t> batches{1024};
  std::size_t steps = 30;
  std::size_t warmup = 5;
  std::size_t repeats = 3;
  std::vector<std::uint64_t> seeds{42, 43, 44};
  std::vector<std::string> variants{"fused", "baseline"};
  int elem_bits = 32;
  bool dedup = false;
  std::size_t d_feat = 256;
  std::size_t hidden = 256;
  std::size_t classes = 16;
};

struct VerifyArgs {
  fsa::VerifyOptions opt;
};

struct GradArgs {
  fsa::GradCheckOptions opt;
  double threshold = 1e-6;
};

struct ReportArgs {
  std::string csv;
  std::string summary_out;
};

fsa::Fanouts parse_fanout(const std::string& s) {
  std::istringstream in(s);
  long long k1 = -1, k2 = 0;
  in >> k1;
  if (!in) throw fsa::InvalidArgument("bad --fanouts value '" + s + "' (expected \"k1 k2\" or \"k1\")");
  if (!(in >> k2)) k2 = 0;
  std::string rest;
  if (in >> rest) throw fsa::InvalidArgument("bad --fanouts value '" + s + "' (trailing text)");
  if (k1 < 1 || k2 < 0) throw fsa::InvalidArgument("bad --fanouts value '" + s + "' (need k1 >= 1, k2 >= 0)");
  return {static_cast<std::size_t>(k1), static_cast<std::size_t>(k2)};
}

template <class V>
std::string join(const std::vector<V>& xs, const char* sep = " ") {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? sep : "") << xs[i];
  return os.str();
}

int run_gen(const GenArgs& a) {
  std::cout << "config: gen dataset=" << a.dataset << " out=" << a.out << " format=" << a.format << "\n";
  const fsa::CsrGraph g = fsa::load_graph(a.dataset);
  if (a.format == "csr")
    fsa::save_csr_binary(g, a.out);
  else
    fsa::write_edge_list(g, a.out);
  std::cout << "wrote " << a.out << ": N=" << g.num_nodes() << " E=" << g.num_edges()
            << " mean_degree=" << g.mean_degree() << "\n";
  return 0;
}

int run_bench(const BenchArgs& a, unsigned workers) {
  fsa::GridSpec spec;
  spec.datasets = a.datasets;
  spec.fanouts.clear();
  for (const auto& f : a.fanouts) spec.fanouts.push_back(parse_fanout(f));
  spec.batches = a.batches;
  spec.variants.clear();
  for (const auto& v : a.variants) spec.variants.push_back(fsa::parse_variant(v));
  if (a.repeats > a.seeds.size())
    throw fsa::InvalidArgument("--repeats " + std::to_string(a.repeats) + " exceeds the number of --seeds");
  if (a.repeats == 0) throw fsa::InvalidArgument("--repeats must be >= 1");
  spec.base_seeds.assign(a.seeds.begin(), a.seeds.begin() + static_cast<std::ptrdiff_t>(a.repeats));
  spec.steps = a.steps;
  spec.warmup = a.warmup;
  spec.elem_bits = a.elem_bits;
  spec.dedup = a.dedup;
  spec.d_feat = a.d_feat;
  spec.hidden = a.hidden;
  spec.classes = a.classes;
  spec.workers = workers;

  std::cout << "config: bench out=" << a.out << "\n"
            << "  datasets=" << join(a.datasets, " | ") << "\n"
            << "  fanouts=" << join(a.fanouts, ", ") << " batches=" << join(spec.batches)
            << " variants=" << join(a.variants) << "\n"
            << "  steps=" << spec.steps << " warmup=" << spec.warmup << " seeds=" << join(spec.base_seeds)
            << " elem_bits=" << spec.elem_bits << " dedup=" << spec.dedup << "\n"
            << "  d_feat=" << spec.d_feat << " hidden=" << spec.hidden << " classes=" << spec.classes
            << " workers=" << workers << std::endl;
  const auto oc = fsa::run_grid(spec, a.out, &std::cout);
  std::cout << "rows written: " << oc.rows_written << ", skipped (already present): " << oc.rows_skipped << "\n";
  try {
    fsa::print_speedup_table(fsa::report_speedups(a.out), std::cout);
  } catch (const fsa::IncompleteConfig&) {
    // A single-variant grid has nothing to compare.
  }
  return 0;
}

int run_verify(const VerifyArgs& a, unsigned /*workers*/) {
  const auto& o = a.opt;
  std::cout << "config: verify trials=" << o.trials << " max_n=" << o.limits.max_n << " max_d=" << o.limits.max_d
            << " max_fanout=" << o.limits.max_fanout << " max_batch=" << o.limits.max_batch << " seed=" << o.seed
            << " workers={1,4,8}" << (o.inject_fault ? " inject_fault=1" : "") << "\n";
  if (o.trials == 0) {
    std::cerr << "warning: --trials 0, nothing checked\n";
    std::cout << "PASS (0 trials, vacuous)\n";
    return 0;
  }
  const auto rep = fsa::verify_suite(o, &std::cerr);
  if (rep.passed()) {
    std::cout << "PASS " << rep.trials << " trials, " << rep.checks << " checks\n";
    return 0;
  }
  std::cout << "FAIL " << rep.failures << " of " << rep.trials << " trials\n"
            << "counterexample: " << rep.counterexample << "\n";
  return kExitProperty;
}

int run_grad_check(const GradArgs& a) {
  const auto& o = a.opt;
  std::cout << "config: grad-check trials=" << o.trials << " eps=" << o.eps << " max_n=" << o.limits.max_n
            << " max_d=" << o.limits.max_d << " seed=" << o.seed << " elem_bits=64"
            << (o.nosave ? " nosave=1" : "") << "\n";
  const auto rep = fsa::grad_check(o);
  if (o.nosave) {
    std::cout << "nosave: max |grad X| = " << rep.max_abs_grad_nosave << " over " << rep.trials
              << " trials (features receive no gradient without saved indices)\n";
    return rep.max_abs_grad_nosave == 0.0 ? 0 : kExitProperty;
  }
  std::printf("max rel err: 1-hop %.3e, 2-hop %.3e (threshold %.1e, %zu trials)\n", rep.max_rel_err_1hop,
              rep.max_rel_err_2hop, a.threshold, rep.trials);
  if (rep.max_rel_err() < a.threshold) {
    std::cout << "PASS\n";
    return 0;
  }
  std::cout << "FAIL worst instance: " << rep.worst << "\n";
  return kExitProperty;
}

int run_report(const ReportArgs& a) {
  std::cout << "config: report csv=" << a.csv << (a.summary_out.empty() ? "" : " summary_out=" + a.summary_out)
            << "\n";
  const auto rows = fsa::report_speedups(a.csv);
  fsa::print_speedup_table(rows, std::cout);
  if (!a.summary_out.empty()) {
    fsa::write_summary_csv(rows, a.summary_out);
    std::cout << "wrote " << a.summary_out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fused neighbor sampling + mean aggregation: tools and benchmarks"};
  app.require_subcommand(1);
  unsigned workers = fsa::default_workers();
  app.add_option("--workers", workers, "Worker threads (default: FSA_WORKERS or hardware concurrency)")
      ->check(CLI::Range(1u, 1024u));

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate or ingest a graph and write it out");
  gen_cmd->add_option("--dataset", gen.dataset, "Dataset spec string")->required();
  gen_cmd->add_option("--out", gen.out, "Output path")->required();
  gen_cmd->add_option("--format", gen.format, "csr (binary cache) or edgelist")
      ->check(CLI::IsMember({"csr", "edgelist"}));

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark grid, appending rows to a CSV");
  bench_cmd->add_option("--out", bench.out, "CSV output path (appended; existing rows are skipped)")->required();
  bench_cmd->add_option("--datasets", bench.datasets, "Dataset spec strings");
  bench_cmd->add_option("--fanouts", bench.fanouts, "Fanout pairs as \"k1 k2\" (k2 = 0 or omitted: 1-hop)");
  bench_cmd->add_option("--batches", bench.batches, "Seed batch sizes");
  bench_cmd->add_option("--steps", bench.steps, "Timed steps per repeat");
  bench_cmd->add_option("--warmup", bench.warmup, "Untimed warmup steps per repeat");
  bench_cmd->add_option("--repeats", bench.repeats, "Repeats (one per base seed)");
  bench_cmd->add_option("--seeds", bench.seeds, "Base seeds, one per repeat");
  bench_cmd->add_option("--variants", bench.variants, "fused and/or baseline")
      ->check(CLI::IsMember({"fused", "baseline"}));
  bench_cmd->add_option("--elem-bits", bench.elem_bits, "Element width")->check(CLI::IsMember({32, 64}));
  bench_cmd->add_flag("--dedup", bench.dedup, "Baseline gathers a deduplicated unique-node table");
  bench_cmd->add_option("--d-feat", bench.d_feat, "Feature width");
  bench_cmd->add_option("--hidden", bench.hidden, "Head hidden width");
  bench_cmd->add_option("--classes", bench.classes, "Label classes");

  VerifyArgs ver;
  auto* verify_cmd = app.add_subcommand("verify", "Randomized fused-vs-baseline, replay and determinism checks");
  verify_cmd->add_option("--trials", ver.opt.trials, "Random instances");
  verify_cmd->add_option("--max-n", ver.opt.limits.max_n, "Largest node count")->check(CLI::Range(2, 1 << 20));
  verify_cmd->add_option("--max-d", ver.opt.limits.max_d, "Largest feature width")->check(CLI::Range(1, 4096));
  verify_cmd->add_option("--max-fanout", ver.opt.limits.max_fanout, "Largest fanout")->check(CLI::Range(1, 4096));
  verify_cmd->add_option("--max-batch", ver.opt.limits.max_batch, "Largest batch")->check(CLI::Range(1, 1 << 20));
  verify_cmd->add_option("--seed", ver.opt.seed, "Instance seed");
  // Corrupts one saved sample; used by the tests to exercise the failure path.
  verify_cmd->add_flag("--inject-fault", ver.opt.inject_fault)->group("");

  GradArgs grad;
  auto* grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of the aggregation backward (64-bit)");
  grad_cmd->add_option("--trials", grad.opt.trials, "Random instances");
  grad_cmd->add_option("--eps", grad.opt.eps, "Central difference step")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--max-n", grad.opt.limits.max_n, "Largest node count")->check(CLI::Range(2, 4096));
  grad_cmd->add_option("--max-d", grad.opt.limits.max_d, "Largest feature width")->check(CLI::Range(1, 64));
  grad_cmd->add_option("--seed", grad.opt.seed, "Instance seed");
  grad_cmd->add_option("--threshold", grad.threshold, "Pass threshold on max relative error");
  grad_cmd->add_flag("--nosave", grad.opt.nosave, "Check the no-saved-indices mode (gradient must be zero)");

  ReportArgs rep;
  auto* report_cmd = app.add_subcommand("report", "Summarize a benchmark CSV");
  report_cmd->add_option("--csv", rep.csv, "Benchmark CSV")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--summary-out", rep.summary_out, "Write a machine-readable summary CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*bench_cmd) return run_bench(bench, workers);
    if (*verify_cmd) return run_verify(ver, workers);
    if (*grad_cmd) return run_grad_check(grad);
    if (*report_cmd) return run_report(rep);
  } catch (const fsa::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
