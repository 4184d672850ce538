// Smallest end-to-end use of the library: build a graph, aggregate a batch
// with the fused operator, push a gradient back, and take one train step.

#include <cstdio>

#include "fsa/fsa.hpp"

int main() {
  const fsa::CsrGraph g = fsa::gen_power_law(2000, 12.0, 2.1, 42);
  const auto x = fsa::random_features<float>(g.num_nodes(), 32, 1);
  const auto labels = fsa::projection_labels(x, 4, 2);

  fsa::SeedBatch batch;
  for (fsa::NodeId v = 0; v < 64; ++v) {
    batch.seeds.push_back(v);
    batch.labels.push_back(labels[static_cast<std::size_t>(v)]);
  }

  auto fwd = fsa::fused_2hop_forward(g, x, batch, 10, 5, /*base_seed=*/7, /*save_indices=*/true);
  std::printf("aggregated %zu x %zu, %llu sampled pairs, out[0][0] = %g\n", fwd.out.batch, fwd.out.dim,
              static_cast<unsigned long long>(fwd.sampled_pairs), static_cast<double>(fwd.out.row(0)[0]));

  std::vector<float> ones(fwd.out.values.size(), 1.0f);
  const auto gx = fsa::fused_2hop_backward<float>(ones, x.dim, *fwd.indices, g.num_nodes());
  double mass = 0;
  for (float v : gx.values) mass += v;
  std::size_t connected = 0;
  for (auto v : batch.seeds) connected += g.degree(v) > 0;
  // Each root with any neighbor spreads a total weight of 1 per column.
  std::printf("gradient mass per column %.3f, roots with neighbors %zu\n", mass / x.dim, connected);

  auto state = fsa::TrainState<float>::init(x.dim, 64, 4, 3);
  fsa::MemoryMeter meter;
  for (int step = 0; step < 5; ++step) {
    const auto r = fsa::train_step(g, x, batch, fsa::Fanouts{10, 5}, fsa::step_seed(7, step), fsa::Variant::Fused,
                                   state, fsa::ExecContext{1, &meter});
    std::printf("step %d loss %.4f\n", step, r.loss);
  }
  std::printf("peak transient bytes %llu\n", static_cast<unsigned long long>(meter.peak()));
  return 0;
}
