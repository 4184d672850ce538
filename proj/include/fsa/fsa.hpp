#pragma once

// Umbrella header.

#include "fsa/baseline.hpp"
#include "fsa/bench.hpp"
#include "fsa/common.hpp"
#include "fsa/csr_graph.hpp"
#include "fsa/dataset.hpp"
#include "fsa/dense.hpp"
#include "fsa/features.hpp"
#include "fsa/fused.hpp"
#include "fsa/generators.hpp"
#include "fsa/graph_io.hpp"
#include "fsa/memory_meter.hpp"
#include "fsa/parallel.hpp"
#include "fsa/report.hpp"
#include "fsa/rng.hpp"
#include "fsa/sampling.hpp"
#include "fsa/tensors.hpp"
#include "fsa/train.hpp"
#include "fsa/verify.hpp"
