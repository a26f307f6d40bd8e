#pragma once

// Umbrella header for the matchtu library: transferable-utility stable
// matching via batch and mini-batch IPFP, synthetic market generation,
// implicit-feedback factorization, ranking evaluation, and the benchmark
// harness.

#include "matchtu/bench.hpp"
#include "matchtu/ials.hpp"
#include "matchtu/ingest.hpp"
#include "matchtu/io.hpp"
#include "matchtu/ipfp.hpp"
#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"
#include "matchtu/memory.hpp"
#include "matchtu/random.hpp"
#include "matchtu/ranking.hpp"
#include "matchtu/report.hpp"
#include "matchtu/synthetic.hpp"
#include "matchtu/welfare.hpp"
