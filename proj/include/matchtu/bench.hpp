#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "matchtu/ipfp.hpp"
#include "matchtu/market.hpp"
#include "matchtu/memory.hpp"
#include "matchtu/random.hpp"
#include "matchtu/synthetic.hpp"

#if defined(__unix__) || defined(__APPLE__)
#include <unistd.h>
#endif

namespace matchtu {

enum class BenchMode { kBatch, kMinibatch };

inline const char* to_string(BenchMode mode) {
  return mode == BenchMode::kBatch ? "batch" : "minibatch";
}

inline std::optional<BenchMode> parse_bench_mode(const std::string& name) {
  if (name == "batch") return BenchMode::kBatch;
  if (name == "minibatch") return BenchMode::kMinibatch;
  return std::nullopt;
}

// Default sweep ceilings; anything larger needs allow_large, which prints a
// rough time estimate before committing.
inline constexpr std::size_t kBatchSizeCap = 10000;
inline constexpr std::size_t kMinibatchSizeCap = 100000;

struct BenchConfig {
  std::vector<std::size_t> sizes;            // |X| = |Y| per run
  std::vector<std::size_t> batch_sizes{100};  // minibatch mode only
  std::vector<std::size_t> factor_dims{50};
  int iters = 100;    // measured iterations
  int warmup_iters = 3;  // untimed iterations before measurement
  double beta = 1.0;
  std::uint64_t seed = 42;
  BenchMode mode = BenchMode::kMinibatch;
  std::size_t memory_budget_bytes = std::size_t{8} << 30;
  bool allow_large = false;
};

struct ExperimentRecord {
  std::string mode;
  std::size_t size = 0;
  std::size_t batch_size = 0;  // 0 in batch mode (not applicable)
  std::size_t dim = 0;
  int iters = 0;
  int warmup_iters = 0;
  double beta = 1.0;
  std::uint64_t seed = 0;
  std::vector<double> per_iter_times_s;  // post-warmup
  double mean_time_per_iter_s = 0.0;
  std::size_t peak_solver_bytes = 0;
  bool memory_measured = false;
  std::string machine;
  std::string generator;
};

// A run the harness declines to start (size cap or predicted out-of-memory);
// the CLI maps this to exit code 2.
class BenchRefused : public std::runtime_error {
 public:
  explicit BenchRefused(const std::string& what) : std::runtime_error(what) {}
};

// Live tracked bytes a run will need, per the solver's buffer inventory:
// the dense kernel (batch) or two boundary kernel slabs (minibatch), the
// four factor matrices, stable factors, and the O(size) vectors.
inline std::size_t predicted_batch_bytes(std::size_t size, std::size_t dim) {
  return 8 * (size * size + 4 * size * dim + 8 * size);
}

inline std::size_t predicted_minibatch_bytes(std::size_t size,
                                             std::size_t dim,
                                             std::size_t batch) {
  const std::size_t b = std::min(batch, size);
  return 8 * (4 * size * dim + 2 * b * size + 2 * size * (2 * dim + 2) +
              8 * size);
}

inline std::string machine_descriptor() {
  static const std::string descriptor = [] {
    std::string cpu = "unknown-cpu";
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
      if (line.rfind("model name", 0) == 0) {
        const auto colon = line.find(':');
        if (colon != std::string::npos) {
          cpu = line.substr(colon + 1);
          while (!cpu.empty() && cpu.front() == ' ') cpu.erase(cpu.begin());
        }
        break;
      }
    }
    std::size_t mem_bytes = 0;
#if defined(_SC_PHYS_PAGES) && defined(_SC_PAGESIZE)
    const long pages = sysconf(_SC_PHYS_PAGES);
    const long page_size = sysconf(_SC_PAGESIZE);
    if (pages > 0 && page_size > 0) {
      mem_bytes = static_cast<std::size_t>(pages) *
                  static_cast<std::size_t>(page_size);
    }
#endif
    std::ostringstream os;
    os << cpu << " | " << std::thread::hardware_concurrency()
       << " hw threads | " << (mem_bytes >> 20) << " MiB RAM";
    return os.str();
  }();
  return descriptor;
}

namespace detail {

inline double estimated_run_seconds(BenchMode mode, std::size_t size,
                                    std::size_t dim, int total_iters) {
  // Rough single-core cost model: kernel entries per iteration times a
  // per-entry cost that grows with the factor dimension.
  const double entries = 2.0 * static_cast<double>(size) *
                         static_cast<double>(size);
  const double per_entry =
      mode == BenchMode::kMinibatch
          ? (2.0 * static_cast<double>(dim) + 20.0) / 2.0e9
          : 2.0 / 2.0e9;
  return entries * per_entry * total_iters;
}

inline void check_refusals(const BenchConfig& cfg, std::ostream* notices) {
  for (const std::size_t size : cfg.sizes) {
    const std::size_t cap =
        cfg.mode == BenchMode::kBatch ? kBatchSizeCap : kMinibatchSizeCap;
    if (size > cap && !cfg.allow_large) {
      throw BenchRefused(
          "size " + std::to_string(size) + " exceeds the default " +
          std::string(to_string(cfg.mode)) + " cap of " + std::to_string(cap) +
          "; pass --allow-large to run it anyway");
    }
    for (const std::size_t dim : cfg.factor_dims) {
      std::size_t predicted = 0;
      if (cfg.mode == BenchMode::kBatch) {
        predicted = predicted_batch_bytes(size, dim);
      } else {
        for (const std::size_t b : cfg.batch_sizes) {
          predicted =
              std::max(predicted, predicted_minibatch_bytes(size, dim, b));
        }
      }
      if (predicted > cfg.memory_budget_bytes) {
        throw BenchRefused(
            "predicted " + std::to_string(predicted) + " bytes for size " +
            std::to_string(size) + " (dim " + std::to_string(dim) +
            ", mode " + to_string(cfg.mode) + ") exceeds the " +
            std::to_string(cfg.memory_budget_bytes) + "-byte budget");
      }
      if (size > cap && cfg.allow_large && notices != nullptr) {
        *notices << "note: size " << size << " (dim " << dim
                 << ") is above the default cap; estimated ~"
                 << estimated_run_seconds(cfg.mode, size, dim,
                                          cfg.iters + cfg.warmup_iters)
                 << " s per run\n";
      }
    }
  }
}

}  // namespace detail

// Runs one (mode, size, batch, dim) combination: fresh factors, uniform
// mass, warm-up iterations, then `iters` measured iterations. Timing covers
// only the solver loop; memory is the peak of tracked allocations from model
// construction through solve completion.
inline ExperimentRecord bench_one(const BenchConfig& cfg, std::size_t size,
                                  std::size_t batch, std::size_t dim,
                                  std::uint64_t run_seed) {
  ExperimentRecord record;
  record.mode = to_string(cfg.mode);
  record.size = size;
  record.batch_size = cfg.mode == BenchMode::kBatch ? 0 : batch;
  record.dim = dim;
  record.iters = cfg.iters;
  record.warmup_iters = cfg.warmup_iters;
  record.beta = cfg.beta;
  record.seed = run_seed;
  record.machine = machine_descriptor();
  record.generator = kGeneratorName;

  const MarketShape shape{size, size, dim};
  SolverConfig scfg{cfg.beta, cfg.iters + cfg.warmup_iters, 0.0, batch};

  ScopedAllocationProbe probe;
  const PreferenceModel model = sample_uniform_factors(shape, run_seed);
  const MassSpec mass = uniform_mass(shape, 1.0);

  IpfpDiagnostics diag;
  if (cfg.mode == BenchMode::kBatch) {
    diag = solve_batch(model, mass, scfg).diagnostics;
  } else {
    diag = solve_minibatch(model, mass, scfg).diagnostics;
  }
  record.peak_solver_bytes = probe.peak_bytes();
  record.memory_measured = true;

  record.per_iter_times_s.assign(
      diag.wall_time_per_iter_s.begin() + cfg.warmup_iters,
      diag.wall_time_per_iter_s.end());
  double sum = 0.0;
  for (double t : record.per_iter_times_s) sum += t;
  record.mean_time_per_iter_s =
      sum / static_cast<double>(record.per_iter_times_s.size());
  return record;
}

// Full sweep over sizes x dims (x batch sizes in minibatch mode). Refusals
// happen before anything is allocated.
inline std::vector<ExperimentRecord> bench_sweep(
    const BenchConfig& cfg, std::ostream* notices = nullptr) {
  if (cfg.sizes.empty()) {
    throw std::invalid_argument("bench: sizes must be nonempty");
  }
  if (cfg.factor_dims.empty()) {
    throw std::invalid_argument("bench: factor_dims must be nonempty");
  }
  if (cfg.mode == BenchMode::kMinibatch && cfg.batch_sizes.empty()) {
    throw std::invalid_argument("bench: batch_sizes must be nonempty");
  }
  if (cfg.iters < 1) {
    throw std::invalid_argument("bench: iters must be >= 1");
  }
  if (cfg.warmup_iters < 0) {
    throw std::invalid_argument("bench: warmup_iters must be >= 0");
  }
  if (!(cfg.beta > 0.0)) {
    throw std::invalid_argument("bench: beta must be positive");
  }
  for (const std::size_t b : cfg.batch_sizes) {
    if (b < 1) throw std::invalid_argument("bench: batch sizes must be >= 1");
  }

  detail::check_refusals(cfg, notices);

  std::vector<ExperimentRecord> records;
  std::uint64_t combo = 0;
  for (const std::size_t size : cfg.sizes) {
    for (const std::size_t dim : cfg.factor_dims) {
      if (cfg.mode == BenchMode::kBatch) {
        records.push_back(
            bench_one(cfg, size, 0, dim, derive_seed(cfg.seed, combo++)));
      } else {
        for (const std::size_t batch : cfg.batch_sizes) {
          records.push_back(bench_one(cfg, size, batch, dim,
                                      derive_seed(cfg.seed, combo++)));
        }
      }
    }
  }
  return records;
}

inline nlohmann::json record_to_json(const ExperimentRecord& r) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["size"] = r.size;
  j["batch_size"] = r.batch_size;
  j["dim"] = r.dim;
  j["iters"] = r.iters;
  j["warmup_iters"] = r.warmup_iters;
  j["beta"] = r.beta;
  j["seed"] = r.seed;
  j["per_iter_times_s"] = r.per_iter_times_s;
  j["mean_time_per_iter_s"] = r.mean_time_per_iter_s;
  j["peak_solver_bytes"] = r.peak_solver_bytes;
  j["memory_measured"] = r.memory_measured;
  j["machine"] = r.machine;
  j["generator"] = r.generator;
  return j;
}

inline ExperimentRecord record_from_json(const nlohmann::json& j) {
  ExperimentRecord r;
  r.mode = j.at("mode").get<std::string>();
  r.size = j.at("size").get<std::size_t>();
  r.batch_size = j.at("batch_size").get<std::size_t>();
  r.dim = j.at("dim").get<std::size_t>();
  r.iters = j.at("iters").get<int>();
  r.warmup_iters = j.at("warmup_iters").get<int>();
  r.beta = j.at("beta").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.per_iter_times_s = j.at("per_iter_times_s").get<std::vector<double>>();
  r.mean_time_per_iter_s = j.at("mean_time_per_iter_s").get<double>();
  r.peak_solver_bytes = j.at("peak_solver_bytes").get<std::size_t>();
  r.memory_measured = j.at("memory_measured").get<bool>();
  r.machine = j.at("machine").get<std::string>();
  r.generator = j.at("generator").get<std::string>();
  return r;
}

inline constexpr int kReportSchemaVersion = 1;

}  // namespace matchtu
