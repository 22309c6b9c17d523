#pragma once

#include "growflow/core/dataset.hpp"

#include <chrono>
#include <cstdint>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

namespace growflow::train::detail {

inline double extent_of(const TimedDataset& dataset) { return dataset.foreground_box.extent().maxCoeff(); }

// Uniform sampling with replacement from the training cameras.
inline std::vector<std::size_t> sample_views(std::mt19937_64& rng, const std::vector<std::size_t>& cameras, int count) {
  std::uniform_int_distribution<std::size_t> pick(0, cameras.size() - 1);
  std::vector<std::size_t> out(static_cast<std::size_t>(count));
  for (auto& c : out) c = cameras[pick(rng)];
  return out;
}

inline void log_line(std::ostream* log, std::string_view stage, int iter, int interval, double loss, double ms) {
  if (!log) return;
  *log << stage << '\t' << iter << '\t' << interval << '\t' << loss << '\t' << ms << '\n';
}

class Stopwatch {
 public:
  double lap_ms() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - last_).count();
    last_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

// Distinct streams per stage from one user seed.
inline constexpr std::uint64_t kInitSalt = 0x1d17ULL;
inline constexpr std::uint64_t kStaticSalt = 0x57a7ULL;
inline constexpr std::uint64_t kBoundarySalt = 0xb0dfULL;
inline constexpr std::uint64_t kGlobalSalt = 0x610bULL;

}  // namespace growflow::train::detail
