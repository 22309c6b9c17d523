#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace growflow::bench {

struct BenchResult {
  std::string kernel;
  std::string scale;
  double ns_per_call = 0.0;  // median over reps
  double throughput = 0.0;
  std::string unit;          // pixels/s, queries/s or states/s
  int reps = 0;
};

struct BenchOptions {
  std::string filter;  // substring of "kernel/scale"; empty runs everything
  int reps = 10;
};

// Runs render, hex_interp and rk4_step at three scales each. A warm-up call
// precedes the timed repetitions.
std::vector<BenchResult> run_benches(const BenchOptions& options);

void write_tsv(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace growflow::bench
