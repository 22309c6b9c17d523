#pragma once

#include "growflow/core/dataset.hpp"

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace growflow::metrics {

struct EvalRow {
  std::size_t time_index = 0;
  int raw_timestep = 0;
  double t = 0.0;  // normalized
  std::size_t camera = 0;
  bool is_interpolated = false;
  double psnr_db = 0.0;  // masked when the dataset has a mask for the view
  double psnr_full_db = 0.0;
  double ssim = 0.0;
  std::optional<double> cd;
};

struct SplitSummary {
  std::size_t rows = 0;
  double psnr_db = 0.0;
  double psnr_full_db = 0.0;
  double ssim = 0.0;
  std::optional<double> cd;
};

struct EvalReport {
  std::vector<EvalRow> rows;  // every (time, held-out camera) pair except the last timestep
  SplitSummary training;
  SplitSummary interpolation;
  SplitSummary combined;

  void write_tsv(std::ostream& out) const;
  std::string to_json() const;
};

// Full scene at a normalized time.
using SceneQuery = std::function<GaussianSet(double t)>;

struct ReportOptions {
  // Ground-truth point positions per dataset timestep; CD is omitted when absent.
  std::optional<std::vector<std::vector<Vec3>>> gt_points;
};

EvalReport build_report(const SceneQuery& query, const TimedDataset& dataset, const ReportOptions& options = {});

// Aggregates rows into the three splits.
void summarize(EvalReport& report);

}  // namespace growflow::metrics
