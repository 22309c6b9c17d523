#include "growflow/metrics/report.hpp"

#include "growflow/core/errors.hpp"
#include "growflow/metrics/chamfer.hpp"
#include "growflow/metrics/image_metrics.hpp"
#include "growflow/splat/render.hpp"

#include <json.hpp>

#include <iomanip>

namespace growflow::metrics {

namespace {

SplitSummary summarize_rows(const std::vector<const EvalRow*>& rows) {
  SplitSummary s;
  s.rows = rows.size();
  if (rows.empty()) return s;
  bool have_cd = true;
  double cd = 0.0;
  for (const auto* r : rows) {
    s.psnr_db += r->psnr_db;
    s.psnr_full_db += r->psnr_full_db;
    s.ssim += r->ssim;
    if (r->cd) {
      cd += *r->cd;
    } else {
      have_cd = false;
    }
  }
  const double n = static_cast<double>(rows.size());
  s.psnr_db /= n;
  s.psnr_full_db /= n;
  s.ssim /= n;
  if (have_cd) s.cd = cd / n;
  return s;
}

nlohmann::json split_json(const SplitSummary& s) {
  nlohmann::json j{{"rows", s.rows}, {"psnr_db", s.psnr_db}, {"psnr_full_db", s.psnr_full_db}, {"ssim", s.ssim}};
  if (s.cd) j["cd"] = *s.cd;
  return j;
}

}  // namespace

void summarize(EvalReport& report) {
  std::vector<const EvalRow*> train, interp, all;
  for (const auto& r : report.rows) {
    (r.is_interpolated ? interp : train).push_back(&r);
    all.push_back(&r);
  }
  report.training = summarize_rows(train);
  report.interpolation = summarize_rows(interp);
  report.combined = summarize_rows(all);
}

void EvalReport::write_tsv(std::ostream& out) const {
  const bool cd = !rows.empty() && rows.front().cd.has_value();
  out << std::setprecision(10);
  out << "timestep\tt\tcamera\tinterpolated\tpsnr_db\tpsnr_full_db\tssim" << (cd ? "\tcd" : "") << '\n';
  for (const auto& r : rows) {
    out << r.raw_timestep << '\t' << r.t << '\t' << r.camera << '\t' << (r.is_interpolated ? 1 : 0) << '\t'
        << r.psnr_db << '\t' << r.psnr_full_db << '\t' << r.ssim;
    if (cd) out << '\t' << r.cd.value_or(0.0);
    out << '\n';
  }
  const auto line = [&](const char* name, const SplitSummary& s) {
    out << "# " << name << "\trows=" << s.rows << "\tpsnr_db=" << s.psnr_db << "\tpsnr_full_db=" << s.psnr_full_db
        << "\tssim=" << s.ssim;
    if (s.cd) out << "\tcd=" << *s.cd;
    out << '\n';
  };
  line("training", training);
  line("interpolation", interpolation);
  line("combined", combined);
}

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row{{"timestep", r.raw_timestep}, {"t", r.t},           {"camera", r.camera},
                       {"is_interpolated", r.is_interpolated},             {"psnr_db", r.psnr_db},
                       {"psnr_full_db", r.psnr_full_db},                   {"ssim", r.ssim}};
    if (r.cd) row["cd"] = *r.cd;
    j["rows"].push_back(row);
  }
  j["training"] = split_json(training);
  j["interpolation"] = split_json(interpolation);
  j["combined"] = split_json(combined);
  return j.dump(2);
}

EvalReport build_report(const SceneQuery& query, const TimedDataset& dataset, const ReportOptions& options) {
  const auto& axis = dataset.time_axis;
  if (dataset.held_out_cameras.empty()) throw ContractError("build_report: dataset has no held-out cameras");
  if (options.gt_points && options.gt_points->size() != axis.size()) {
    throw ContractError("build_report: ground truth does not cover every timestep");
  }
  splat::RenderSettings settings;
  settings.background = dataset.background;
  settings.dilation = dataset.dilation;

  std::vector<GaussianSet> scenes;
  for (std::size_t k = 0; k < axis.size(); ++k) scenes.push_back(query(axis.normalized[k]));

  std::vector<double> cd;
  if (options.gt_points) {
    GrowthTrajectory traj;
    for (std::size_t k = 0; k < axis.size(); ++k) {
      traj.times.push_back(axis.normalized[k]);
      std::vector<Vec3> pos;
      for (auto i : scenes[k].foreground_indices()) pos.emplace_back(scenes[k].center(i));
      traj.positions.push_back(std::move(pos));
    }
    cd = chamfer_per_timestep(traj, *options.gt_points);
  }

  EvalReport report;
  for (std::size_t k = 0; k < axis.size(); ++k) {
    if (k == axis.final_index) continue;
    for (auto cam : dataset.held_out_cameras) {
      const Image pred = splat::render(scenes[k], dataset.cameras[cam], settings);
      const Image& gt = dataset.image(k, cam);
      EvalRow row;
      row.time_index = k;
      row.raw_timestep = axis.raw_timesteps[k];
      row.t = axis.normalized[k];
      row.camera = cam;
      row.is_interpolated = !axis.is_supervised(k);
      const Mask* mask = dataset.mask(k, cam);
      row.psnr_full_db = psnr(pred, gt);
      row.psnr_db = mask && mask->count() > 0 ? psnr(pred, gt, mask) : row.psnr_full_db;
      row.ssim = ssim(pred, gt);
      if (!cd.empty()) row.cd = cd[k];
      report.rows.push_back(row);
    }
  }
  summarize(report);
  return report;
}

}  // namespace growflow::metrics
