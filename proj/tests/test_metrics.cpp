#include "growflow/core/errors.hpp"
#include "growflow/metrics/chamfer.hpp"
#include "growflow/metrics/image_metrics.hpp"
#include "growflow/metrics/report.hpp"
#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

using namespace growflow;
using namespace growflow::metrics;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h) {
  Image img(w, h);
  oracle::fill_uniform(img.data(), rng, 0.0, 1.0);
  return img;
}

// Window-by-window SSIM straight from the definition.
double naive_ssim(const Image& a, const Image& b) {
  double w[11];
  double s = 0.0;
  for (int i = 0; i < 11; ++i) s += w[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
  for (double& x : w) x /= s;
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  int count = 0;
  for (int ch = 0; ch < 3; ++ch) {
    for (int r = 0; r + 11 <= a.height(); ++r) {
      for (int c = 0; c + 11 <= a.width(); ++c) {
        double ma = 0, mb = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            ma += w[i] * w[j] * a.at(r + i, c + j, ch);
            mb += w[i] * w[j] * b.at(r + i, c + j, ch);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double da = a.at(r + i, c + j, ch) - ma, db = b.at(r + i, c + j, ch) - mb;
            va += w[i] * w[j] * da * da;
            vb += w[i] * w[j] * db * db;
            cov += w[i] * w[j] * da * db;
          }
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++count;
      }
    }
  }
  return total / count;
}

// Every ground-truth point, unborn ones included, so the Gaussian count is
// constant over time.
GaussianSet all_points(const synth::GroundTruth& truth, std::size_t k, double shift) {
  GaussianSet g;
  for (std::size_t i = 0; i < truth.point_count(); ++i) {
    const double r = std::max(truth.radii[k][i], 1e-3);
    g.add(truth.positions[k][i] + Vec3(shift, 0, 0), Vec4(1, 0, 0, 0), Vec3::Constant(std::log(r)), 2.0,
          truth.colors[i], true);
  }
  for (std::size_t i = 0; i < truth.backdrop.size(); ++i) {
    const auto& b = truth.backdrop;
    g.add(b.center(i), b.rotation(i), b.log_scale(i), b.opacity_logits[i], b.color(i), false);
  }
  return g;
}

GrowthTrajectory trajectory(const std::vector<std::vector<Vec3>>& positions) {
  GrowthTrajectory t;
  for (std::size_t k = 0; k < positions.size(); ++k) t.times.push_back(static_cast<double>(k));
  t.positions = positions;
  return t;
}

}  // namespace

TEST_CASE("psnr examples") {
  std::mt19937_64 rng(1);
  const Image a = random_image(rng, 8, 6);
  CHECK(psnr(a, a) == kPsnrCap);

  Image b = a;
  for (double& v : b.data()) v += 0.1;
  CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-12));

  // differ only outside the mask
  Image c = a;
  Mask m{8, 6, std::vector<std::uint8_t>(48, 0)};
  for (int i = 0; i < 10; ++i) m.values[i] = 1;
  for (int p = 10; p < 48; ++p)
    for (int ch = 0; ch < 3; ++ch) c.data()[3 * p + ch] = 0.0;
  CHECK(psnr(c, a, &m) == kPsnrCap);
  CHECK(psnr(c, a) < 20.0);

  // masked MSE over the covered pixels only
  Image d = a;
  d.data()[0] += 0.3;
  Mask one{8, 6, std::vector<std::uint8_t>(48, 0)};
  one.values[0] = 1;
  CHECK(psnr(d, a, &one) == doctest::Approx(10 * std::log10(3.0 / 0.09)));

  Mask empty{8, 6, std::vector<std::uint8_t>(48, 0)};
  CHECK_THROWS_AS(psnr(a, a, &empty), ContractError);
  CHECK_THROWS_AS(psnr(a, Image(6, 8)), ContractError);
  Mask wrong{4, 4, std::vector<std::uint8_t>(16, 1)};
  CHECK_THROWS_AS(psnr(a, a, &wrong), ContractError);
}

TEST_CASE("psnr is strictly decreasing in MSE") {
  std::mt19937_64 rng(2);
  const Image a = random_image(rng, 5, 5);
  double prev = kPsnrCap;
  for (double e : {1e-4, 3e-4, 1e-3, 0.01, 0.05, 0.2, 0.5}) {
    Image b = a;
    for (double& v : b.data()) v += e;
    const double p = psnr(b, a);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("ssim examples") {
  std::mt19937_64 rng(3);
  const Image a = random_image(rng, 16, 14);
  CHECK(ssim(a, a) == 1.0);

  Image checker(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c)
      for (int ch = 0; ch < 3; ++ch) checker.at(r, c, ch) = (r + c) % 2 ? 0.8 : 0.2;
  Image neg = checker;
  for (double& v : neg.data()) v = 1.0 - v;
  CHECK(ssim(checker, neg) < 0.0);

  Image flat(12, 12, 0.5);
  Image noisy = flat;
  std::normal_distribution<double> n(0.0, 1e-6);
  for (double& v : noisy.data()) v += n(rng);
  CHECK(ssim(flat, noisy) > 0.999999);

  CHECK_THROWS_AS(ssim(Image(10, 12), Image(10, 12)), ContractError);
  CHECK_THROWS_AS(ssim(Image(12, 12), Image(13, 12)), ContractError);
}

TEST_CASE("ssim matches a direct window computation") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int w = 11 + static_cast<int>(rng() % 10), h = 11 + static_cast<int>(rng() % 10);
    const Image a = random_image(rng, w, h);
    Image b = a;
    std::normal_distribution<double> n(0.0, 0.02 + 0.05 * trial);
    for (double& v : b.data()) v = std::clamp(v + n(rng), 0.0, 1.0);
    const double got = ssim(a, b);
    CHECK(got == doctest::Approx(naive_ssim(a, b)).epsilon(1e-10));
    CHECK(got == doctest::Approx(ssim(b, a)).epsilon(1e-12));
    CHECK(got <= 1.0);
    CHECK(got >= -1.0);
  }
}

TEST_CASE("ssim gradient matches finite differences") {
  std::mt19937_64 rng(5);
  const Image gt = random_image(rng, 13, 12);
  Image pred = random_image(rng, 13, 12);
  Image grad;
  const double v = ssim_with_grad(pred, gt, &grad);
  CHECK(v == ssim(pred, gt));
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < pred.data().size(); i += 7) {
    const double x = pred.data()[i];
    pred.data()[i] = x + h;
    const double up = ssim(pred, gt);
    pred.data()[i] = x - h;
    const double down = ssim(pred, gt);
    pred.data()[i] = x;
    const double numeric = (up - down) / (2 * h);
    const double a = grad.data()[i];
    worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("chamfer examples") {
  const std::vector<std::vector<Vec3>> gt = {{Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                             {Vec3(0, 0, 0.5), Vec3(1, 0, 0.5)},
                                             {Vec3(0, 0, 1), Vec3(1, 0, 1)}};
  CHECK(chamfer_tracking(trajectory(gt), gt) == 0.0);

  // one Gaussian, one track, constant offset
  std::vector<std::vector<Vec3>> one_gt, one_pred;
  for (int k = 0; k < 4; ++k) {
    one_gt.push_back({Vec3(0.1 * k, 0.2, 0)});
    one_pred.push_back({Vec3(0.1 * k, 0.2, 0.1)});
  }
  CHECK(chamfer_tracking(trajectory(one_pred), one_gt) == doctest::Approx(0.1).epsilon(1e-12));

  // two Gaussians at 0.1 and 0.3
  std::vector<std::vector<Vec3>> two;
  for (const auto& g : gt) two.push_back({g[0] + Vec3(0.1, 0, 0), g[1] + Vec3(0, 0.3, 0)});
  CHECK(chamfer_tracking(trajectory(two), gt) == doctest::Approx(0.2).epsilon(1e-12));

  CHECK_THROWS_AS(chamfer_tracking(trajectory(gt), {}), ContractError);
  CHECK_THROWS_AS(chamfer_tracking(trajectory(gt), {{}, {}, {}}), ContractError);
}

TEST_CASE("chamfer: matches fixed at the first timestep, last timestep excluded, ties to the lowest index") {
  // the Gaussian starts next to point 0, then follows point 1
  const std::vector<std::vector<Vec3>> gt = {{Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                             {Vec3(0, 0, 0), Vec3(1, 0, 0)},
                                             {Vec3(0, 0, 0), Vec3(1, 0, 0)}};
  const std::vector<std::vector<Vec3>> pred = {{Vec3(0.1, 0, 0)}, {Vec3(1, 0, 0)}, {Vec3(5, 0, 0)}};
  auto per = chamfer_per_timestep(trajectory(pred), gt);
  REQUIRE(per.size() == 3);
  CHECK(per[0] == doctest::Approx(0.1));
  CHECK(per[1] == doctest::Approx(1.0));
  CHECK(per[2] == doctest::Approx(5.0));
  CHECK(chamfer_tracking(trajectory(pred), gt) == doctest::Approx(0.55));

  CHECK(nearest_point(Vec3(0.5, 0, 0), {Vec3(0, 0, 0), Vec3(1, 0, 0)}) == 0);
  CHECK(nearest_point(Vec3(0.5, 0, 0), {Vec3(1, 0, 0), Vec3(0, 0, 0)}) == 0);
  CHECK(nearest_point(Vec3(0.9, 0, 0), {Vec3(0, 0, 0), Vec3(1, 0, 0)}) == 1);
}

TEST_CASE("chamfer properties on random trajectories") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto rv = [&] { return Vec3(u(rng), u(rng), u(rng)); };
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t T = 2 + rng() % 5, n_gt = 1 + rng() % 8, n_pred = 1 + rng() % 10;
    std::vector<std::vector<Vec3>> gt(T), pred(T);
    for (auto& row : gt)
      for (std::size_t i = 0; i < n_gt; ++i) row.push_back(rv());
    for (auto& row : pred)
      for (std::size_t i = 0; i < n_pred; ++i) row.push_back(rv());
    const double base = chamfer_tracking(trajectory(pred), gt);
    CHECK(base >= 0.0);

    std::vector<std::size_t> perm(n_pred);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto shuffled = pred;
    for (std::size_t k = 0; k < T; ++k)
      for (std::size_t i = 0; i < n_pred; ++i) shuffled[k][i] = pred[k][perm[i]];
    CHECK(chamfer_tracking(trajectory(shuffled), gt) == doctest::Approx(base).epsilon(1e-12));

    // predictions sitting on ground-truth tracks score zero
    auto exact = pred;
    for (std::size_t i = 0; i < n_pred; ++i) {
      const std::size_t j = rng() % n_gt;
      for (std::size_t k = 0; k < T; ++k) exact[k][i] = gt[k][j];
    }
    CHECK(chamfer_tracking(trajectory(exact), gt) == 0.0);

    // displacing one Gaussian at one evaluated time makes it positive
    if (T > 1) {
      exact[T - 2][0] += Vec3(0, 0, 1e-3);
      CHECK(chamfer_tracking(trajectory(exact), gt) > 0.0);
    }
  }
}

TEST_CASE("report: row count, splits, weighted mean, determinism") {
  synth::GeneratedScene scene;
  auto spec = oracle::small_spec(4);
  const auto ds = oracle::small_dataset(spec, &scene);
  const auto& axis = ds.time_axis;

  // perturbed ground truth, so every metric is finite and non-trivial
  auto query = [&](double t) {
    std::size_t k = 0;
    while (axis.normalized[k] != t) ++k;
    return all_points(scene.truth, k, 0.01 * static_cast<double>(k + 1));
  };
  ReportOptions opts;
  opts.gt_points = scene.truth.positions;
  auto report = build_report(query, ds, opts);
  CHECK(report.rows.size() == (axis.size() - 1) * ds.held_out_cameras.size());
  for (const auto& r : report.rows) {
    CHECK(r.time_index != axis.final_index);
    CHECK(r.is_interpolated == !axis.is_supervised(r.time_index));
    CHECK(r.cd.has_value());
    CHECK(r.psnr_db < kPsnrCap);
  }
  const auto& tr = report.training;
  const auto& in = report.interpolation;
  const auto& co = report.combined;
  CHECK(tr.rows + in.rows == co.rows);
  CHECK(tr.rows > 0);
  CHECK(in.rows > 0);
  const double wt = static_cast<double>(tr.rows) / co.rows, wi = static_cast<double>(in.rows) / co.rows;
  CHECK(co.psnr_db == doctest::Approx(wt * tr.psnr_db + wi * in.psnr_db).epsilon(1e-12));
  CHECK(co.ssim == doctest::Approx(wt * tr.ssim + wi * in.ssim).epsilon(1e-12));
  CHECK(*co.cd == doctest::Approx(wt * *tr.cd + wi * *in.cd).epsilon(1e-12));

  auto again = build_report(query, ds, opts);
  CHECK(again.to_json() == report.to_json());

  auto j = nlohmann::json::parse(report.to_json());
  CHECK(j["rows"].size() == report.rows.size());
  CHECK(j["combined"]["psnr_db"].get<double>() == co.psnr_db);

  std::ostringstream tsv;
  report.write_tsv(tsv);
  std::istringstream in_tsv(tsv.str());
  std::string line;
  std::getline(in_tsv, line);
  CHECK(line == "timestep\tt\tcamera\tinterpolated\tpsnr_db\tpsnr_full_db\tssim\tcd");
  int body = 0, summary = 0;
  while (std::getline(in_tsv, line)) (line.rfind("# ", 0) == 0 ? summary : body)++;
  CHECK(body == static_cast<int>(report.rows.size()));
  CHECK(summary == 3);
}

TEST_CASE("report: no interpolated times gives combined equal to training") {
  synth::GeneratedScene scene;
  auto spec = oracle::small_spec(5);
  spec.supervised_stride = 1;
  const auto ds = oracle::small_dataset(spec, &scene);
  auto query = [&](double t) {
    std::size_t k = 0;
    while (ds.time_axis.normalized[k] != t) ++k;
    return synth::gaussians_at(scene.truth, k);
  };
  auto report = build_report(query, ds);
  CHECK(report.interpolation.rows == 0);
  CHECK(report.combined.psnr_db == report.training.psnr_db);
  CHECK(report.combined.ssim == report.training.ssim);
  CHECK(!report.combined.cd.has_value());

  auto no_holdout = ds;
  no_holdout.held_out_cameras.clear();
  CHECK_THROWS_AS(build_report(query, no_holdout), ContractError);
}
