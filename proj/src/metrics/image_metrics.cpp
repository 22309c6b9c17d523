#include "growflow/metrics/image_metrics.hpp"

#include "growflow/core/errors.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace growflow::metrics {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_kernel() {
  std::array<double, kWindow> k{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable valid-mode correlation of an h x w plane -> (h-10) x (w-10).
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w) {
  static const auto k = gaussian_kernel();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int j = 0; j < kWindow; ++j) s += k[j] * in[static_cast<std::size_t>(y) * w + x + j];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int j = 0; j < kWindow; ++j) s += k[j] * tmp[static_cast<std::size_t>(y + j) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

// Adjoint of filter_valid: (h-10) x (w-10) -> h x w.
std::vector<double> filter_valid_transpose(const std::vector<double>& in, int h, int w) {
  static const auto k = gaussian_kernel();
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = in[static_cast<std::size_t>(y) * ow + x];
      for (int j = 0; j < kWindow; ++j) tmp[static_cast<std::size_t>(y + j) * ow + x] += k[j] * v;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[static_cast<std::size_t>(y) * ow + x];
      for (int j = 0; j < kWindow; ++j) out[static_cast<std::size_t>(y) * w + x + j] += k[j] * v;
    }
  }
  return out;
}

void check_same_shape(const Image& a, const Image& b, const char* who) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ContractError(std::string(who) + ": image dimensions differ");
  }
}

}  // namespace

double psnr(const Image& pred, const Image& gt, const Mask* mask) {
  check_same_shape(pred, gt, "psnr");
  if (mask && (mask->width != pred.width() || mask->height != pred.height())) {
    throw ContractError("psnr: mask dimensions differ from the image");
  }
  const auto p = pred.data();
  const auto g = gt.data();
  double sse = 0.0;
  std::size_t count = 0;
  for (std::size_t pix = 0; pix < pred.pixel_count(); ++pix) {
    if (mask && !mask->values[pix]) continue;
    for (int c = 0; c < 3; ++c) {
      const double d = p[3 * pix + c] - g[3 * pix + c];
      sse += d * d;
    }
    count += 3;
  }
  if (count == 0) throw ContractError("psnr: mask selects no pixels");
  const double mse = sse / static_cast<double>(count);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& pred, const Image& gt) { return ssim_with_grad(pred, gt, nullptr); }

double ssim_with_grad(const Image& pred, const Image& gt, Image* d_pred) {
  check_same_shape(pred, gt, "ssim");
  const int h = pred.height(), w = pred.width();
  if (h < kWindow || w < kWindow) throw ContractError("ssim: images must be at least 11x11");
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  const std::size_t n_px = static_cast<std::size_t>(h) * w;
  const std::size_t n_win = static_cast<std::size_t>(oh) * ow;
  const double norm = 1.0 / (3.0 * static_cast<double>(n_win));

  if (d_pred) *d_pred = Image(w, h, 0.0);
  double total = 0.0;
  std::vector<double> x(n_px), y(n_px), xx(n_px), yy(n_px), xy(n_px);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n_px; ++i) {
      x[i] = pred.data()[3 * i + c];
      y[i] = gt.data()[3 * i + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mu_x = filter_valid(x, h, w);
    const auto mu_y = filter_valid(y, h, w);
    const auto e_xx = filter_valid(xx, h, w);
    const auto e_yy = filter_valid(yy, h, w);
    const auto e_xy = filter_valid(xy, h, w);

    std::vector<double> g_mu, g_xx, g_xy;
    if (d_pred) {
      g_mu.resize(n_win);
      g_xx.resize(n_win);
      g_xy.resize(n_win);
    }
    for (std::size_t k = 0; k < n_win; ++k) {
      const double mx = mu_x[k], my = mu_y[k];
      const double sxx = e_xx[k] - mx * mx;
      const double syy = e_yy[k] - my * my;
      const double sxy = e_xy[k] - mx * my;
      const double a1 = 2.0 * mx * my + kC1, a2 = 2.0 * sxy + kC2;
      const double b1 = mx * mx + my * my + kC1, b2 = sxx + syy + kC2;
      const double s = (a1 * a2) / (b1 * b2);
      total += s;
      if (d_pred) {
        g_mu[k] = norm * (2.0 * my * (a2 - a1) / (b1 * b2) - 2.0 * mx * s / b1 + 2.0 * mx * s / b2);
        g_xx[k] = norm * (-s / b2);
        g_xy[k] = norm * (2.0 * a1 / (b1 * b2));
      }
    }
    if (d_pred) {
      const auto t_mu = filter_valid_transpose(g_mu, h, w);
      const auto t_xx = filter_valid_transpose(g_xx, h, w);
      const auto t_xy = filter_valid_transpose(g_xy, h, w);
      auto d = d_pred->data();
      for (std::size_t i = 0; i < n_px; ++i) d[3 * i + c] = t_mu[i] + 2.0 * x[i] * t_xx[i] + y[i] * t_xy[i];
    }
  }
  return total / (3.0 * static_cast<double>(n_win));
}

}  // namespace growflow::metrics
