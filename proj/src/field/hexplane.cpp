#include "growflow/core/errors.hpp"
#include "growflow/field/velocity_field.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace growflow::field {

namespace {

struct Coords {
  std::array<double, 4> u{};  // normalized x, y, z, t
  std::array<bool, 4> clamped{};
};

Coords normalize(const FieldConfig& config, const double* p, double t) {
  Coords c;
  for (int d = 0; d < 3; ++d) {
    const double extent = config.bounds.max[d] - config.bounds.min[d];
    c.u[d] = (p[d] - config.bounds.min[d]) / extent;
  }
  c.u[3] = t;
  for (int d = 0; d < 4; ++d) {
    if (c.u[d] < 0.0 || c.u[d] > 1.0) {
      c.clamped[d] = true;
      c.u[d] = std::clamp(c.u[d], 0.0, 1.0);
    }
  }
  return c;
}

struct PlaneSample {
  std::size_t i00, i10, i01, i11;  // offsets of the F-vectors of the four corners
  double wa, wb;                   // fractional offsets along axes a and b
  double scale_a, scale_b;         // d(grid coordinate) / d(normalized coordinate)
};

PlaneSample sample(const Coords& c, int axis_a, int axis_b, int res_a, int res_b, int features) {
  auto locate = [](double u, int res, std::size_t& i, double& w) {
    const double f = u * (res - 1);
    const int cell = std::clamp(static_cast<int>(std::floor(f)), 0, res - 2);
    i = static_cast<std::size_t>(cell);
    w = f - cell;
  };
  std::size_t ia = 0, ib = 0;
  PlaneSample s{};
  locate(c.u[axis_a], res_a, ia, s.wa);
  locate(c.u[axis_b], res_b, ib, s.wb);
  const auto at = [&](std::size_t a, std::size_t b) { return (a * res_b + b) * static_cast<std::size_t>(features); };
  s.i00 = at(ia, ib);
  s.i10 = at(ia + 1, ib);
  s.i01 = at(ia, ib + 1);
  s.i11 = at(ia + 1, ib + 1);
  s.scale_a = res_a - 1;
  s.scale_b = res_b - 1;
  return s;
}

int axis_res(const FieldConfig& config, int level, int axis) {
  return axis < 3 ? config.spatial_res(level) : config.temporal_res(level);
}

double bilinear(const PlaneSample& s, std::span<const double> cells, int f) {
  return (1.0 - s.wa) * (1.0 - s.wb) * cells[s.i00 + f] + s.wa * (1.0 - s.wb) * cells[s.i10 + f] +
         (1.0 - s.wa) * s.wb * cells[s.i01 + f] + s.wa * s.wb * cells[s.i11 + f];
}

// Writes L*F features of one point into out.
void interp_point(std::span<const std::span<const double>> planes, const FieldConfig& config, const Coords& c,
                  double* out) {
  const int nf = config.features;
  for (int l = 0; l < config.levels; ++l) {
    double* feat = out + static_cast<std::size_t>(l) * nf;
    std::fill(feat, feat + nf, 1.0);
    for (int p = 0; p < 6; ++p) {
      const auto [a, b] = kPlaneAxes[p];
      const auto s = sample(c, a, b, axis_res(config, l, a), axis_res(config, l, b), nf);
      const auto cells = planes[static_cast<std::size_t>(l) * 6 + p];
      for (int f = 0; f < nf; ++f) feat[f] *= bilinear(s, cells, f);
    }
  }
}

}  // namespace

std::vector<double> hex_interp(const diff::ParameterStore& params, const FieldConfig& config, const Vec3& position,
                               double t, InterpStats* stats) {
  std::vector<std::span<const double>> planes;
  for (int l = 0; l < config.levels; ++l) {
    for (int p = 0; p < 6; ++p) planes.push_back(params.values(plane_segment(l, p)));
  }
  const Coords c = normalize(config, position.data(), t);
  if (stats && std::any_of(c.clamped.begin(), c.clamped.end(), [](bool b) { return b; })) ++stats->clamped;
  std::vector<double> out(static_cast<std::size_t>(config.feature_dim()));
  interp_point(planes, config, c, out.data());
  return out;
}

diff::Var hex_interp_op(diff::Tape& tape, std::span<const diff::Var> planes, const FieldConfig& config,
                        diff::Var centers, std::size_t count, double t) {
  if (planes.size() != static_cast<std::size_t>(6 * config.levels)) {
    throw ContractError("hex_interp_op: expected 6 planes per level");
  }
  if (tape.size(centers) != 3 * count) throw ContractError("hex_interp_op: centers must be count x 3");
  const std::size_t dim = static_cast<std::size_t>(config.feature_dim());

  std::vector<std::span<const double>> cells;
  for (auto v : planes) cells.push_back(tape.value(v));
  const auto pos = tape.value(centers);
  std::vector<double> out(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    interp_point(cells, config, normalize(config, &pos[3 * i], t), &out[i * dim]);
  }

  std::vector<diff::Var> inputs{centers};
  inputs.insert(inputs.end(), planes.begin(), planes.end());
  std::vector<diff::Var> plane_vars(planes.begin(), planes.end());
  return tape.custom(
      "hex_interp", std::move(inputs), std::move(out),
      [centers, plane_vars, config, count, t, dim](diff::Tape& tp, std::span<const double> g) {
        const int nf = config.features;
        std::vector<std::span<const double>> vals;
        for (auto v : plane_vars) vals.push_back(tp.value(v));
        std::vector<std::span<double>> adj(plane_vars.size());
        for (std::size_t k = 0; k < plane_vars.size(); ++k) {
          if (tp.requires_grad(plane_vars[k])) adj[k] = tp.adjoint(plane_vars[k]);
        }
        const bool want_pos = tp.requires_grad(centers);
        const auto pos = tp.value(centers);
        std::span<double> d_pos = want_pos ? tp.adjoint(centers) : std::span<double>{};

        std::array<std::vector<double>, 6> v;
        for (auto& vec : v) vec.resize(static_cast<std::size_t>(nf));
        std::vector<double> others(static_cast<std::size_t>(nf));

        for (std::size_t i = 0; i < count; ++i) {
          const Coords c = normalize(config, &pos[3 * i], t);
          std::array<double, 4> d_u{};
          for (int l = 0; l < config.levels; ++l) {
            const double* gl = &g[i * dim + static_cast<std::size_t>(l) * nf];
            std::array<PlaneSample, 6> s{};
            for (int p = 0; p < 6; ++p) {
              const auto [a, b] = kPlaneAxes[p];
              s[p] = sample(c, a, b, axis_res(config, l, a), axis_res(config, l, b), nf);
              const auto cells = vals[static_cast<std::size_t>(l) * 6 + p];
              for (int f = 0; f < nf; ++f) v[p][f] = bilinear(s[p], cells, f);
            }
            for (int p = 0; p < 6; ++p) {
              // Product of the other five planes.
              for (int f = 0; f < nf; ++f) {
                double prod = 1.0;
                for (int q = 0; q < 6; ++q) {
                  if (q != p) prod *= v[q][f];
                }
                others[f] = gl[f] * prod;
              }
              const std::size_t k = static_cast<std::size_t>(l) * 6 + p;
              const auto& sp = s[p];
              if (!adj[k].empty()) {
                for (int f = 0; f < nf; ++f) {
                  adj[k][sp.i00 + f] += (1.0 - sp.wa) * (1.0 - sp.wb) * others[f];
                  adj[k][sp.i10 + f] += sp.wa * (1.0 - sp.wb) * others[f];
                  adj[k][sp.i01 + f] += (1.0 - sp.wa) * sp.wb * others[f];
                  adj[k][sp.i11 + f] += sp.wa * sp.wb * others[f];
                }
              }
              if (want_pos) {
                const auto cells = vals[k];
                const auto [a, b] = kPlaneAxes[p];
                for (int f = 0; f < nf; ++f) {
                  const double c00 = cells[sp.i00 + f], c10 = cells[sp.i10 + f];
                  const double c01 = cells[sp.i01 + f], c11 = cells[sp.i11 + f];
                  d_u[a] += others[f] * ((c10 - c00) * (1.0 - sp.wb) + (c11 - c01) * sp.wb) * sp.scale_a;
                  d_u[b] += others[f] * ((c01 - c00) * (1.0 - sp.wa) + (c11 - c10) * sp.wa) * sp.scale_b;
                }
              }
            }
          }
          if (want_pos) {
            for (int d = 0; d < 3; ++d) {
              if (c.clamped[d]) continue;
              d_pos[3 * i + d] += d_u[d] / (config.bounds.max[d] - config.bounds.min[d]);
            }
          }
        }
      });
}

}  // namespace growflow::field
