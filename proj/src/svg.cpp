#include "fisor/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "fisor/errors.hpp"

namespace fisor {

namespace {

constexpr double kCanvas = 640.0;

struct Mapper {
  double half;
  double to_px(double v) const { return (v + half) / (2.0 * half) * kCanvas; }
  // SVG y axis points down.
  double to_py(double v) const { return kCanvas - (v + half) / (2.0 * half) * kCanvas; }
};

std::string cell_color(double value, double scale) {
  // Diverging map: negative (feasible) blue, positive (infeasible) red.
  const double t = std::clamp(value / scale, -1.0, 1.0);
  int r, g, b;
  if (t <= 0.0) {
    const double u = -t;
    r = static_cast<int>(245 - 155 * u);
    g = static_cast<int>(245 - 105 * u);
    b = 245;
  } else {
    r = 245;
    g = static_cast<int>(245 - 175 * t);
    b = static_cast<int>(245 - 185 * t);
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", r, g, b);
  return buf;
}

// Marching-squares segments for the given iso level of a cell-centred grid.
void append_contour(std::string& out, const Mapper& m, int res,
                    const std::vector<double>& grid, double level, const char* style) {
  const double cell = 2.0 * m.half / res;
  auto at = [&](int ix, int iy) { return grid[static_cast<std::size_t>(iy) * res + ix]; };
  auto cx = [&](int ix) { return -m.half + (ix + 0.5) * cell; };

  for (int iy = 0; iy + 1 < res; ++iy) {
    for (int ix = 0; ix + 1 < res; ++ix) {
      const double v00 = at(ix, iy), v10 = at(ix + 1, iy);
      const double v01 = at(ix, iy + 1), v11 = at(ix + 1, iy + 1);
      int mask = 0;
      if (v00 > level) mask |= 1;
      if (v10 > level) mask |= 2;
      if (v11 > level) mask |= 4;
      if (v01 > level) mask |= 8;
      if (mask == 0 || mask == 15) continue;

      auto lerp = [&](double a, double b) {
        const double d = b - a;
        return std::fabs(d) < 1e-300 ? 0.5 : (level - a) / d;
      };
      // Edge midpoints (bottom, right, top, left in grid coordinates).
      const double xb = cx(ix) + cell * lerp(v00, v10), yb = cx(iy);
      const double xr = cx(ix + 1), yr = cx(iy) + cell * lerp(v10, v11);
      const double xt = cx(ix) + cell * lerp(v01, v11), yt = cx(iy + 1);
      const double xl = cx(ix), yl = cx(iy) + cell * lerp(v00, v01);

      auto segment = [&](double x1, double y1, double x2, double y2) {
        char buf[192];
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" %s/>\n",
                      m.to_px(x1), m.to_py(y1), m.to_px(x2), m.to_py(y2), style);
        out += buf;
      };
      switch (mask) {
        case 1: case 14: segment(xb, yb, xl, yl); break;
        case 2: case 13: segment(xb, yb, xr, yr); break;
        case 3: case 12: segment(xl, yl, xr, yr); break;
        case 4: case 11: segment(xr, yr, xt, yt); break;
        case 6: case 9: segment(xb, yb, xt, yt); break;
        case 7: case 8: segment(xl, yl, xt, yt); break;
        case 5: segment(xb, yb, xl, yl); segment(xr, yr, xt, yt); break;
        case 10: segment(xb, yb, xr, yr); segment(xl, yl, xt, yt); break;
      }
    }
  }
}

}  // namespace

void write_region_svg(const std::string& path, const EnvConfig& cfg, int res,
                      const std::vector<double>& value_grid,
                      const std::vector<std::uint8_t>& oracle_grid) {
  if (static_cast<int>(value_grid.size()) != res * res ||
      static_cast<int>(oracle_grid.size()) != res * res)
    throw ConfigError("region svg: grid size mismatch");

  const Mapper m{cfg.arena_half_width};
  const double cell_px = kCanvas / res;

  double scale = 1e-9;
  for (double v : value_grid) scale = std::max(scale, std::fabs(v));

  std::string out;
  out.reserve(value_grid.size() * 64);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                kCanvas, kCanvas, kCanvas, kCanvas);
  out += buf;

  for (int iy = 0; iy < res; ++iy) {
    for (int ix = 0; ix < res; ++ix) {
      const double x = -cfg.arena_half_width + (ix + 0.5) * 2.0 * cfg.arena_half_width / res;
      const double y = -cfg.arena_half_width + (iy + 0.5) * 2.0 * cfg.arena_half_width / res;
      const double v = value_grid[static_cast<std::size_t>(iy) * res + ix];
      std::snprintf(buf, sizeof(buf),
                    "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                    m.to_px(x) - cell_px / 2.0, m.to_py(y) - cell_px / 2.0, cell_px, cell_px,
                    cell_color(v, scale).c_str());
      out += buf;
    }
  }

  // Zero level set of the value, then the oracle boundary (0.5 level of the
  // binary grid).
  append_contour(out, m, res, value_grid, 0.0,
                 "stroke=\"#202020\" stroke-width=\"2.0\"");
  std::vector<double> oracle_d(oracle_grid.begin(), oracle_grid.end());
  append_contour(out, m, res, oracle_d, 0.5,
                 "stroke=\"#0a7d32\" stroke-width=\"2.0\" stroke-dasharray=\"6,4\"");

  for (const auto& hz : cfg.hazard_centers) {
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"none\" "
                  "stroke=\"#666666\" stroke-width=\"2.5\"/>\n",
                  m.to_px(hz.x), m.to_py(hz.y), cfg.hazard_radius / (2.0 * m.half) * kCanvas);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"none\" "
                "stroke=\"#0a7d32\" stroke-width=\"2.5\"/>\n",
                m.to_px(cfg.goal_center.x), m.to_py(cfg.goal_center.y),
                cfg.goal_radius / (2.0 * m.half) * kCanvas);
  out += buf;
  out += "</svg>\n";

  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError(DataError::Kind::io, "region svg: cannot open " + path);
  f << out;
}

}  // namespace fisor
