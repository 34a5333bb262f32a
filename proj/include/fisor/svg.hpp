#ifndef FISOR_SVG_HPP
#define FISOR_SVG_HPP

#include <string>
#include <vector>

#include "fisor/env.hpp"

namespace fisor {

// Region heatmap: res x res cell values over the arena, zero level set of
// the value grid, oracle boundary, hazards and goal. Vector output only.
void write_region_svg(const std::string& path, const EnvConfig& cfg, int res,
                      const std::vector<double>& value_grid,
                      const std::vector<std::uint8_t>& oracle_grid);

}  // namespace fisor

#endif
