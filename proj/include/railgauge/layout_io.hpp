#pragma once

#include "railgauge/track_model.hpp"

#include <iosfwd>
#include <string>

namespace railgauge {

// Layout text format, one record per line, '#' starts a comment:
//
//   half_gauge <m>
//   rail_inclination <rad>
//   H straight|circular|transition <length> <radius_start> <radius_end> <cant_start> <cant_end>
//   V slope|transition <length> <slope_start> <slope_end>
//
// Radii are signed (negative for right-hand curves); "inf" denotes a straight end.
TrackLayout parse_layout(std::istream& in, const std::string& source);
TrackLayout load_layout(const std::string& path);
void save_layout(const TrackLayout& layout, const std::string& path);

/// CSV with columns s,y_lir,z_lir,y_rir,z_rir on a uniform grid.
IrregularityField load_irregularities(const std::string& path);
void save_irregularities(const IrregularityField& field, const std::string& path);

}  // namespace railgauge
