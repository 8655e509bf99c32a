#include "railgauge/layout_io.hpp"

#include "railgauge/csv.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace railgauge {

namespace {

double parse_number(const std::string& tok, const std::string& where) {
  if (tok == "inf" || tok == "+inf") return HUGE_VAL;
  if (tok == "-inf") return -HUGE_VAL;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != tok.size()) throw InputError(where + ": '" + tok + "' is not a number");
  return v;
}

double curvature_from_radius(double r) { return std::isinf(r) ? 0.0 : 1.0 / r; }

std::string radius_text(double k) { return k == 0.0 ? "inf" : format_double(1.0 / k); }

}  // namespace

TrackLayout parse_layout(std::istream& in, const std::string& source) {
  TrackLayout layout;
  bool have_gauge = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    auto num = [&](std::size_t i) { return parse_number(tok[i], where); };

    if (tok[0] == "half_gauge" && tok.size() == 2) {
      layout.half_gauge = num(1);
      have_gauge = true;
    } else if (tok[0] == "rail_inclination" && tok.size() == 2) {
      layout.rail_inclination = num(1);
    } else if (tok[0] == "H" && tok.size() == 7) {
      HorizontalSection h;
      if (tok[1] == "straight") h.kind = HorizontalKind::Straight;
      else if (tok[1] == "circular") h.kind = HorizontalKind::Circular;
      else if (tok[1] == "transition") h.kind = HorizontalKind::Transition;
      else throw InputError(where + ": unknown horizontal section kind '" + tok[1] + "'");
      h.length = num(2);
      h.curvature_start = curvature_from_radius(num(3));
      h.curvature_end = curvature_from_radius(num(4));
      h.cant_start = num(5);
      h.cant_end = num(6);
      layout.horizontal.push_back(h);
    } else if (tok[0] == "V" && tok.size() == 5) {
      VerticalSection v;
      if (tok[1] == "slope") v.kind = VerticalKind::ConstantSlope;
      else if (tok[1] == "transition") v.kind = VerticalKind::Transition;
      else throw InputError(where + ": unknown vertical section kind '" + tok[1] + "'");
      v.length = num(2);
      v.slope_start = num(3);
      v.slope_end = num(4);
      layout.vertical.push_back(v);
    } else {
      throw InputError(where + ": unrecognised record '" + line + "'");
    }
  }
  if (!have_gauge) throw InputError(source + ": missing half_gauge record");
  try {
    validate(layout);
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
  return layout;
}

TrackLayout load_layout(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open layout file '" + path + "'");
  return parse_layout(in, path);
}

void save_layout(const TrackLayout& layout, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << "# railgauge track layout\n"
      << "# H kind length radius_start radius_end cant_start cant_end\n"
      << "# V kind length slope_start slope_end\n";
  out << "half_gauge " << format_double(layout.half_gauge) << "\n";
  out << "rail_inclination " << format_double(layout.rail_inclination) << "\n";
  for (const auto& h : layout.horizontal) {
    const char* kind = h.kind == HorizontalKind::Straight   ? "straight"
                       : h.kind == HorizontalKind::Circular ? "circular"
                                                            : "transition";
    out << "H " << kind << ' ' << format_double(h.length) << ' ' << radius_text(h.curvature_start)
        << ' ' << radius_text(h.curvature_end) << ' ' << format_double(h.cant_start) << ' '
        << format_double(h.cant_end) << "\n";
  }
  for (const auto& v : layout.vertical) {
    out << "V " << (v.kind == VerticalKind::ConstantSlope ? "slope" : "transition") << ' '
        << format_double(v.length) << ' ' << format_double(v.slope_start) << ' '
        << format_double(v.slope_end) << "\n";
  }
}

IrregularityField load_irregularities(const std::string& path) {
  const CsvTable t = read_csv(path);
  const auto s = t.numbers("s");
  const auto yl = t.numbers("y_lir"), zl = t.numbers("z_lir");
  const auto yr = t.numbers("y_rir"), zr = t.numbers("z_rir");
  if (s.size() < 2) throw InputError(path + ": irregularity field needs at least two rows");
  const double ds = (s.back() - s.front()) / static_cast<double>(s.size() - 1);
  std::vector<RailOffsets> samples(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double expected = s.front() + ds * static_cast<double>(i);
    if (std::abs(s[i] - expected) > 1e-6 * std::max(1.0, ds)) {
      throw ValidationError(path + ": irregularity grid is not uniform near s=" +
                            format_double(s[i]));
    }
    samples[i] = {yl[i], zl[i], yr[i], zr[i]};
  }
  return IrregularityField(s.front(), ds, std::move(samples));
}

void save_irregularities(const IrregularityField& field, const std::string& path) {
  CsvWriter w(path, {"s", "y_lir", "z_lir", "y_rir", "z_rir"});
  const auto& smp = field.samples();
  for (std::size_t i = 0; i < smp.size(); ++i) {
    w.cell(field.s0() + field.spacing() * static_cast<double>(i))
        .cell(smp[i].y_left)
        .cell(smp[i].z_left)
        .cell(smp[i].y_right)
        .cell(smp[i].z_right);
    w.end_row();
  }
}

}  // namespace railgauge
