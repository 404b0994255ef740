#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string_view>

namespace helfrich {

/// One row of the flow time series. Column order is fixed.
struct TimeSeriesRecord {
  double t = 0.0;
  double dt = 0.0;
  double area = 0.0;
  double volume = 0.0;
  double willmore = 0.0;
  double willmore0 = 0.0;
  double helfrich = 0.0;
  double penalized = 0.0;
  double mean_curvature_integral = 0.0;
  double sup_asq = 0.0;
  double gradient_norm = 0.0;
  double clamp_mass = 0.0;
  std::size_t step_rejections = 0;
};

inline constexpr std::array<std::string_view, 13> kSeriesColumns = {
    "t",         "dt",        "area",          "volume",     "willmore",   "willmore0",      "helfrich",
    "penalized", "int_H",     "sup_Asq",       "grad_norm",  "clamp_mass", "step_rejections"};

/// Comma-separated header row followed by newline.
void write_series_header(std::ostream& out);
/// One comma-separated row with 17 significant digits.
void write_series_row(std::ostream& out, const TimeSeriesRecord& r);

}  // namespace helfrich
