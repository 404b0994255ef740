#include "helfrich/series.hpp"

#include <iomanip>
#include <ostream>

namespace helfrich {

void write_series_header(std::ostream& out) {
  for (std::size_t i = 0; i < kSeriesColumns.size(); ++i) {
    if (i) out << ',';
    out << kSeriesColumns[i];
  }
  out << '\n';
}

void write_series_row(std::ostream& out, const TimeSeriesRecord& r) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(17) << r.t << ',' << r.dt << ',' << r.area << ',' << r.volume << ',' << r.willmore << ','
      << r.willmore0 << ',' << r.helfrich << ',' << r.penalized << ',' << r.mean_curvature_integral << ','
      << r.sup_asq << ',' << r.gradient_norm << ',' << r.clamp_mass << ',' << r.step_rejections << '\n';
  out.flags(flags);
  out.precision(precision);
}

}  // namespace helfrich
