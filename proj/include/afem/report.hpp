#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "afem/adapt.hpp"

namespace afem {

void write_run_header(std::ostream& os);
void write_run_row(std::ostream& os, const AdaptRecord& r);
void write_run_csv(std::ostream& os, const std::vector<AdaptRecord>& records);

/// key=value block.
void write_constants(std::ostream& os, const EmpiricalConstants& c, const MonotonicityConstants& m);

struct Series {
  std::string name;
  std::vector<double> x, y;
};
/// Self-contained log-log plot, one polyline per series.
void write_loglog_svg(std::ostream& os, const std::vector<Series>& series, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel);

}  // namespace afem
