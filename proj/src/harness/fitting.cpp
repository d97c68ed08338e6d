#include <cmath>

#include "chronos/harness/experiments.hpp"

namespace chronos::harness {

double loglog_slope(const std::vector<double>& h, const std::vector<double>& err) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < h.size() && i < err.size(); ++i) {
    if (!(err[i] > 0.0) || !std::isfinite(err[i]) || !(h[i] > 0.0)) continue;
    const double x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) return std::nan("");
  const double d = n * sxx - sx * sx;
  if (d == 0.0) return std::nan("");
  return (n * sxy - sx * sy) / d;
}

double loglog_slope_floored(const std::vector<double>& h, const std::vector<double>& err) {
  std::vector<double> hh, ee;
  for (std::size_t i = 0; i < h.size() && i < err.size(); ++i) {
    if (err[i] > 0.0 && std::isfinite(err[i])) {
      hh.push_back(h[i]);
      ee.push_back(err[i]);
    }
  }
  if (hh.size() > 2) {
    const std::size_t k = hh.size() - 1;
    const double last = std::log(ee[k - 1] / ee[k]) / std::log(hh[k - 1] / hh[k]);
    if (last < 1.0) {
      hh.pop_back();
      ee.pop_back();
    }
  }
  return loglog_slope(hh, ee);
}

std::vector<double> dyadic_steps(int first, int last) {
  std::vector<double> h;
  for (int i = first; i <= last; ++i) h.push_back(std::ldexp(1.0, -i));
  return h;
}

}  // namespace chronos::harness
