#include "fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace slowlight::detail {

namespace {
// FFTW planning is not re-entrant; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
} // namespace

void fft2d(std::vector<std::complex<double>>& data, int n0, int n1, int sign) {
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_2d(n0, n1, buf, buf, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(plan);
}

} // namespace slowlight::detail
