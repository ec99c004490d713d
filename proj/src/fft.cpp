#include "fft.hpp"

#include <mutex>

#include <fftw3.h>

namespace dynconn::detail {

namespace {

// FFTW planning is not thread-safe; plan execution is.
std::mutex planner_mutex;

}  // namespace

void dft_inplace(std::vector<std::complex<double>>& data, bool inverse) {
  if (data.empty()) return;
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex);
    plan = fftw_plan_dft_1d(static_cast<int>(data.size()), ptr, ptr, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard lock(planner_mutex);
  fftw_destroy_plan(plan);
}

}  // namespace dynconn::detail
