// SPDX-License-Identifier: Apache-2.0
#include "fft.hpp"

#include <fftw3.h>

namespace qpspec::detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

void fft_inplace(std::vector<std::complex<double>>& data, int L, int dim, int sign) {
  int n[4] = {L, L, L, L};
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = fftw_plan_dft(dim, n, ptr, ptr, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                         FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace qpspec::detail
