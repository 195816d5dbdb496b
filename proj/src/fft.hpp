// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <mutex>
#include <vector>

namespace qpspec::detail {

// FFTW planning is not thread safe; every plan creation and destruction
// goes through this lock.
std::mutex& fftw_planner_mutex();

// In-place unnormalized multidimensional transform on a row-major cube of
// side L in `dim` dimensions. sign = -1 forward, +1 backward.
void fft_inplace(std::vector<std::complex<double>>& data, int L, int dim, int sign);

}  // namespace qpspec::detail
