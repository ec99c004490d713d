#pragma once

#include <complex>
#include <vector>

namespace dynconn::detail {

/// Unnormalized in-place DFT of any length (FFTW, estimate planning).
void dft_inplace(std::vector<std::complex<double>>& data, bool inverse);

}  // namespace dynconn::detail
