#pragma once

#include <complex>
#include <span>

namespace pseudolat::fft {

using cd = std::complex<double>;

// Unitary DFT pair (1/sqrt(n) on both directions). `in` and `out` may not alias.
void forward(std::span<const cd> in, std::span<cd> out);
void inverse(std::span<const cd> in, std::span<cd> out);

}  // namespace pseudolat::fft
