#pragma once

#include "qmri/grid.hpp"

namespace qmri {

/// Unitary 2-D DFT of a square power-of-two grid: idft2(dft2(x)) == x and
/// ||dft2(x)||_2 == ||x||_2. Throws std::invalid_argument otherwise.
ComplexGrid dft2(const ComplexGrid& image);
ComplexGrid idft2(const ComplexGrid& spectrum);

namespace detail {
bool is_power_of_two(int n);
/// In-place radix-2 transform of all rows then all columns; sign = -1 forward.
void fft2_inplace(ComplexGrid& g, int sign);
}  // namespace detail

}  // namespace qmri
