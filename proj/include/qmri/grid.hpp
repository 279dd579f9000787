#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qmri {

using Complex = std::complex<double>;

/// Square N×N image or k-space grid, row-major.
template <typename T>
class Grid {
public:
    Grid() = default;
    explicit Grid(int n, T value = T{}) : n_(n), v_(static_cast<std::size_t>(n) * n, value) {
        if (n <= 0) throw std::invalid_argument("Grid: size must be positive");
    }

    int size() const { return n_; }
    std::size_t count() const { return v_.size(); }

    T& operator()(int row, int col) { return v_[static_cast<std::size_t>(row) * n_ + col]; }
    const T& operator()(int row, int col) const {
        return v_[static_cast<std::size_t>(row) * n_ + col];
    }
    T& operator[](std::size_t i) { return v_[i]; }
    const T& operator[](std::size_t i) const { return v_[i]; }

    T* data() { return v_.data(); }
    const T* data() const { return v_.data(); }

    bool same_shape(const Grid& other) const { return n_ == other.n_; }

private:
    int n_ = 0;
    std::vector<T> v_;
};

using RealGrid = Grid<double>;
using ComplexGrid = Grid<Complex>;
using BoolGrid = Grid<unsigned char>;

inline double squared_norm(const RealGrid& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.count(); ++i) s += g[i] * g[i];
    return s;
}

inline double squared_norm(const ComplexGrid& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.count(); ++i) s += std::norm(g[i]);
    return s;
}

}  // namespace qmri
