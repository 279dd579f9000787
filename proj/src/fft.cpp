#include "qmri/fft.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace qmri {

namespace detail {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace {

// Twiddles for a length-n transform, forward sign; the inverse conjugates.
struct Plan {
    int n = 0;
    std::vector<int> bitrev;
    std::vector<Complex> twiddle;  // w[k] = exp(-2 pi i k / n), k < n/2

    explicit Plan(int n_) : n(n_), bitrev(n_), twiddle(n_ / 2) {
        int log2n = 0;
        while ((1 << log2n) < n) ++log2n;
        for (int i = 0; i < n; ++i) {
            int r = 0;
            for (int b = 0; b < log2n; ++b) r |= ((i >> b) & 1) << (log2n - 1 - b);
            bitrev[i] = r;
        }
        const double step = -2.0 * 3.14159265358979323846 / n;
        for (int k = 0; k < n / 2; ++k) twiddle[k] = Complex(std::cos(step * k), std::sin(step * k));
    }

    void transform(Complex* a, int sign) const {
        for (int i = 0; i < n; ++i) {
            const int j = bitrev[i];
            if (i < j) std::swap(a[i], a[j]);
        }
        for (int len = 2; len <= n; len <<= 1) {
            const int half = len >> 1;
            const int stride = n / len;
            for (int base = 0; base < n; base += len) {
                for (int k = 0; k < half; ++k) {
                    Complex w = twiddle[static_cast<std::size_t>(k) * stride];
                    if (sign > 0) w = std::conj(w);
                    const Complex u = a[base + k];
                    const Complex v = a[base + k + half] * w;
                    a[base + k] = u + v;
                    a[base + k + half] = u - v;
                }
            }
        }
    }
};

const Plan& plan_for(int n) {
    // Plans are tiny; keep one per size for the lifetime of the process.
    // unique_ptr keeps addresses stable; the mutex guards concurrent lookups.
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Plan>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, std::make_unique<Plan>(n)).first;
    return *it->second;
}

}  // namespace

void fft2_inplace(ComplexGrid& g, int sign) {
    const int n = g.size();
    const Plan& plan = plan_for(n);
    for (int row = 0; row < n; ++row) plan.transform(g.data() + static_cast<std::size_t>(row) * n, sign);
    std::vector<Complex> col(n);
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) col[r] = g(r, c);
        plan.transform(col.data(), sign);
        for (int r = 0; r < n; ++r) g(r, c) = col[r];
    }
}

}  // namespace detail

namespace {

void check_shape(const ComplexGrid& g) {
    if (!detail::is_power_of_two(g.size())) {
        throw std::invalid_argument("dft2: grid size must be a power of two");
    }
}

}  // namespace

ComplexGrid dft2(const ComplexGrid& image) {
    check_shape(image);
    ComplexGrid out = image;
    detail::fft2_inplace(out, -1);
    const double scale = 1.0 / out.size();  // sqrt(N*N)
    for (std::size_t i = 0; i < out.count(); ++i) out[i] *= scale;
    return out;
}

ComplexGrid idft2(const ComplexGrid& spectrum) {
    check_shape(spectrum);
    ComplexGrid out = spectrum;
    detail::fft2_inplace(out, +1);
    const double scale = 1.0 / out.size();
    for (std::size_t i = 0; i < out.count(); ++i) out[i] *= scale;
    return out;
}

}  // namespace qmri
