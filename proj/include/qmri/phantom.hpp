#pragma once

#include <cstdint>
#include <vector>

#include "qmri/encoding.hpp"

namespace qmri {

/// One elliptical tissue region in normalized [-1, 1]^2 coordinates.
/// Later regions overwrite earlier ones where they overlap.
struct TissueRegion {
    double cx = 0.0, cy = 0.0;  // center
    double rx = 0.5, ry = 0.5;  // semi-axes
    double angle = 0.0;         // rotation, radians
    double t1 = 0.0, t2 = 0.0;  // ms
    Complex rho{0.0, 0.0};
};

struct ValueRanges {
    double t1_lo = 530.0, t1_hi = 5012.0;
    double t2_lo = 41.0, t2_hi = 512.0;
    double rho_lo = 80.0, rho_hi = 100.0;
};

struct PhantomSpec {
    int n = 64;
    std::vector<TissueRegion> regions;
    ValueRanges ranges;
    bool complex_rho = false;

    void validate() const;
};

ParameterMap make_phantom(const PhantomSpec& spec);

/// Brain-like stock phantom within the default value ranges.
PhantomSpec default_phantom_spec(int n);
/// Variant whose (T1, T2) values sit exactly on the fine dictionary grid
/// (multiples of 15 ms / 1.5 ms).
PhantomSpec on_grid_phantom_spec(int n);
/// Complex-rho variant: imag(rho) = C - real(rho) with C = 180.
PhantomSpec complex_phantom_spec(int n);

/// Halve the resolution by averaging the nonzero entries of each 2x2 block,
/// channel by channel; all-zero blocks stay zero.
ParameterMap shrink_average(const ParameterMap& map);

struct SynthesisResult {
    KSpaceData kspace;
    std::vector<ComplexGrid> clean_magnetization;  // rho .* T_{x,y} M, pre-noise
    double snr = 0.0;  // ||clean D||^2 / ||noise in D||^2; inf when sigma == 0
};

/// Simulate magnetization, add per-frame Gaussian noise on the effective
/// domain only, then apply the masked DFT. Frame k draws from
/// RandomStream::substream(seed, k), so frames are independently reproducible.
SynthesisResult synthesize_data(const ParameterMap& map, const PulseSequence& seq,
                                const SamplingMask& mask, double sigma, std::uint64_t seed);

/// Sigma that hits a target SNR (the documented power-ratio definition) for
/// this instance, via one probe synthesis: noise power scales as sigma^2.
double calibrate_sigma(const ParameterMap& map, const PulseSequence& seq, const SamplingMask& mask,
                       double target_snr, std::uint64_t seed);

}  // namespace qmri
