#pragma once

#include <optional>
#include <vector>

#include "qmri/dictionary.hpp"
#include "qmri/encoding.hpp"

namespace qmri {

enum class BlipStepRule { constant, halving };

struct BlipConfig {
    int iterations = 20;
    std::optional<double> mu;  // unset selects mu = s (the sub-sampling factor)
    BlipStepRule step_rule = BlipStepRule::constant;
    bool complex_rho = false;
};

struct BlipResult {
    ParameterMap map;
    std::vector<ComplexGrid> magnetization;  // final X, one grid per frame
    std::vector<double> residuals;           // ||P F X - D|| after each iteration
};

/// MRF: per-frame zero-filled inverse DFT, then per-pixel dictionary matching.
ParameterMap mrf_reconstruct(const KSpaceData& data, const Dictionary& dict,
                             bool complex_rho = false);

/// BLIP: projected Landweber iteration on the magnetization with per-pixel
/// dictionary projection and density rescaling.
BlipResult blip_reconstruct(const KSpaceData& data, const Dictionary& dict, const BlipConfig& cfg);

}  // namespace qmri
