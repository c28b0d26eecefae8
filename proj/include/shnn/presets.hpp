#pragma once

#include <optional>
#include <string>

#include "shnn/diffkit.hpp"
#include "shnn/systems.hpp"

namespace shnn {

/// Per-system training configuration: learning rate and hidden widths of the
/// single network and of each conjoined sub-network.
struct SystemPreset {
    double learning_rate;
    Index baseline_width;
    Index conjoined_width;
};

inline SystemPreset preset_for(const SystemDef& sys) {
    const std::string name = sys.name();
    if (name == "pendulum")
        return {0.001, 16, 11};
    if (name == "anisotropic")
        return {0.001, 32, 22};
    if (name == "henon_heiles")
        return {0.01, 32, 22};
    if (name == "coupled10")
        return {0.01, 44, 32};
    // toda, coupled3 and any other chain length
    return {0.01, 31, 22};
}

/// Default rollout start for systems that have one.
inline std::optional<PhaseState> default_initial_state(const SystemDef& sys) {
    const std::string name = sys.name();
    if (name == "henon_heiles") {
        Vec q(2), p(2);
        q << 0.6, -0.3;
        p << 0.2, 0.2;
        return PhaseState{q, p};
    }
    if (name == "coupled10") {
        Vec q(10), p(10);
        q << 0.6, -0.3, 0.2, 0.2, 0.3, 0.1, -0.2, 0.3, 0.2, -0.2;
        // only eight momenta are published; the last two are padding
        p << 0.3, 0.1, -0.2, -0.2, 0.2, -0.3, 0.2, 0.2, 0.1, -0.1;
        return PhaseState{q, p};
    }
    return std::nullopt;
}

} // namespace shnn
