#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include "shnn/shnn.hpp"

namespace testing_support {

using namespace shnn;

/// Uniform state inside the system's sampling box.
inline PhaseState random_state(const SystemDef& sys, Rng& rng) {
    PhaseState s = PhaseState::zeros(sys.n());
    for (Index i = 0; i < sys.n(); ++i) {
        s.q[i] = rng.uniform(sys.domain_q().lo, sys.domain_q().hi);
        s.p[i] = rng.uniform(sys.domain_p().lo, sys.domain_p().hi);
    }
    return s;
}

inline ScalarField model_scalar(const HamiltonianModel& m) {
    return [&m](const Vec& z) { return predict_h(m, PhaseState::from_z(z)); };
}

inline ScalarField system_scalar(const SystemDef& sys) {
    return [&sys](const Vec& z) { return sys.hamiltonian(PhaseState::from_z(z)); };
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("shnn_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline bool bitwise_equal(const Mat& a, const Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        return false;
    return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace testing_support

namespace testing_support {

inline shnn::ExtendedField model_reference(const shnn::HamiltonianModel& m) {
    return [&m](const shnn::Vec& z) { return shnn::reference_h(m, z); };
}

} // namespace testing_support
