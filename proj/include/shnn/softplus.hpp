#pragma once

#include <cmath>

namespace shnn {

struct SoftplusTriple {
    double value;
    double first;
    double second;
};

/// softplus and its derivatives up to third order from one exponential.
/// The logistic and its complement are both formed without cancellation.
struct SoftplusJet {
    double value;
    double first;
    double second;
    double third;
};

inline SoftplusJet softplus_jet(double x) {
    const double e = std::exp(-std::abs(x));
    const double inv = 1.0 / (1.0 + e);
    // sig = logistic(x), cmp = 1 - logistic(x)
    const double sig = x >= 0.0 ? inv : e * inv;
    const double cmp = x >= 0.0 ? e * inv : inv;
    double value;
    if (x > 30.0)
        value = x + e;
    else if (x < -30.0)
        value = e;
    else
        value = x > 0.0 ? x + std::log1p(e) : std::log1p(e);
    const double second = sig * cmp;
    return {value, sig, second, second * (cmp - sig)};
}

inline SoftplusTriple softplus_triple(double x) {
    const SoftplusJet j = softplus_jet(x);
    return {j.value, j.first, j.second};
}

} // namespace shnn
