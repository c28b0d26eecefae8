#pragma once

// The five separable benchmark Hamiltonians H(q, p) = T(q) + V(p) with
// hand-derived gradients. T is the q-dependent term and V the p-dependent
// term throughout (so V is the kinetic part for every system here).

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "shnn/error.hpp"

namespace shnn {

using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct PhaseState {
    Vec q;
    Vec p;

    PhaseState() = default;
    PhaseState(Vec q_, Vec p_) : q(std::move(q_)), p(std::move(p_)) {
        if (q.size() != p.size() || q.size() < 1)
            throw ConfigError("phase state needs q and p of equal nonzero length");
    }
    static PhaseState zeros(Index n) { return {Vec::Zero(n), Vec::Zero(n)}; }
    /// Splits z = (q, p).
    static PhaseState from_z(const Vec& z) {
        if (z.size() % 2 != 0 || z.size() == 0)
            throw ConfigError("phase vector must have even nonzero length");
        const Index n = z.size() / 2;
        return {z.head(n), z.tail(n)};
    }

    Index n() const { return q.size(); }
    Vec z() const {
        Vec out(2 * n());
        out << q, p;
        return out;
    }
    bool finite() const { return q.allFinite() && p.allFinite(); }
};

/// Time derivatives (qdot, pdot).
struct PhaseVelocity {
    Vec dq;
    Vec dp;

    Vec z() const {
        Vec out(dq.size() + dp.size());
        out << dq, dp;
        return out;
    }
};

/// Applies J = [[0, I], [-I, 0]] to a gradient (g_q, g_p), giving (g_p, -g_q).
struct SymplecticForm {
    Index n;

    PhaseVelocity apply(const Vec& grad_q, const Vec& grad_p) const {
        if (grad_q.size() != n || grad_p.size() != n)
            throw ConfigError("gradient dimension does not match symplectic form");
        return {grad_p, -grad_q};
    }
};

struct Interval {
    double lo;
    double hi;
};

struct EnergySplit {
    double t; // q-dependent term, T(0) = 0
    double v; // p-dependent term, V(0) = 0
};

class SystemDef {
public:
    virtual ~SystemDef() = default;

    virtual std::string name() const = 0;
    virtual Index n() const = 0;
    virtual Interval domain_q() const = 0;
    virtual Interval domain_p() const = 0;

    /// Unshifted additive terms exactly as in the defining formula.
    virtual double t_of_q(const Vec& q) const = 0;
    virtual double v_of_p(const Vec& p) const = 0;
    virtual Vec grad_t(const Vec& q) const = 0;
    virtual Vec grad_v(const Vec& p) const = 0;

    double hamiltonian(const PhaseState& s) const {
        check(s);
        return t_of_q(s.q) + v_of_p(s.p);
    }

    PhaseVelocity vector_field(const PhaseState& s) const {
        check(s);
        return SymplecticForm{n()}.apply(grad_t(s.q), grad_v(s.p));
    }

    EnergySplit energy_split(const PhaseState& s) const {
        check(s);
        const Vec zero = Vec::Zero(n());
        return {t_of_q(s.q) - t_of_q(zero), v_of_p(s.p) - v_of_p(zero)};
    }

    void check(const PhaseState& s) const {
        if (s.q.size() != n() || s.p.size() != n())
            throw ConfigError(name() + " expects states with n = " + std::to_string(n()) +
                              ", got q of length " + std::to_string(s.q.size()) + " and p of length " +
                              std::to_string(s.p.size()));
    }
};

using SystemPtr = std::shared_ptr<const SystemDef>;

namespace systems {

inline double half_square_norm(const Vec& v) { return 0.5 * v.squaredNorm(); }

class Pendulum final : public SystemDef {
public:
    std::string name() const override { return "pendulum"; }
    Index n() const override { return 1; }
    Interval domain_q() const override { return {-2.0 * std::numbers::pi, 2.0 * std::numbers::pi}; }
    Interval domain_p() const override { return {-1.2, 1.2}; }
    double t_of_q(const Vec& q) const override { return 1.0 - std::cos(q[0]); }
    double v_of_p(const Vec& p) const override { return half_square_norm(p); }
    Vec grad_t(const Vec& q) const override { return Vec::Constant(1, std::sin(q[0])); }
    Vec grad_v(const Vec& p) const override { return p; }
};

class AnisotropicOscillator final : public SystemDef {
public:
    std::string name() const override { return "anisotropic"; }
    Index n() const override { return 2; }
    Interval domain_q() const override { return {-0.5, 0.5}; }
    Interval domain_p() const override { return {-0.5, 0.5}; }
    double t_of_q(const Vec& q) const override {
        const double q1 = q[0], q2 = q[1];
        return 0.5 * (q1 * q1 + q2 * q2) + (0.0 * std::pow(q1, 4) + 0.05 * std::pow(q2, 4)) / 4.0;
    }
    double v_of_p(const Vec& p) const override { return std::sqrt(p.squaredNorm() + 1.0); }
    Vec grad_t(const Vec& q) const override {
        Vec g(2);
        g << q[0] + 0.0 * std::pow(q[0], 3), q[1] + 0.05 * std::pow(q[1], 3);
        return g;
    }
    Vec grad_v(const Vec& p) const override { return p / std::sqrt(p.squaredNorm() + 1.0); }
};

class HenonHeiles final : public SystemDef {
public:
    std::string name() const override { return "henon_heiles"; }
    Index n() const override { return 2; }
    Interval domain_q() const override { return {-0.5, 0.5}; }
    Interval domain_p() const override { return {-0.5, 0.5}; }
    double t_of_q(const Vec& q) const override {
        const double q1 = q[0], q2 = q[1];
        return 0.5 * (q1 * q1 + q2 * q2) + q1 * q1 * q2 - q2 * q2 * q2 / 3.0;
    }
    double v_of_p(const Vec& p) const override { return half_square_norm(p); }
    Vec grad_t(const Vec& q) const override {
        const double q1 = q[0], q2 = q[1];
        Vec g(2);
        g << q1 + 2.0 * q1 * q2, q2 + q1 * q1 - q2 * q2;
        return g;
    }
    Vec grad_v(const Vec& p) const override { return p; }
};

class TodaLattice final : public SystemDef {
public:
    std::string name() const override { return "toda"; }
    Index n() const override { return 3; }
    Interval domain_q() const override { return {-0.5, 0.5}; }
    Interval domain_p() const override { return {-0.5, 0.5}; }
    double t_of_q(const Vec& q) const override {
        return std::exp(q[0] - q[1]) + std::exp(q[1] - q[2]) + std::exp(q[2] - q[0]) - 3.0;
    }
    double v_of_p(const Vec& p) const override { return half_square_norm(p); }
    Vec grad_t(const Vec& q) const override {
        const double e12 = std::exp(q[0] - q[1]), e23 = std::exp(q[1] - q[2]), e31 = std::exp(q[2] - q[0]);
        Vec g(3);
        g << e12 - e31, e23 - e12, e31 - e23;
        return g;
    }
    Vec grad_v(const Vec& p) const override { return p; }
};

/// Nearest-neighbour chain of n unit masses with free ends.
class CoupledOscillator final : public SystemDef {
public:
    explicit CoupledOscillator(Index n = 3) : n_(n) {
        if (n < 1)
            throw ConfigError("coupled oscillator needs n >= 1");
    }
    std::string name() const override { return "coupled" + std::to_string(n_); }
    Index n() const override { return n_; }
    Interval domain_q() const override { return {-0.5, 0.5}; }
    Interval domain_p() const override { return {-0.5, 0.5}; }
    double t_of_q(const Vec& q) const override {
        double t = 0.0;
        for (Index i = 1; i < n_; ++i) {
            const double d = q[i] - q[i - 1];
            t += 0.5 * d * d;
        }
        return t;
    }
    double v_of_p(const Vec& p) const override { return half_square_norm(p); }
    Vec grad_t(const Vec& q) const override {
        Vec g = Vec::Zero(n_);
        for (Index i = 1; i < n_; ++i) {
            const double d = q[i] - q[i - 1];
            g[i] += d;
            g[i - 1] -= d;
        }
        return g;
    }
    Vec grad_v(const Vec& p) const override { return p; }

private:
    Index n_;
};

} // namespace systems

inline std::vector<std::string> system_names() {
    return {"pendulum", "anisotropic", "henon_heiles", "toda", "coupled{n}"};
}

/// Looks up a system by canonical name: pendulum, anisotropic, henon_heiles,
/// toda, or coupled{n} such as coupled3.
inline SystemPtr make_system(std::string_view name) {
    if (name == "pendulum")
        return std::make_shared<systems::Pendulum>();
    if (name == "anisotropic")
        return std::make_shared<systems::AnisotropicOscillator>();
    if (name == "henon_heiles")
        return std::make_shared<systems::HenonHeiles>();
    if (name == "toda")
        return std::make_shared<systems::TodaLattice>();
    constexpr std::string_view coupled = "coupled";
    if (name.starts_with(coupled)) {
        std::string_view digits = name.substr(coupled.size());
        Index n = 3;
        if (!digits.empty()) {
            long long parsed = 0;
            auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), parsed);
            if (ec != std::errc{} || ptr != digits.data() + digits.size() || parsed < 1)
                throw ConfigError("bad coupled oscillator size in '" + std::string(name) + "'");
            n = static_cast<Index>(parsed);
        }
        return std::make_shared<systems::CoupledOscillator>(n);
    }
    std::string valid;
    for (const auto& s : system_names())
        valid += (valid.empty() ? "" : ", ") + s;
    throw ConfigError("unknown system '" + std::string(name) + "' (valid: " + valid + ")");
}

} // namespace shnn
