#include <catch_amalgamated.hpp>

#include <numbers>

#include "helpers.hpp"

using namespace shnn;
using namespace testing_support;

namespace {

PhaseVelocity harmonic(const PhaseState& s) { return {s.p, -s.q}; }
double harmonic_energy(const PhaseState& s) { return 0.5 * (s.q.squaredNorm() + s.p.squaredNorm()); }

PhaseState scalar_state(double q, double p) { return {Vec::Constant(1, q), Vec::Constant(1, p)}; }

} // namespace

TEST_CASE("one symplectic Euler step on the harmonic oscillator", "[dynamics]") {
    const PhaseState next = symplectic_euler_step(harmonic, scalar_state(1.0, 0.0), 0.01);
    CHECK(next.p[0] == -0.01);
    CHECK(std::abs(next.q[0] - 0.9999) < 1e-15);
}

TEST_CASE("zero field keeps the state", "[dynamics]") {
    const FieldFn zero = [](const PhaseState& s) { return PhaseVelocity{Vec::Zero(s.n()), Vec::Zero(s.n())}; };
    const Trajectory tr = symplectic_euler(zero, scalar_state(0.3, -0.2), 0.1, 1.0, harmonic_energy);
    CHECK(tr.size() == 11);
    for (const auto& s : tr.states) {
        CHECK(s.q[0] == 0.3);
        CHECK(s.p[0] == -0.2);
    }
}

TEST_CASE("time grid and step count", "[dynamics]") {
    const auto sys = make_system("henon_heiles");
    const auto start = *default_initial_state(*sys);
    const FieldFn f = [&](const PhaseState& s) { return sys->vector_field(s); };
    const EnergyFn h = [&](const PhaseState& s) { return sys->hamiltonian(s); };
    const Trajectory tr = symplectic_euler(f, start, 0.01, 6 * std::numbers::pi, h);
    CHECK(tr.size() == 1885);
    CHECK(std::abs(tr.energies[0] - 0.166) < 5e-4);
    for (std::size_t k = 0; k < tr.size(); ++k)
        CHECK(std::abs(tr.times[k] - static_cast<double>(k) * 0.01) < 1e-12);
    CHECK(io::lines(trajectory_csv(tr)).size() == 1886);
    CHECK(step_count(0.1, 1.0) == 10);
    CHECK_THROWS_AS(symplectic_euler(f, start, 0.0, 1.0, h), ConfigError);
    CHECK_THROWS_AS(symplectic_euler(f, start, 0.01, -1.0, h), ConfigError);
}

TEST_CASE("pendulum energy drift stays small", "[dynamics][property]") {
    const auto sys = make_system("pendulum");
    const FieldFn f = [&](const PhaseState& s) { return sys->vector_field(s); };
    const EnergyFn h = [&](const PhaseState& s) { return sys->hamiltonian(s); };
    for (double q0 : {0.5, 1.5, 3.0}) {
        const Trajectory tr = symplectic_euler(f, scalar_state(q0, 0.2), 0.01, 6 * std::numbers::pi, h);
        double drift = 0.0;
        for (double e : tr.energies)
            drift = std::max(drift, std::abs(e - tr.energies[0]));
        CHECK(drift <= 0.05 * std::max(1.0, std::abs(tr.energies[0])));
    }
}

TEST_CASE("reversed field retraces the position-first scheme", "[dynamics][property]") {
    const auto sys = make_system("henon_heiles");
    const FieldFn f = [&](const PhaseState& s) { return sys->vector_field(s); };
    const FieldFn reversed = [&](const PhaseState& s) {
        const auto v = sys->vector_field(s);
        return PhaseVelocity{-v.dq, -v.dp};
    };
    const double h = 0.01;
    PhaseState s = *default_initial_state(*sys);
    std::vector<PhaseState> forward{s};
    for (int k = 0; k < 100; ++k)
        forward.push_back(s = symplectic_euler_step(f, s, h, EulerOrder::position_first));
    // the momentum-first step is the adjoint of the position-first one
    for (int k = 100; k > 0; --k) {
        s = symplectic_euler_step(reversed, s, h, EulerOrder::momentum_first);
        CHECK((s.z() - forward[static_cast<std::size_t>(k - 1)].z()).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("trajectory comparison", "[dynamics]") {
    const auto sys = make_system("toda");
    const FieldFn f = [&](const PhaseState& s) { return sys->vector_field(s); };
    const EnergyFn h = [&](const PhaseState& s) { return sys->hamiltonian(s); };
    PhaseState start = PhaseState::zeros(3);
    start.q << 0.1, -0.2, 0.05;
    start.p << 0.3, 0.0, -0.1;
    const Trajectory ref = symplectic_euler(f, start, 0.01, 1.0, h);
    const RolloutMetrics same = compare(ref, ref, h);
    CHECK(same.cum_rmse_position == 0.0);
    CHECK(same.final_rmse_position == 0.0);
    CHECK(same.cum_rmse_energy == 0.0);

    Trajectory shifted = ref;
    Vec c(3);
    c << 0.3, -0.4, 1.2;
    for (auto& s : shifted.states)
        s.q += c;
    const RolloutMetrics m = compare(ref, shifted, h);
    CHECK(std::abs(m.final_rmse_position - c.norm() / std::sqrt(3.0)) < 1e-12);
    CHECK(std::abs(m.cum_rmse_position - c.norm() / std::sqrt(3.0)) < 1e-12);
    CHECK(m.cum_rmse_energy > 0.0);

    Trajectory short_tr = ref;
    short_tr.states.pop_back();
    short_tr.times.pop_back();
    short_tr.energies.pop_back();
    CHECK_THROWS_AS(compare(ref, short_tr, h), ConfigError);
}

TEST_CASE("trajectory csv round trip", "[dynamics]") {
    const auto sys = make_system("coupled3");
    const FieldFn f = [&](const PhaseState& s) { return sys->vector_field(s); };
    const EnergyFn h = [&](const PhaseState& s) { return sys->hamiltonian(s); };
    PhaseState start = PhaseState::zeros(3);
    start.q << 0.2, 0.0, -0.1;
    const Trajectory tr = symplectic_euler(f, start, 0.05, 1.0, h);
    const std::string csv = trajectory_csv(tr);
    CHECK(io::lines(csv)[0] == "t,q1,q2,q3,p1,p2,p3,H");
    const Trajectory back = parse_trajectory_csv(csv);
    REQUIRE(back.size() == tr.size());
    for (std::size_t k = 0; k < tr.size(); ++k) {
        CHECK(back.states[k].z() == tr.states[k].z());
        CHECK(back.energies[k] == tr.energies[k]);
    }
    CHECK_THROWS_AS(parse_trajectory_csv("t,q1,p1,H\n0,1,2\n"), ParseError);
}

TEST_CASE("divergent rollouts report the last valid step", "[dynamics]") {
    const FieldFn blow = [](const PhaseState& s) { return PhaseVelocity{s.p, 1e200 * s.q.cwiseAbs2()}; };
    try {
        symplectic_euler(blow, scalar_state(1.0, 1.0), 0.1, 10.0, harmonic_energy);
        FAIL("expected divergence");
    } catch (const RolloutDiverged& e) {
        CHECK(e.partial.size() == e.last_valid + 1);
        CHECK(e.partial.states.back().finite());
    }
}
