#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "shnn/error.hpp"
#include "shnn/io.hpp"
#include "shnn/systems.hpp"

namespace shnn {

using FieldFn = std::function<PhaseVelocity(const PhaseState&)>;
using EnergyFn = std::function<double(const PhaseState&)>;

struct Trajectory {
    std::vector<double> times;
    std::vector<PhaseState> states;
    std::vector<double> energies;

    std::size_t size() const { return states.size(); }
};

/// Thrown when a rollout leaves the finite range; `last_valid` indexes the
/// last finite state.
struct RolloutDiverged : NumericError {
    RolloutDiverged(std::size_t last_valid, Trajectory partial)
        : NumericError("rollout became non-finite after step " + std::to_string(last_valid)),
          last_valid(last_valid), partial(std::move(partial)) {}
    std::size_t last_valid;
    Trajectory partial;
};

enum class EulerOrder {
    /// p' = p + h pdot(q, p);  q' = q + h qdot(q, p')
    momentum_first,
    /// q' = q + h qdot(q, p);  p' = p + h pdot(q', p)
    position_first,
};

inline PhaseState symplectic_euler_step(const FieldFn& field, const PhaseState& s, double h,
                                        EulerOrder order = EulerOrder::momentum_first) {
    if (order == EulerOrder::momentum_first) {
        PhaseState next = s;
        next.p = s.p + h * field(s).dp;
        next.q = s.q + h * field(next).dq;
        return next;
    }
    PhaseState next = s;
    next.q = s.q + h * field(s).dq;
    next.p = s.p + h * field(next).dp;
    return next;
}

/// Number of steps of size h that fit in [0, t_end].
inline std::size_t step_count(double h, double t_end) {
    return static_cast<std::size_t>(std::floor(t_end / h * (1.0 + 1e-12)));
}

inline Trajectory symplectic_euler(const FieldFn& field, const PhaseState& start, double h, double t_end,
                                   const EnergyFn& energy, EulerOrder order = EulerOrder::momentum_first) {
    if (!(h > 0.0) || !(t_end > 0.0))
        throw ConfigError("rollout needs a positive step and end time");
    if (!start.finite())
        throw ConfigError("rollout start state is not finite");
    const std::size_t steps = step_count(h, t_end);
    Trajectory tr;
    tr.times.reserve(steps + 1);
    tr.states.reserve(steps + 1);
    tr.energies.reserve(steps + 1);
    tr.times.push_back(0.0);
    tr.states.push_back(start);
    tr.energies.push_back(energy(start));
    for (std::size_t k = 1; k <= steps; ++k) {
        PhaseState next = symplectic_euler_step(field, tr.states.back(), h, order);
        if (!next.finite())
            throw RolloutDiverged(k - 1, std::move(tr));
        tr.times.push_back(static_cast<double>(k) * h);
        tr.energies.push_back(energy(next));
        tr.states.push_back(std::move(next));
    }
    return tr;
}

struct RolloutMetrics {
    double cum_rmse_position = 0.0;
    double final_rmse_position = 0.0;
    double cum_rmse_energy = 0.0;
};

/// Position RMSE per step (over the n coordinates), its mean over steps and
/// its final value; energy error is the RMSE over steps of the true
/// Hamiltonian evaluated on both trajectories.
inline RolloutMetrics compare(const Trajectory& reference, const Trajectory& candidate, const EnergyFn& true_h) {
    if (reference.size() != candidate.size() || reference.size() == 0)
        throw ConfigError("trajectories must be nonempty and of equal length (" +
                          std::to_string(reference.size()) + " vs " + std::to_string(candidate.size()) + ")");
    for (std::size_t k = 0; k < reference.size(); ++k)
        if (std::abs(reference.times[k] - candidate.times[k]) > 1e-12)
            throw ConfigError("trajectories use different time grids");
    RolloutMetrics m;
    const double n = static_cast<double>(reference.states[0].n());
    double pos_sum = 0.0, energy_sq = 0.0, last = 0.0;
    for (std::size_t k = 0; k < reference.size(); ++k) {
        last = std::sqrt((candidate.states[k].q - reference.states[k].q).squaredNorm() / n);
        pos_sum += last;
        const double de = true_h(candidate.states[k]) - true_h(reference.states[k]);
        energy_sq += de * de;
    }
    const double steps = static_cast<double>(reference.size());
    m.cum_rmse_position = pos_sum / steps;
    m.final_rmse_position = last;
    m.cum_rmse_energy = std::sqrt(energy_sq / steps);
    return m;
}

inline std::string trajectory_csv(const Trajectory& tr) {
    if (tr.size() == 0)
        throw ConfigError("empty trajectory");
    const Index n = tr.states[0].n();
    std::vector<std::string> head{"t"};
    for (const char* prefix : {"q", "p"})
        for (Index i = 1; i <= n; ++i)
            head.push_back(prefix + std::to_string(i));
    head.push_back("H");
    std::string out = io::join(head) + "\n";
    for (std::size_t k = 0; k < tr.size(); ++k) {
        std::string row = io::format_double(tr.times[k]);
        for (const Vec* v : {&tr.states[k].q, &tr.states[k].p})
            for (Index i = 0; i < n; ++i)
                row += "," + io::format_double((*v)[i]);
        row += "," + io::format_double(tr.energies[k]);
        out += row + "\n";
    }
    return out;
}

inline Trajectory parse_trajectory_csv(const std::string& text) {
    const auto lines = io::lines(text);
    if (lines.empty())
        throw ParseError("empty trajectory file", 1);
    const auto head = io::split(lines[0]);
    if (head.size() < 4 || head.size() % 2 != 0 || head.front() != "t" || head.back() != "H")
        throw ParseError("expected header t,q1..qn,p1..pn,H", 1);
    const Index n = static_cast<Index>((head.size() - 2) / 2);
    Trajectory tr;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (lines[l].empty())
            continue;
        const auto c = io::split(lines[l]);
        if (c.size() != head.size())
            throw ParseError("expected " + std::to_string(head.size()) + " columns", l + 1);
        std::vector<double> v;
        for (auto cell : c) {
            const auto x = io::parse_double(cell);
            if (!x)
                throw ParseError("malformed number '" + std::string(cell) + "'", l + 1);
            v.push_back(*x);
        }
        PhaseState s{Vec(n), Vec(n)};
        for (Index i = 0; i < n; ++i) {
            s.q[i] = v[1 + i];
            s.p[i] = v[1 + n + i];
        }
        tr.times.push_back(v.front());
        tr.states.push_back(std::move(s));
        tr.energies.push_back(v.back());
    }
    if (tr.size() == 0)
        throw ParseError("trajectory file has no rows", 2);
    return tr;
}

inline std::string rollout_metrics_csv_header() {
    return "model,system,seed,cum_rmse_position,final_rmse_position,cum_rmse_energy";
}

inline std::string rollout_metrics_row(const std::string& model, const std::string& system, std::uint64_t seed,
                                       const RolloutMetrics& m) {
    return model + "," + system + "," + std::to_string(seed) + "," + io::format_double(m.cum_rmse_position) + "," +
           io::format_double(m.final_rmse_position) + "," + io::format_double(m.cum_rmse_energy);
}

} // namespace shnn
