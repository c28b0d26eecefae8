#pragma once

// Test-set metrics: Hamiltonian error E_H, relative vector-field error E_V
// (percent), and the energy-split errors of conjoined models.
//
// Naming of the split errors follows the source convention: E_KE compares
// the p-dependent term V(p) and E_PE the q-dependent term T(q).

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shnn/data.hpp"
#include "shnn/error.hpp"
#include "shnn/io.hpp"
#include "shnn/model.hpp"
#include "shnn/systems.hpp"

namespace shnn {

/// Anything that yields H and dH/dz for columns of Z (2n x B).
template <class P>
concept HamiltonianPredictor = requires(const P& p, const Mat& Z) {
    { p.values(Z) } -> std::convertible_to<Vec>;
    { p.gradients(Z) } -> std::convertible_to<Mat>;
};

struct NetworkPredictor {
    const HamiltonianModel& model;

    Vec values(const Mat& Z) const {
        ModelTape t;
        t.forward(model, Z, {false, false});
        return t.value();
    }
    Mat gradients(const Mat& Z) const {
        ModelTape t;
        t.forward(model, Z, {true, false});
        return t.input_gradient();
    }
};

/// The exact Hamiltonian of a system, optionally transformed as
/// scale * H + offset. Used as a reference predictor.
struct AnalyticPredictor {
    SystemPtr system;
    double scale = 1.0;
    double offset = 0.0;

    Vec values(const Mat& Z) const {
        Vec out(Z.cols());
        for (Index k = 0; k < Z.cols(); ++k)
            out[k] = scale * system->hamiltonian(PhaseState::from_z(Z.col(k))) + offset;
        return out;
    }
    Mat gradients(const Mat& Z) const {
        const Index n = system->n();
        Mat out(2 * n, Z.cols());
        for (Index k = 0; k < Z.cols(); ++k) {
            const PhaseState s = PhaseState::from_z(Z.col(k));
            out.col(k) << scale * system->grad_t(s.q), scale * system->grad_v(s.p);
        }
        return out;
    }
};

using TrueHamiltonian = std::function<double(const PhaseState&)>;

inline TrueHamiltonian true_hamiltonian(SystemPtr sys) {
    return [sys](const PhaseState& s) { return sys->hamiltonian(s); };
}

/// Additive-constant removal for E_H: shift predictions so H_hat(z0) = H0.
struct PinShift {
    PhaseState state;
    double value;
};

inline constexpr Index eval_chunk = 8192;

namespace detail {

template <class F>
void for_chunks(const Dataset& ds, F&& f) {
    for (Index start = 0; start < ds.size(); start += eval_chunk) {
        const Index len = std::min(eval_chunk, ds.size() - start);
        Mat Z(2 * ds.n(), len);
        Z.topRows(ds.n()) = ds.Q.middleCols(start, len);
        Z.bottomRows(ds.n()) = ds.P.middleCols(start, len);
        f(start, len, Z);
    }
}

} // namespace detail

template <HamiltonianPredictor P>
double e_h(const P& predictor, const Dataset& test, const TrueHamiltonian& truth,
           const std::optional<PinShift>& pin = std::nullopt) {
    if (test.empty())
        throw ConfigError("E_H needs a nonempty test set");
    double shift = 0.0;
    if (pin) {
        const Mat z0 = pin->state.z();
        shift = pin->value - predictor.values(z0)[0];
    }
    double sum = 0.0;
    detail::for_chunks(test, [&](Index start, Index len, const Mat& Z) {
        const Vec h = predictor.values(Z);
        for (Index k = 0; k < len; ++k) {
            const double d = h[k] + shift - truth(test.state(start + k));
            sum += d * d;
        }
    });
    return sum / static_cast<double>(test.size());
}

struct FieldError {
    double percent = 0.0;
    Index used = 0;
    Index skipped = 0; // samples with a zero true field
};

template <HamiltonianPredictor P>
FieldError e_v_detail(const P& predictor, const Dataset& test) {
    if (test.empty())
        throw ConfigError("E_V needs a nonempty test set");
    const Index n = test.n();
    FieldError out;
    double sum = 0.0;
    detail::for_chunks(test, [&](Index start, Index len, const Mat& Z) {
        const Mat G = predictor.gradients(Z);
        for (Index k = 0; k < len; ++k) {
            const Index i = start + k;
            const double denom = std::sqrt(test.dQ.col(i).squaredNorm() + test.dP.col(i).squaredNorm());
            if (denom == 0.0) {
                ++out.skipped;
                continue;
            }
            // qdot_hat = dH/dp, pdot_hat = -dH/dq
            const double eq = (G.col(k).tail(n) - test.dQ.col(i)).squaredNorm();
            const double ep = (-G.col(k).head(n) - test.dP.col(i)).squaredNorm();
            sum += std::sqrt(eq + ep) / denom;
            ++out.used;
        }
    });
    if (out.used == 0)
        throw ConfigError("E_V is undefined: every test sample has a zero vector field");
    out.percent = sum / static_cast<double>(out.used) * 100.0;
    return out;
}

template <HamiltonianPredictor P>
double e_v(const P& predictor, const Dataset& test) {
    return e_v_detail(predictor, test).percent;
}

inline double e_h(const HamiltonianModel& m, const Dataset& test, const TrueHamiltonian& truth,
                  const std::optional<PinShift>& pin = std::nullopt) {
    return e_h(NetworkPredictor{m}, test, truth, pin);
}
inline double e_v(const HamiltonianModel& m, const Dataset& test) { return e_v(NetworkPredictor{m}, test); }

struct SplitError {
    double e_ke; // p-dependent term
    double e_pe; // q-dependent term
};

/// Mean squared errors of the pinned sub-network outputs against the pinned
/// true terms.
inline SplitError e_split(const HamiltonianModel& m, const Dataset& test, const SystemDef& sys) {
    if (!m.conjoined())
        throw UnsupportedError("energy-split errors need a conjoined model");
    if (test.empty())
        throw ConfigError("energy-split errors need a nonempty test set");
    const Index n = test.n();
    const Vec zero = Vec::Zero(n);
    Mat origin(n, 1);
    origin.col(0) = zero;
    const auto [t0, v0] = subnet_outputs(m, origin, origin);
    double ke = 0.0, pe = 0.0;
    for (Index start = 0; start < test.size(); start += eval_chunk) {
        const Index len = std::min(eval_chunk, test.size() - start);
        const auto [t, v] = subnet_outputs(m, test.Q.middleCols(start, len), test.P.middleCols(start, len));
        for (Index k = 0; k < len; ++k) {
            const EnergySplit truth = sys.energy_split(test.state(start + k));
            const double dv = (v[k] - v0[0]) - truth.v;
            const double dt = (t[k] - t0[0]) - truth.t;
            ke += dv * dv;
            pe += dt * dt;
        }
    }
    const double K = static_cast<double>(test.size());
    return {ke / K, pe / K};
}

// ---------------------------------------------------------------------------
// Reports and aggregation
// ---------------------------------------------------------------------------

struct MetricRow {
    std::string variant;
    std::string system;
    std::uint64_t seed = 0;
    double e_h = 0.0;
    double e_v = 0.0;
    std::optional<double> e_ke;
    std::optional<double> e_pe;
    long epochs = 0;
    double wall_seconds = 0.0;
};

inline MetricRow evaluate_model(const HamiltonianModel& m, const Dataset& test, SystemPtr sys) {
    MetricRow row;
    row.system = sys->name();
    row.e_h = e_h(m, test, true_hamiltonian(sys));
    row.e_v = e_v(m, test);
    if (m.conjoined()) {
        const SplitError s = e_split(m, test, *sys);
        row.e_ke = s.e_ke;
        row.e_pe = s.e_pe;
    }
    return row;
}

inline const char* metric_csv_header = "variant,system,seed,e_h,e_v,e_ke,e_pe,epochs,wall_seconds";

/// With `include_wall_time` false the wall_seconds column is written as 0 so
/// that repeated runs produce byte-identical files.
inline std::string metric_csv(const std::vector<MetricRow>& rows, bool include_wall_time = true) {
    std::string out = std::string(metric_csv_header) + "\n";
    for (const MetricRow& r : rows) {
        out += r.variant + "," + r.system + "," + std::to_string(r.seed) + "," + io::format_double(r.e_h) + "," +
               io::format_double(r.e_v) + "," + (r.e_ke ? io::format_double(*r.e_ke) : "") + "," +
               (r.e_pe ? io::format_double(*r.e_pe) : "") + "," + std::to_string(r.epochs) + "," +
               io::format_double(include_wall_time ? r.wall_seconds : 0.0) + "\n";
    }
    return out;
}

inline std::vector<MetricRow> parse_metric_csv(const std::string& text) {
    const auto lines = io::lines(text);
    if (lines.empty() || lines[0] != metric_csv_header)
        throw ParseError("expected header '" + std::string(metric_csv_header) + "'", 1);
    std::vector<MetricRow> rows;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (lines[l].empty())
            continue;
        const auto c = io::split(lines[l]);
        if (c.size() != 9)
            throw ParseError("expected 9 columns", l + 1);
        auto num = [&](std::string_view s) {
            const auto v = io::parse_double(s);
            if (!v)
                throw ParseError("malformed number '" + std::string(s) + "'", l + 1);
            return *v;
        };
        MetricRow r;
        r.variant = std::string(c[0]);
        r.system = std::string(c[1]);
        r.seed = static_cast<std::uint64_t>(num(c[2]));
        r.e_h = num(c[3]);
        r.e_v = num(c[4]);
        if (!c[5].empty())
            r.e_ke = num(c[5]);
        if (!c[6].empty())
            r.e_pe = num(c[6]);
        r.epochs = static_cast<long>(num(c[7]));
        r.wall_seconds = num(c[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Mean and standard error of the mean; the error is NaN below two values.
struct Aggregate {
    double mean = 0.0;
    double std_error = std::numeric_limits<double>::quiet_NaN();
    std::size_t count = 0;
};

inline Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    a.count = xs.size();
    if (xs.empty()) {
        a.mean = std::numeric_limits<double>::quiet_NaN();
        return a;
    }
    double s = 0.0;
    for (double x : xs)
        s += x;
    a.mean = s / static_cast<double>(xs.size());
    if (xs.size() >= 2) {
        double ss = 0.0;
        for (double x : xs)
            ss += (x - a.mean) * (x - a.mean);
        const double var = ss / static_cast<double>(xs.size() - 1);
        a.std_error = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return a;
}

} // namespace shnn
