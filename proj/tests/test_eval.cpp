#include <catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace shnn;
using namespace testing_support;

namespace {

/// The true field scaled by a constant: a predictor for E_V checks.
struct ScaledField {
    AnalyticPredictor inner;
    double factor;
    Vec values(const Mat& Z) const { return inner.values(Z); }
    Mat gradients(const Mat& Z) const { return factor * inner.gradients(Z); }
};

} // namespace

TEST_CASE("hamiltonian error of shifted predictors", "[eval]") {
    const auto sys = make_system("henon_heiles");
    const Dataset test = grid(*sys, 5);
    const auto truth = true_hamiltonian(sys);
    CHECK(e_h(AnalyticPredictor{sys}, test, truth) == 0.0);
    CHECK(std::abs(e_h(AnalyticPredictor{sys, 1.0, 0.5}, test, truth) - 0.25) < 1e-15);
    const PinShift pin{PhaseState::zeros(2), 0.0};
    CHECK(e_h(AnalyticPredictor{sys, 1.0, 0.5}, test, truth, pin) < 1e-30);
}

TEST_CASE("vector field error of scaled predictors", "[eval]") {
    const auto sys = make_system("pendulum");
    const Dataset test = grid(*sys, 10);
    CHECK(e_v(AnalyticPredictor{sys}, test) == 0.0);
    CHECK(std::abs(e_v(ScaledField{{sys}, 2.0}, test) - 100.0) < 1e-12);
    CHECK(std::abs(e_v(ScaledField{{sys}, 0.0}, test) - 100.0) < 1e-12);
}

TEST_CASE("zero-field samples are skipped and counted", "[eval]") {
    const auto sys = make_system("coupled3");
    Dataset test = sample_uniform(*sys, 4, 0);
    test.Q.col(1).setZero();
    test.P.col(1).setZero();
    test.dQ.col(1).setZero();
    test.dP.col(1).setZero();
    const FieldError fe = e_v_detail(AnalyticPredictor{sys}, test);
    CHECK(fe.used == 3);
    CHECK(fe.skipped == 1);
    Dataset origin = test.select({1});
    CHECK_THROWS_AS(e_v(AnalyticPredictor{sys}, origin), ConfigError);
}

TEST_CASE("field error ignores output constants; pinned E_H too", "[eval][property]") {
    const auto sys = make_system("pendulum");
    const Dataset test = grid(*sys, 10);
    const HamiltonianModel m = init_model({ModelKind::baseline, 1, 16}, 2);
    HamiltonianModel shifted = m;
    shifted.params.values[shifted.params.layout.block("b3").offset] += 7.3;
    CHECK(e_v(m, test) == e_v(shifted, test));
    const PinShift pin{PhaseState::zeros(1), 0.0};
    const double a = e_h(m, test, true_hamiltonian(sys), pin);
    const double b = e_h(shifted, test, true_hamiltonian(sys), pin);
    CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, a));
    CHECK(e_h(m, test, true_hamiltonian(sys)) == e_h(m, test, true_hamiltonian(sys)));
}

TEST_CASE("energy split errors", "[eval]") {
    const auto sys = make_system("pendulum");
    const Dataset test = grid(*sys, 10);
    const HamiltonianModel m = init_model({ModelKind::conjoined, 1, 6}, 3);
    const SplitError e = e_split(m, test, *sys);
    CHECK(e.e_ke >= 0.0);
    CHECK(e.e_pe >= 0.0);
    // predicted split recomputed directly
    double ke = 0.0;
    for (Index k = 0; k < test.size(); ++k) {
        const double d = predict_energy_split(m, test.state(k)).v - sys->energy_split(test.state(k)).v;
        ke += d * d;
    }
    CHECK(std::abs(e.e_ke - ke / test.size()) < 1e-12);
    CHECK_THROWS_AS(e_split(init_model({ModelKind::baseline, 1, 4}, 0), test, *sys), UnsupportedError);
    // E_H is bounded by the split errors through (a + b)^2 <= 2a^2 + 2b^2 once both are pinned
    const PinShift pin{PhaseState::zeros(1), 0.0};
    CHECK(e_h(m, test, true_hamiltonian(sys), pin) <= 2.0 * (e.e_ke + e.e_pe) + 1e-12);
}

TEST_CASE("metric csv format and aggregation", "[eval]") {
    MetricRow a{"HNN", "pendulum", 0, 0.5, 12.25, std::nullopt, std::nullopt, 100, 1.5};
    MetricRow b{"HNN-I", "pendulum", 1, 1.0 / 3.0, 2.0, 0.1, 0.2, 90, 2.5};
    const std::string csv = metric_csv({a, b});
    CHECK(io::lines(csv)[0] == "variant,system,seed,e_h,e_v,e_ke,e_pe,epochs,wall_seconds");
    const auto rows = parse_metric_csv(csv);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].e_h == 1.0 / 3.0);
    CHECK_FALSE(rows[0].e_ke);
    CHECK(*rows[1].e_pe == 0.2);
    CHECK(rows[1].wall_seconds == 2.5);
    CHECK(parse_metric_csv(metric_csv({a, b}, false))[1].wall_seconds == 0.0);
    CHECK_THROWS_AS(parse_metric_csv("bad\n"), ParseError);

    const Aggregate g = aggregate({1.0, 2.0, 3.0});
    CHECK(g.mean == 2.0);
    CHECK(std::abs(g.std_error - 1.0 / std::sqrt(3.0)) < 1e-15);
    CHECK(std::isnan(aggregate({4.0}).std_error));
}

TEST_CASE("evaluation works in chunks on large test sets", "[eval]") {
    const auto sys = make_system("toda");
    const Dataset test = sample_uniform(*sys, 20000, 1);
    const HamiltonianModel m = init_model({ModelKind::conjoined, 3, 5}, 1);
    const MetricRow row = evaluate_model(m, test, sys);
    double direct = 0.0;
    for (Index k = 0; k < test.size(); ++k) {
        const double d = predict_h(m, test.state(k)) - sys->hamiltonian(test.state(k));
        direct += d * d;
    }
    CHECK(std::abs(row.e_h - direct / test.size()) < 1e-12 * std::max(1.0, row.e_h));
    CHECK(row.e_ke);
}
