#include <catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace shnn;
using namespace testing_support;

namespace {

ModelSpec conj(Index n, Index w, Summation s = Summation::L0, ExecMode e = ExecMode::parallel) {
    return {ModelKind::conjoined, n, w, e, s};
}

/// Copies the sub-network parameters of `from` into `to` (layouts share the prefix).
void copy_subnets(const HamiltonianModel& from, HamiltonianModel& to) {
    const Index k = 2 * from.subnet_size();
    to.params.values.head(k) = from.params.values.head(k);
}

} // namespace

TEST_CASE("parameter counts of the published widths", "[model]") {
    const std::vector<std::tuple<Index, Index, Index, Index, Index>> rows{
        {1, 16, 11, 337, 332}, {2, 32, 22, 1249, 1190}, {3, 31, 22, 1241, 1234}, {10, 44, 32, 2949, 2882}};
    for (auto [n, bw, cw, bc, cc] : rows) {
        CHECK(init_model({ModelKind::baseline, n, bw}, 0).params.size() == bc);
        CHECK(init_model(conj(n, cw), 0).params.size() == cc);
    }
    CHECK(ModelSpec{conj(1, 11, Summation::L2)}.parameter_count() == 333);
    CHECK(ModelSpec{conj(1, 11, Summation::L3)}.parameter_count() == 334);
    CHECK(ModelSpec{conj(1, 11, Summation::L4)}.parameter_count() == 335);
    CHECK_THROWS_AS(init_model({ModelKind::baseline, 1, 0}, 0), ConfigError);
}

TEST_CASE("initialisation is seeded", "[model]") {
    const ModelSpec spec{ModelKind::baseline, 1, 16};
    CHECK(init_model(spec, 0).params.values == init_model(spec, 0).params.values);
    CHECK(init_model(spec, 0).params.values != init_model(spec, 1).params.values);
    const auto m = init_model(conj(1, 4, Summation::L4), 2);
    CHECK(m.alpha_t() == 1.0);
    CHECK(m.alpha_v() == 1.0);
    CHECK(m.beta() == 0.0);
    const double bound = 1.0 / std::sqrt(2.0);
    const auto& b = init_model(spec, 3).params;
    const auto& w1 = b.layout.block("W1");
    CHECK(b.values.segment(w1.offset, w1.size()).cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("zero parameters give a zero Hamiltonian and field", "[model]") {
    HamiltonianModel m = init_model({ModelKind::baseline, 1, 16}, 0);
    m.params.values.setZero();
    const PhaseState s(Vec::Constant(1, 0.7), Vec::Constant(1, -0.4));
    CHECK(predict_h(m, s) == 0.0);
    const auto f = predict_field(m, s);
    CHECK(f.dq[0] == 0.0);
    CHECK(f.dp[0] == 0.0);
}

TEST_CASE("conjoined output is the sum of independent sub-networks", "[model]") {
    const HamiltonianModel m = init_model(conj(2, 5), 4);
    Vec q(2), p(2);
    q << 0.3, -0.1;
    p << -0.2, 0.45;
    MlpTape t, v;
    t.forward(m.t_weights(), q, {false, false, 0});
    v.forward(m.v_weights(), p, {false, false, 0});
    CHECK(std::abs(predict_h(m, {q, p}) - (t.value()[0] + v.value()[0])) < 1e-15);
}

TEST_CASE("summation forms agree for unit weights", "[model]") {
    const auto sys = make_system("toda");
    const HamiltonianModel l0 = init_model(conj(3, 6, Summation::L0), 8);
    HamiltonianModel l1 = init_model(conj(3, 6, Summation::L1), 99);
    HamiltonianModel l3 = init_model(conj(3, 6, Summation::L3), 99);
    copy_subnets(l0, l1);
    copy_subnets(l0, l3);
    Rng rng(1);
    for (int k = 0; k < 50; ++k) {
        const PhaseState s = random_state(*sys, rng);
        const double h0 = predict_h(l0, s);
        CHECK(predict_h(l1, s) == h0);
        CHECK(std::abs(predict_h(l3, s) - h0) < 1e-15);
        CHECK(bitwise_equal(predict_field(l1, s).z(), predict_field(l0, s).z()));
    }
}

TEST_CASE("series and parallel execution agree", "[model][property]") {
    const auto sys = make_system("henon_heiles");
    for (Summation s : {Summation::L0, Summation::L2, Summation::L4}) {
        HamiltonianModel par = init_model(conj(2, 7, s, ExecMode::parallel), 6);
        par.params.values.tail(par.params.size() - 2 * par.subnet_size()).setConstant(0.8);
        HamiltonianModel ser = par;
        ser.spec.exec = ExecMode::series;
        Rng rng(2);
        Mat Z(4, 30);
        for (Index k = 0; k < 30; ++k)
            Z.col(k) = random_state(*sys, rng).z();
        ModelTape a, b;
        a.forward(par, Z, {true, true});
        b.forward(ser, Z, {true, true});
        CHECK((a.value() - b.value()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((a.input_gradient() - b.input_gradient()).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("conjoined field components depend on one half of the state", "[model]") {
    const HamiltonianModel m = init_model(conj(2, 6), 12);
    Vec q(2), p(2), q2(2);
    q << 0.1, 0.2;
    q2 << -0.4, 0.35;
    p << 0.3, -0.3;
    CHECK(bitwise_equal(predict_field(m, {q, p}).dq, predict_field(m, {q2, p}).dq));
}

TEST_CASE("energy split of a conjoined model", "[model]") {
    HamiltonianModel m = init_model(conj(1, 5, Summation::L2), 13);
    m.params.values[m.params.layout.block("beta").offset] = 0.37;
    const PhaseState zero = PhaseState::zeros(1);
    const auto z = predict_energy_split(m, zero);
    CHECK(z.t == 0.0);
    CHECK(z.v == 0.0);
    const PhaseState s(Vec::Constant(1, 1.3), Vec::Constant(1, -0.6));
    const auto e = predict_energy_split(m, s);
    Mat Z0 = Mat::Zero(1, 1);
    const auto [t0, v0] = subnet_outputs(m, Z0, Z0);
    CHECK(std::abs(e.t + e.v + t0[0] + v0[0] + m.beta() - predict_h(m, s)) < 1e-14);
    CHECK_THROWS_AS(predict_energy_split(init_model({ModelKind::baseline, 1, 4}, 0), s), UnsupportedError);
}

TEST_CASE("dimension and finiteness errors", "[model]") {
    HamiltonianModel m = init_model({ModelKind::baseline, 2, 4}, 0);
    CHECK_THROWS_AS(predict_h(m, PhaseState::zeros(1)), ConfigError);
    m.params.values[3] = std::numeric_limits<double>::quiet_NaN();
    try {
        predict_h(m, PhaseState::zeros(2));
        FAIL("expected a numeric error");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("W1") != std::string::npos);
    }
}

TEST_CASE("checkpoints round-trip bitwise", "[model]") {
    const auto dir = scratch_dir("ckpt");
    for (const ModelSpec& spec : {ModelSpec{ModelKind::baseline, 3, 9}, conj(2, 4, Summation::L4, ExecMode::series)}) {
        HamiltonianModel m = init_model(spec, 21);
        m.params.values[0] = 1.0 / 3.0;
        m.params.values[1] = -5e-300;
        save_model(m, dir / "m.ckpt");
        const HamiltonianModel back = load_model(dir / "m.ckpt");
        CHECK(back.spec == m.spec);
        CHECK(bitwise_equal(back.params.values, m.params.values));
    }
    CHECK_THROWS_AS(load_model(dir / "absent.ckpt"), ConfigError);
    CHECK_THROWS_AS(deserialize_model("shnn-checkpoint 99\n"), ParseError);
}
