#pragma once

// Hamiltonian networks: the baseline perceptron over z = (q, p) and the
// conjoined form H = T(q) + V(p) built from two independent perceptrons that
// meet only at the output.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shnn/diffkit.hpp"
#include "shnn/error.hpp"
#include "shnn/io.hpp"
#include "shnn/random.hpp"
#include "shnn/systems.hpp"

namespace shnn {

enum class ModelKind { baseline, conjoined };
enum class ExecMode { series, parallel };

/// Output combination of the conjoined sub-networks.
///   L0: T + V
///   L1: [T V] [1 1]^T
///   L2: [T V] [1 1]^T + beta
///   L3: [T V] [aT aV]^T
///   L4: [T V] [aT aV]^T + beta
enum class Summation { L0, L1, L2, L3, L4 };

inline std::string to_string(ModelKind k) { return k == ModelKind::baseline ? "baseline" : "conjoined"; }
inline std::string to_string(ExecMode m) { return m == ExecMode::series ? "series" : "parallel"; }
inline std::string to_string(Summation s) { return "L" + std::to_string(static_cast<int>(s)); }

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "baseline")
        return ModelKind::baseline;
    if (s == "conjoined")
        return ModelKind::conjoined;
    throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

inline ExecMode parse_exec_mode(std::string_view s) {
    if (s == "series")
        return ExecMode::series;
    if (s == "parallel")
        return ExecMode::parallel;
    throw ConfigError("unknown exec mode '" + std::string(s) + "' (series, parallel)");
}

inline Summation parse_summation(std::string_view s) {
    if (s.size() == 2 && (s[0] == 'L' || s[0] == 'l') && s[1] >= '0' && s[1] <= '4')
        return static_cast<Summation>(s[1] - '0');
    throw ConfigError("unknown summation layer '" + std::string(s) + "' (L0..L4)");
}

inline bool has_alpha(Summation s) { return s == Summation::L3 || s == Summation::L4; }
inline bool has_beta(Summation s) { return s == Summation::L2 || s == Summation::L4; }

struct ModelSpec {
    ModelKind kind = ModelKind::baseline;
    Index n = 1;
    Index hidden_width = 16;
    ExecMode exec = ExecMode::parallel;
    Summation summation = Summation::L0;

    Index input_dim() const { return 2 * n; }

    void validate() const {
        if (n < 1)
            throw ConfigError("model needs n >= 1");
        if (hidden_width < 1)
            throw ConfigError("hidden width must be positive");
    }

    ParamLayout layout() const {
        validate();
        ParamLayout l;
        if (kind == ModelKind::baseline) {
            MlpWeights::declare(l, "", input_dim(), hidden_width);
        } else {
            MlpWeights::declare(l, "T.", n, hidden_width);
            MlpWeights::declare(l, "V.", n, hidden_width);
            if (has_alpha(summation)) {
                l.add("alpha_T", 4, BlockKind::scalar, 1);
                l.add("alpha_V", 4, BlockKind::scalar, 1);
            }
            if (has_beta(summation))
                l.add("beta", 4, BlockKind::scalar, 1);
        }
        return l;
    }

    Index parameter_count() const { return layout().size(); }

    bool operator==(const ModelSpec&) const = default;
};

struct HamiltonianModel {
    ModelSpec spec;
    ParamVector params;

    Index n() const { return spec.n; }
    bool conjoined() const { return spec.kind == ModelKind::conjoined; }

    Index subnet_size() const { return MlpWeights::parameter_count(spec.n, spec.hidden_width); }

    MlpWeights baseline_weights() const {
        return MlpWeights::unpack(params.values.data(), spec.input_dim(), spec.hidden_width);
    }
    MlpWeights t_weights() const { return MlpWeights::unpack(params.values.data(), spec.n, spec.hidden_width); }
    MlpWeights v_weights() const {
        return MlpWeights::unpack(params.values.data() + subnet_size(), spec.n, spec.hidden_width);
    }

    double alpha_t() const { return has_alpha(spec.summation) ? params.values[2 * subnet_size()] : 1.0; }
    double alpha_v() const { return has_alpha(spec.summation) ? params.values[2 * subnet_size() + 1] : 1.0; }
    double beta() const {
        if (!has_beta(spec.summation))
            return 0.0;
        return params.values[2 * subnet_size() + (has_alpha(spec.summation) ? 2 : 0)];
    }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer for weights and biases;
/// summation weights start at 1 and the summation bias at 0.
inline HamiltonianModel init_model(const ModelSpec& spec, std::uint64_t seed) {
    HamiltonianModel m{spec, {spec.layout(), Vec()}};
    m.params.values = Vec::Zero(m.params.layout.size());
    Rng rng(seed);
    for (const ParamBlock& b : m.params.layout.blocks()) {
        if (b.kind == BlockKind::scalar) {
            const double v = b.name == "beta" ? 0.0 : 1.0;
            m.params.values[b.offset] = v;
            continue;
        }
        Index fan_in = spec.hidden_width;
        if (b.layer == 1)
            fan_in = spec.kind == ModelKind::baseline ? spec.input_dim() : spec.n;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Index i = 0; i < b.size(); ++i)
            m.params.values[b.offset + i] = rng.uniform(-bound, bound);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Batched evaluation
// ---------------------------------------------------------------------------

struct EvalOptions {
    bool input_gradient = true;
    bool mixed = false;
};

/// Forward pass over a batch Z (2n x B) that can later be differentiated with
/// respect to the model parameters.
class ModelTape {
public:
    void forward(const HamiltonianModel& m, const Mat& Z, EvalOptions opt) {
        if (Z.rows() != m.spec.input_dim())
            throw ConfigError("state dimension " + std::to_string(Z.rows()) + " does not match model input " +
                              std::to_string(m.spec.input_dim()));
        if (!m.params.values.allFinite()) {
            const ParamCoord c = first_non_finite(m);
            throw NumericError("non-finite parameter in block '" + m.params.layout.blocks()[c.block].name +
                               "' (layer " + std::to_string(m.params.layout.blocks()[c.block].layer) + ")");
        }
        opt_ = opt;
        const Index n = m.n(), B = Z.cols();
        value_.resize(B);
        if (opt.input_gradient || opt.mixed)
            grad_.resize(2 * n, B);
        mixed_.clear();

        if (m.spec.kind == ModelKind::baseline) {
            weights_[0] = m.baseline_weights();
            tape_[0].forward(weights_[0], Z, {opt.input_gradient || opt.mixed, opt.mixed, n});
            value_ = tape_[0].value();
            if (opt.input_gradient || opt.mixed)
                grad_ = tape_[0].input_gradient();
            if (opt.mixed)
                mixed_ = tape_[0].mixed();
            return;
        }

        const double aT = m.alpha_t(), aV = m.alpha_v(), beta = m.beta();
        const bool grad = opt.input_gradient || opt.mixed;
        if (m.spec.exec == ExecMode::series) {
            weights_[0] = m.t_weights();
            weights_[1] = m.v_weights();
            tape_[0].forward(weights_[0], Z.topRows(n), {grad, false, 0});
            tape_[1].forward(weights_[1], Z.bottomRows(n), {grad, false, 0});
            combine(m.spec.summation, aT, aV, beta, tape_[0].value(), tape_[1].value(), value_);
            if (grad) {
                grad_.topRows(n) = scaled(m.spec.summation, aT, tape_[0].input_gradient());
                grad_.bottomRows(n) = scaled(m.spec.summation, aV, tape_[1].input_gradient());
            }
        } else {
            weights_[0] = stacked(m);
            tape_[0].forward(weights_[0], Z, {grad, false, 0});
            value_ = tape_[0].value();
            if (grad)
                grad_ = tape_[0].input_gradient();
        }
        // no path joins q and p before the output
        if (opt.mixed)
            mixed_.assign(static_cast<std::size_t>(B), Mat::Zero(n, n));
    }

    const Vec& value() const { return value_; }
    /// 2n x B, rows (dH/dq, dH/dp).
    const Mat& input_gradient() const { return grad_; }
    const std::vector<Mat>& mixed() const { return mixed_; }

    /// Accumulates dL/dw into `out` (flat, same layout as the model).
    void backward(const HamiltonianModel& m, const Vec* value_bar, const Mat* grad_bar,
                  const std::vector<Mat>* mixed_bar, Vec& out) const {
        const Index n = m.n(), W = m.spec.hidden_width;
        if (out.size() != m.params.size())
            throw ConfigError("gradient buffer has wrong size");

        if (m.spec.kind == ModelKind::baseline) {
            MlpWeights g = MlpWeights::zeros(2 * n, W);
            tape_[0].backward(weights_[0], value_bar, grad_bar, mixed_bar, g);
            accumulate(g, out.data());
            return;
        }

        // the mixed block of a conjoined model is identically zero, so its
        // adjoint contributes nothing
        const Index sub = m.subnet_size();
        const double aT = m.alpha_t(), aV = m.alpha_v();
        double g_aT = 0.0, g_aV = 0.0, g_beta = 0.0;
        if (value_bar)
            g_beta = value_bar->sum();

        if (m.spec.exec == ExecMode::series) {
            MlpWeights gT = MlpWeights::zeros(n, W), gV = MlpWeights::zeros(n, W);
            std::optional<Vec> vbT, vbV;
            std::optional<Mat> gbT, gbV;
            if (value_bar) {
                vbT = aT * (*value_bar);
                vbV = aV * (*value_bar);
                g_aT += value_bar->dot(tape_[0].value());
                g_aV += value_bar->dot(tape_[1].value());
            }
            if (grad_bar) {
                gbT = aT * grad_bar->topRows(n);
                gbV = aV * grad_bar->bottomRows(n);
                g_aT += grad_bar->topRows(n).cwiseProduct(tape_[0].input_gradient()).sum();
                g_aV += grad_bar->bottomRows(n).cwiseProduct(tape_[1].input_gradient()).sum();
            }
            tape_[0].backward(weights_[0], vbT ? &*vbT : nullptr, gbT ? &*gbT : nullptr, nullptr, gT);
            tape_[1].backward(weights_[1], vbV ? &*vbV : nullptr, gbV ? &*gbV : nullptr, nullptr, gV);
            accumulate(gT, out.data());
            accumulate(gV, out.data() + sub);
        } else {
            MlpWeights g = MlpWeights::zeros(2 * n, 2 * W);
            tape_[0].backward(weights_[0], value_bar, grad_bar, nullptr, g);
            const MlpWeights wT = m.t_weights(), wV = m.v_weights();
            MlpWeights gT{g.W1.block(0, 0, W, n), g.b1.head(W), g.W2.block(0, 0, W, W), g.b2.head(W),
                          aT * g.w3.head(W), aT * g.b3};
            MlpWeights gV{g.W1.block(W, n, W, n), g.b1.tail(W), g.W2.block(W, W, W, W), g.b2.tail(W),
                          aV * g.w3.tail(W), aV * g.b3};
            g_aT = g.w3.head(W).dot(wT.w3) + g.b3 * wT.b3;
            g_aV = g.w3.tail(W).dot(wV.w3) + g.b3 * wV.b3;
            g_beta = g.b3;
            accumulate(gT, out.data());
            accumulate(gV, out.data() + sub);
        }
        Index extra = 2 * sub;
        if (has_alpha(m.spec.summation)) {
            out[extra++] += g_aT;
            out[extra++] += g_aV;
        }
        if (has_beta(m.spec.summation))
            out[extra] += g_beta;
    }

    /// Raw sub-network outputs of the last conjoined forward pass in series
    /// mode; unused in parallel mode.
    const MlpTape& subnet_tape(int i) const { return tape_[i]; }

private:
    static void accumulate(const MlpWeights& g, double* p) {
        const Index size = MlpWeights::parameter_count(g.in(), g.width());
        Vec tmp(size);
        g.pack(tmp.data());
        Eigen::Map<Vec>(p, size) += tmp;
    }

    static void combine(Summation s, double aT, double aV, double beta, const Vec& t, const Vec& v, Vec& out) {
        switch (s) {
        case Summation::L0:
            out = t + v;
            break;
        case Summation::L1:
            out = 1.0 * t + 1.0 * v;
            break;
        case Summation::L2:
            out = (1.0 * t + 1.0 * v).array() + beta;
            break;
        case Summation::L3:
            out = aT * t + aV * v;
            break;
        case Summation::L4:
            out = (aT * t + aV * v).array() + beta;
            break;
        }
    }

    static Mat scaled(Summation s, double a, const Mat& g) { return s == Summation::L0 ? g : Mat(a * g); }

    /// Both sub-networks as one block-diagonal perceptron over z.
    static MlpWeights stacked(const HamiltonianModel& m) {
        const Index n = m.n(), W = m.spec.hidden_width;
        const MlpWeights t = m.t_weights(), v = m.v_weights();
        const double aT = m.alpha_t(), aV = m.alpha_v();
        MlpWeights s = MlpWeights::zeros(2 * n, 2 * W);
        s.W1.block(0, 0, W, n) = t.W1;
        s.W1.block(W, n, W, n) = v.W1;
        s.b1 << t.b1, v.b1;
        s.W2.block(0, 0, W, W) = t.W2;
        s.W2.block(W, W, W, W) = v.W2;
        s.b2 << t.b2, v.b2;
        s.w3 << aT * t.w3, aV * v.w3;
        s.b3 = aT * t.b3 + aV * v.b3 + m.beta();
        return s;
    }

    static ParamCoord first_non_finite(const HamiltonianModel& m) {
        for (Index i = 0; i < m.params.size(); ++i)
            if (!std::isfinite(m.params.values[i]))
                return m.params.layout.coords(i);
        return {0, 0, 0};
    }

    EvalOptions opt_;
    MlpWeights weights_[2];
    MlpTape tape_[2];
    Vec value_;
    Mat grad_;
    std::vector<Mat> mixed_;
};

// ---------------------------------------------------------------------------
// Single-state queries
// ---------------------------------------------------------------------------

struct DerivativeBundle {
    double value = 0.0;
    Vec input_grad;           // (dH/dq, dH/dp)
    std::optional<Mat> mixed; // d2H/dq dp
};

inline DerivativeBundle evaluate_with_input_derivatives(const HamiltonianModel& m, const PhaseState& s,
                                                        bool want_mixed) {
    if (s.n() != m.n())
        throw ConfigError("state has n = " + std::to_string(s.n()) + " but model expects n = " +
                          std::to_string(m.n()));
    ModelTape tape;
    tape.forward(m, s.z(), {true, want_mixed});
    DerivativeBundle out{tape.value()[0], tape.input_gradient().col(0), std::nullopt};
    if (want_mixed)
        out.mixed = tape.mixed()[0];
    return out;
}

inline double predict_h(const HamiltonianModel& m, const PhaseState& s) {
    if (s.n() != m.n())
        throw ConfigError("state dimension does not match model");
    ModelTape tape;
    tape.forward(m, s.z(), {false, false});
    return tape.value()[0];
}

inline PhaseVelocity predict_field(const HamiltonianModel& m, const PhaseState& s) {
    const DerivativeBundle d = evaluate_with_input_derivatives(m, s, false);
    return SymplecticForm{m.n()}.apply(d.input_grad.head(m.n()), d.input_grad.tail(m.n()));
}

/// Extended-precision Hamiltonian for difference checks (see reference_forward).
inline long double reference_h(const HamiltonianModel& m, const Vec& z) {
    if (z.size() != m.spec.input_dim())
        throw ConfigError("state dimension does not match model");
    if (!m.conjoined())
        return reference_forward(m.baseline_weights(), z);
    const long double t = reference_forward(m.t_weights(), z.head(m.n()));
    const long double v = reference_forward(m.v_weights(), z.tail(m.n()));
    return static_cast<long double>(m.alpha_t()) * t + static_cast<long double>(m.alpha_v()) * v + m.beta();
}

/// Sub-network outputs aT*T(q) and aV*V(p) of a conjoined model, each
/// evaluated on its own input only. Columns of Q and P are states.
inline std::pair<Vec, Vec> subnet_outputs(const HamiltonianModel& m, const Mat& Q, const Mat& P) {
    if (!m.conjoined())
        throw UnsupportedError("energy split requires a conjoined model");
    MlpTape t, v;
    t.forward(m.t_weights(), Q, {false, false, 0});
    v.forward(m.v_weights(), P, {false, false, 0});
    return {m.alpha_t() * t.value(), m.alpha_v() * v.value()};
}

/// (T(q) - T(0), V(p) - V(0)) from the two sub-networks.
inline EnergySplit predict_energy_split(const HamiltonianModel& m, const PhaseState& s) {
    if (!m.conjoined())
        throw UnsupportedError("energy split requires a conjoined model");
    if (s.n() != m.n())
        throw ConfigError("state dimension does not match model");
    Mat Q(m.n(), 2), P(m.n(), 2);
    Q << s.q, Vec::Zero(m.n());
    P << s.p, Vec::Zero(m.n());
    auto [t, v] = subnet_outputs(m, Q, P);
    return {t[0] - t[1], v[0] - v[1]};
}

/// Vector field of the model as a callable for integrators.
inline auto model_field(const HamiltonianModel& m) {
    return [&m](const PhaseState& s) { return predict_field(m, s); };
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int checkpoint_version = 1;

inline std::string serialize_model(const HamiltonianModel& m) {
    std::string out = "shnn-checkpoint " + std::to_string(checkpoint_version) + "\n";
    out += "kind " + to_string(m.spec.kind) + "\n";
    out += "n " + std::to_string(m.spec.n) + "\n";
    out += "width " + std::to_string(m.spec.hidden_width) + "\n";
    out += "exec " + to_string(m.spec.exec) + "\n";
    out += "summation " + to_string(m.spec.summation) + "\n";
    out += "params " + std::to_string(m.params.size()) + "\n";
    for (Index i = 0; i < m.params.size(); ++i)
        out += io::format_shortest(m.params.values[i]) + "\n";
    return out;
}

inline HamiltonianModel deserialize_model(const std::string& text) {
    const auto lines = io::lines(text);
    std::size_t at = 0;
    auto field = [&](std::string_view key) -> std::string {
        if (at >= lines.size())
            throw ParseError("unexpected end of checkpoint, expected '" + std::string(key) + "'", at + 1);
        const std::string& line = lines[at];
        if (line.rfind(std::string(key) + " ", 0) != 0)
            throw ParseError("expected '" + std::string(key) + "'", at + 1);
        ++at;
        return line.substr(key.size() + 1);
    };
    auto integer = [&](std::string_view key) {
        const std::string v = field(key);
        long long x = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc{} || ptr != v.data() + v.size())
            throw ParseError("bad integer for '" + std::string(key) + "'", at);
        return x;
    };
    if (integer("shnn-checkpoint") != checkpoint_version)
        throw ParseError("unsupported checkpoint version", 1);
    ModelSpec spec;
    try {
        spec.kind = parse_model_kind(field("kind"));
        spec.n = integer("n");
        spec.hidden_width = integer("width");
        spec.exec = parse_exec_mode(field("exec"));
        spec.summation = parse_summation(field("summation"));
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), at);
    }
    const long long count = integer("params");
    HamiltonianModel m{spec, {spec.layout(), Vec()}};
    if (count != m.params.layout.size())
        throw ParseError("parameter count " + std::to_string(count) + " does not match architecture (" +
                             std::to_string(m.params.layout.size()) + ")",
                         at);
    m.params.values.resize(count);
    for (long long i = 0; i < count; ++i) {
        if (at >= lines.size())
            throw ParseError("truncated parameter list", at + 1);
        const auto v = io::parse_double(lines[at]);
        if (!v)
            throw ParseError("bad parameter value", at + 1);
        m.params.values[i] = *v;
        ++at;
    }
    return m;
}

inline void save_model(const HamiltonianModel& m, const std::filesystem::path& path) {
    io::write_file(path, serialize_model(m));
}

inline HamiltonianModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
        throw ConfigError("missing checkpoint: " + path.string());
    return deserialize_model(io::read_file(path));
}

} // namespace shnn
