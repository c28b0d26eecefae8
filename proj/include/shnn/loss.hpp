#pragma once

// Hamiltonian regression loss
//
//   l0 = (H(z0) - H0)^2                        pinning
//   l1 = mean_b |dH/dp - qdot|^2               Hamilton's equations
//   l2 = mean_b |-dH/dq - pdot|^2
//   l3 = mean_b |d2H/dq dp|_F^2                separability penalty
//
// and its exact gradient with respect to the network parameters.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "shnn/data.hpp"
#include "shnn/diffkit.hpp"
#include "shnn/error.hpp"
#include "shnn/model.hpp"

namespace shnn {

struct LossSpec {
    double c0 = 1.0;
    double c1 = 1.0;
    double c2 = 1.0;
    double c3 = 1.0;
    PhaseState pin_state;
    double pin_value = 0.0;
    bool include_mixed = false;

    /// Pins at the origin to the true Hamiltonian there.
    static LossSpec pinned_at_origin(const SystemDef& sys) {
        LossSpec s;
        s.pin_state = PhaseState::zeros(sys.n());
        s.pin_value = sys.hamiltonian(s.pin_state);
        return s;
    }

    void validate(Index n) const {
        for (double c : {c0, c1, c2, c3})
            if (!std::isfinite(c) || c < 0.0)
                throw ConfigError("loss coefficients must be finite and non-negative");
        if (pin_state.n() != n)
            throw ConfigError("pin state dimension does not match the model");
    }
};

struct LossTerms {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, l3 = 0.0;

    double total(const LossSpec& s) const {
        double t = s.c0 * l0 + s.c1 * l1 + s.c2 * l2;
        if (s.include_mixed)
            t += s.c3 * l3;
        return t;
    }
};

/// Reusable evaluator; keeps its buffers between batches.
class LossEvaluator {
public:
    /// Evaluates the loss on columns of (Z, dQ, dP) and, when `grad` is
    /// non-null, adds dLoss/dw to it. `batch_index` only labels errors.
    LossTerms evaluate(const HamiltonianModel& m, const Mat& Q, const Mat& P, const Mat& dQ, const Mat& dP,
                       const LossSpec& spec, Vec* grad, long batch_index = -1) {
        const Index n = m.n(), B = Q.cols();
        if (B == 0)
            throw ConfigError("loss needs a nonempty batch");
        if (Q.rows() != n || dQ.rows() != n)
            throw ConfigError("batch dimension does not match the model");
        spec.validate(n);

        Z_.resize(2 * n, B + 1);
        Z_.topLeftCorner(n, B) = Q;
        Z_.bottomLeftCorner(n, B) = P;
        Z_.col(B) << spec.pin_state.q, spec.pin_state.p;

        const bool mixed = spec.include_mixed && !m.conjoined();
        try {
            tape_.forward(m, Z_, {true, mixed});
        } catch (const NumericError& e) {
            throw NumericError(label(batch_index) + e.what());
        }

        const Mat& G = tape_.input_gradient();
        const double inv_B = 1.0 / static_cast<double>(B);
        // residuals of qdot_hat = dH/dp and pdot_hat = -dH/dq
        res_q_ = G.block(n, 0, n, B) - dQ;
        res_p_ = -G.block(0, 0, n, B) - dP;

        LossTerms t;
        const double pin_res = tape_.value()[B] - spec.pin_value;
        t.l0 = pin_res * pin_res;
        t.l1 = res_q_.squaredNorm() * inv_B;
        t.l2 = res_p_.squaredNorm() * inv_B;
        if (mixed) {
            double s = 0.0;
            for (Index b = 0; b < B; ++b)
                s += tape_.mixed()[b].squaredNorm();
            t.l3 = s * inv_B;
        }
        if (!std::isfinite(t.total(spec)))
            throw NumericError(label(batch_index) + "non-finite loss");
        if (!grad)
            return t;

        value_bar_ = Vec::Zero(B + 1);
        value_bar_[B] = 2.0 * spec.c0 * pin_res;
        grad_bar_.resize(2 * n, B + 1);
        grad_bar_.block(n, 0, n, B) = (2.0 * spec.c1 * inv_B) * res_q_;
        grad_bar_.block(0, 0, n, B) = (-2.0 * spec.c2 * inv_B) * res_p_;
        grad_bar_.col(B).setZero();
        const std::vector<Mat>* mixed_bar = nullptr;
        if (mixed) {
            mixed_bar_.resize(static_cast<std::size_t>(B + 1));
            for (Index b = 0; b < B; ++b)
                mixed_bar_[b] = (2.0 * spec.c3 * inv_B) * tape_.mixed()[b];
            mixed_bar_[B] = Mat::Zero(n, n);
            mixed_bar = &mixed_bar_;
        }
        tape_.backward(m, &value_bar_, &grad_bar_, mixed_bar, *grad);
        if (!grad->allFinite())
            throw NumericError(label(batch_index) + "non-finite parameter gradient");
        return t;
    }

    LossTerms evaluate(const HamiltonianModel& m, const Dataset& batch, const LossSpec& spec, Vec* grad,
                       long batch_index = -1) {
        return evaluate(m, batch.Q, batch.P, batch.dQ, batch.dP, spec, grad, batch_index);
    }

private:
    static std::string label(long batch_index) {
        return batch_index >= 0 ? "batch " + std::to_string(batch_index) + ": " : std::string();
    }

    ModelTape tape_;
    Mat Z_, res_q_, res_p_, grad_bar_;
    Vec value_bar_;
    std::vector<Mat> mixed_bar_;
};

inline LossTerms loss_terms(const HamiltonianModel& m, const Dataset& batch, const LossSpec& spec) {
    LossEvaluator ev;
    return ev.evaluate(m, batch, spec, nullptr);
}

/// Exact gradient of the weighted batch loss with respect to every parameter.
inline ParamVector loss_gradient(const HamiltonianModel& m, const Dataset& batch, const LossSpec& spec) {
    LossEvaluator ev;
    ParamVector g{m.params.layout, Vec::Zero(m.params.size())};
    ev.evaluate(m, batch, spec, &g.values);
    return g;
}

} // namespace shnn
