#pragma once

// Exact derivatives of a two-hidden-layer softplus perceptron
//
//     f(x) = w3 . s(W2 s(W1 x + b1) + b2) + b3
//
// with respect to its input (gradient and one off-diagonal Hessian block) and
// reverse-mode gradients of any scalar built from (f, grad f, mixed block)
// with respect to the weights. Everything is closed-form and batched over
// columns of the input matrix.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shnn/error.hpp"
#include "shnn/softplus.hpp"

namespace shnn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

// ---------------------------------------------------------------------------
// Parameter layout
// ---------------------------------------------------------------------------

enum class BlockKind { weight, bias, scalar };

/// A contiguous slice of the flat parameter array holding one column-major
/// matrix, bias vector or scalar.
struct ParamBlock {
    std::string name;
    int layer = 0;
    BlockKind kind = BlockKind::weight;
    Index rows = 0;
    Index cols = 1;
    Index offset = 0;

    Index size() const { return rows * cols; }
};

struct ParamCoord {
    std::size_t block;
    Index row;
    Index col;
    bool operator==(const ParamCoord&) const = default;
};

class ParamLayout {
public:
    Index add(std::string name, int layer, BlockKind kind, Index rows, Index cols = 1) {
        ParamBlock b{std::move(name), layer, kind, rows, cols, size_};
        size_ += b.size();
        blocks_.push_back(std::move(b));
        return blocks_.back().offset;
    }

    Index size() const { return size_; }
    const std::vector<ParamBlock>& blocks() const { return blocks_; }

    const ParamBlock& block(const std::string& name) const {
        for (const auto& b : blocks_)
            if (b.name == name)
                return b;
        throw ConfigError("no parameter block named '" + name + "'");
    }

    Index index(const ParamCoord& c) const {
        const ParamBlock& b = blocks_.at(c.block);
        if (c.row < 0 || c.row >= b.rows || c.col < 0 || c.col >= b.cols)
            throw ConfigError("parameter coordinate out of range in block '" + b.name + "'");
        return b.offset + c.col * b.rows + c.row;
    }

    ParamCoord coords(Index flat) const {
        if (flat < 0 || flat >= size_)
            throw ConfigError("parameter index out of range");
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            const ParamBlock& b = blocks_[i];
            if (flat < b.offset + b.size()) {
                const Index local = flat - b.offset;
                return {i, local % b.rows, local / b.rows};
            }
        }
        throw ConfigError("parameter index out of range");
    }

private:
    std::vector<ParamBlock> blocks_;
    Index size_ = 0;
};

/// Flat trainable parameters together with the map describing them.
struct ParamVector {
    ParamLayout layout;
    Vec values;

    Index size() const { return values.size(); }
};

// ---------------------------------------------------------------------------
// Two-hidden-layer perceptron
// ---------------------------------------------------------------------------

/// Weights of one perceptron, also used to hold gradients of the same shape.
struct MlpWeights {
    Mat W1; // width x in
    Vec b1;
    Mat W2; // width x width
    Vec b2;
    Vec w3; // output weights
    double b3 = 0.0;

    Index in() const { return W1.cols(); }
    Index width() const { return W1.rows(); }

    static MlpWeights zeros(Index in, Index width) {
        return {Mat::Zero(width, in), Vec::Zero(width), Mat::Zero(width, width),
                Vec::Zero(width),     Vec::Zero(width), 0.0};
    }

    static Index parameter_count(Index in, Index width) {
        return (in * width + width) + (width * width + width) + (width + 1);
    }

    /// Appends this perceptron's blocks to `layout` with names prefixed by `prefix`.
    static Index declare(ParamLayout& layout, const std::string& prefix, Index in, Index width) {
        const Index start = layout.add(prefix + "W1", 1, BlockKind::weight, width, in);
        layout.add(prefix + "b1", 1, BlockKind::bias, width);
        layout.add(prefix + "W2", 2, BlockKind::weight, width, width);
        layout.add(prefix + "b2", 2, BlockKind::bias, width);
        layout.add(prefix + "w3", 3, BlockKind::weight, 1, width);
        layout.add(prefix + "b3", 3, BlockKind::bias, 1);
        return start;
    }

    /// Reads from a flat array in the order produced by declare().
    static MlpWeights unpack(const double* p, Index in, Index width) {
        MlpWeights w;
        w.W1 = Eigen::Map<const Mat>(p, width, in);
        p += width * in;
        w.b1 = Eigen::Map<const Vec>(p, width);
        p += width;
        w.W2 = Eigen::Map<const Mat>(p, width, width);
        p += width * width;
        w.b2 = Eigen::Map<const Vec>(p, width);
        p += width;
        w.w3 = Eigen::Map<const Vec>(p, width);
        p += width;
        w.b3 = *p;
        return w;
    }

    void pack(double* p) const {
        const Index width = this->width(), in = this->in();
        Eigen::Map<Mat>(p, width, in) = W1;
        p += width * in;
        Eigen::Map<Vec>(p, width) = b1;
        p += width;
        Eigen::Map<Mat>(p, width, width) = W2;
        p += width * width;
        Eigen::Map<Vec>(p, width) = b2;
        p += width;
        Eigen::Map<Vec>(p, width) = w3;
        p += width;
        *p = b3;
    }

    bool all_finite() const {
        return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite() &&
               w3.allFinite() && std::isfinite(b3);
    }
};

namespace detail {

// Column-batched softplus_jet. Same branches, evaluated with packet math.
inline void softplus_columns(const Mat& a_, Mat& s, Mat& d1, Mat& d2, Mat* d3) {
    using Arr = Eigen::ArrayXXd;
    const auto a = a_.array();
    const Arr e = (-a.abs()).exp();
    const Arr inv = (1.0 + e).inverse();
    const Arr e_inv = e * inv;
    s = (a > 30.0).select(a + e, (a < -30.0).select(e, a.max(0.0) + e.log1p())).matrix();
    d1 = (a >= 0.0).select(inv, e_inv).matrix();
    const Arr cmp = (a >= 0.0).select(e_inv, inv);
    d2 = (d1.array() * cmp).matrix();
    if (d3)
        *d3 = (d2.array() * (cmp - d1.array())).matrix();
}

} // namespace detail

/// Forward values and intermediates for a batch of inputs (one per column),
/// retained so that backward() can form weight gradients.
///
/// `split` partitions the input into leading (q) and trailing (p) coordinates;
/// the mixed block is d2f / dx[:split] dx[split:].
class MlpTape {
public:
    struct Options {
        bool input_gradient = true;
        bool mixed = false;
        Index split = 0;
    };

    void forward(const MlpWeights& w, const Mat& X, Options opt) {
        if (X.rows() != w.in())
            throw ConfigError("input dimension " + std::to_string(X.rows()) +
                              " does not match network input " + std::to_string(w.in()));
        if (opt.mixed && (opt.split <= 0 || opt.split >= w.in()))
            throw ConfigError("mixed block requested with invalid split");
        opt_ = opt;
        X_ = X;
        const Index B = X.cols();

        A1_.noalias() = w.W1 * X;
        A1_.colwise() += w.b1;
        detail::softplus_columns(A1_, S1_, S1d_, S1dd_, opt.mixed ? &S1ddd_ : nullptr);
        check_finite(S1_, 1);

        A2_.noalias() = w.W2 * S1_;
        A2_.colwise() += w.b2;
        detail::softplus_columns(A2_, S2_, S2d_, S2dd_, opt.mixed ? &S2ddd_ : nullptr);
        check_finite(S2_, 2);

        value_.noalias() = S2_.transpose() * w.w3;
        value_.array() += w.b3;
        if (!value_.allFinite())
            throw NumericError("non-finite network output (layer 3)");

        if (!opt.input_gradient && !opt.mixed)
            return;

        Delta2_ = S2d_.array().colwise() * w.w3.array();
        R_.noalias() = w.W2.transpose() * Delta2_;
        Delta1_ = S1d_.cwiseProduct(R_);
        G_.noalias() = w.W1.transpose() * Delta1_;

        if (!opt.mixed)
            return;

        const Index n_q = opt.split, n_p = w.in() - opt.split;
        const Index width = w.width();
        J2_.assign(static_cast<std::size_t>(B), Mat());
        mixed_.assign(static_cast<std::size_t>(B), Mat());
        U_ = S2dd_.array().colwise() * w.w3.array();
        V_ = S1dd_.cwiseProduct(R_);
        const auto W1q = w.W1.leftCols(n_q);
        const auto W1p = w.W1.rightCols(n_p);
        Mat scaled(width, w.in());
        for (Index b = 0; b < B; ++b) {
            scaled = S1d_.col(b).asDiagonal() * w.W1;
            Mat& J2 = J2_[b];
            J2.noalias() = w.W2 * scaled;
            Mat& M = mixed_[b];
            M.noalias() = J2.leftCols(n_q).transpose() * (U_.col(b).asDiagonal() * J2.rightCols(n_p));
            M.noalias() += W1q.transpose() * (V_.col(b).asDiagonal() * W1p);
        }
    }

    Index batch() const { return X_.cols(); }
    const Vec& value() const { return value_; }
    /// in x B; column b is the input gradient of sample b.
    const Mat& input_gradient() const { return G_; }
    /// split x (in - split) per sample.
    const std::vector<Mat>& mixed() const { return mixed_; }

    /// Accumulates weight gradients of a scalar L given dL/df (per sample),
    /// dL/d(grad f) (in x B) and optionally dL/d(mixed) (per sample).
    /// Any seed may be null when it is identically zero.
    void backward(const MlpWeights& w, const Vec* value_bar, const Mat* grad_bar,
                  const std::vector<Mat>* mixed_bar, MlpWeights& out) const {
        const Index B = batch();
        const Index width = w.width();
        if (grad_bar && !(opt_.input_gradient || opt_.mixed))
            throw ConfigError("backward through input gradient requires forward with gradients");
        if (mixed_bar && !opt_.mixed)
            throw ConfigError("backward through mixed block requires forward with mixed");

        Mat S2_bar = Mat::Zero(width, B);
        Mat S2d_bar = Mat::Zero(width, B);
        Mat S2dd_bar;
        Mat S1d_bar = Mat::Zero(width, B);
        Mat S1dd_bar;
        Mat R_bar = Mat::Zero(width, B);

        if (mixed_bar) {
            const Index n_q = opt_.split, n_p = w.in() - opt_.split;
            S2dd_bar = Mat::Zero(width, B);
            S1dd_bar = Mat::Zero(width, B);
            const auto W1q = w.W1.leftCols(n_q);
            const auto W1p = w.W1.rightCols(n_p);
            Mat JpMt(width, n_q), JqM(width, n_p), J2_bar(width, w.in()), P(width, w.in());
            Vec u_bar(width), v_bar(width);
            for (Index b = 0; b < B; ++b) {
                const Mat& Mb = (*mixed_bar)[b];
                const Mat& J2 = J2_[b];
                const auto Jq = J2.leftCols(n_q);
                const auto Jp = J2.rightCols(n_p);
                JpMt.noalias() = Jp * Mb.transpose();
                JqM.noalias() = Jq * Mb;
                u_bar = Jq.cwiseProduct(JpMt).rowwise().sum();
                J2_bar.leftCols(n_q) = U_.col(b).asDiagonal() * JpMt;
                J2_bar.rightCols(n_p) = U_.col(b).asDiagonal() * JqM;

                // second-order term through the first layer
                Mat W1pMt = W1p * Mb.transpose(); // width x n_q
                Mat W1qM = W1q * Mb;              // width x n_p
                v_bar = W1q.cwiseProduct(W1pMt).rowwise().sum();
                out.W1.leftCols(n_q) += V_.col(b).asDiagonal() * W1pMt;
                out.W1.rightCols(n_p) += V_.col(b).asDiagonal() * W1qM;

                // J2 = W2 diag(s1') W1
                P.noalias() = w.W2.transpose() * J2_bar;
                S1d_bar.col(b) += P.cwiseProduct(w.W1).rowwise().sum();
                out.W1 += S1d_.col(b).asDiagonal() * P;
                out.W2.noalias() += J2_bar * (S1d_.col(b).asDiagonal() * w.W1).transpose();

                // U = w3 * s2'', V = s1'' * R
                out.w3 += u_bar.cwiseProduct(S2dd_.col(b));
                S2dd_bar.col(b) += u_bar.cwiseProduct(w.w3);
                S1dd_bar.col(b) += v_bar.cwiseProduct(R_.col(b));
                R_bar.col(b) += v_bar.cwiseProduct(S1dd_.col(b));
            }
        }

        if (grad_bar) {
            // G = W1^T Delta1
            out.W1.noalias() += Delta1_ * grad_bar->transpose();
            const Mat Delta1_bar = w.W1 * (*grad_bar);
            // Delta1 = s1' * R
            S1d_bar += Delta1_bar.cwiseProduct(R_);
            R_bar += Delta1_bar.cwiseProduct(S1d_);
        }
        if (grad_bar || mixed_bar) {
            // R = W2^T Delta2
            out.W2.noalias() += Delta2_ * R_bar.transpose();
            const Mat Delta2_bar = w.W2 * R_bar;
            // Delta2 = s2' * w3
            S2d_bar += (Delta2_bar.array().colwise() * w.w3.array()).matrix();
            out.w3 += Delta2_bar.cwiseProduct(S2d_).rowwise().sum();
        }
        if (value_bar) {
            out.w3.noalias() += S2_ * (*value_bar);
            out.b3 += value_bar->sum();
            S2_bar.noalias() += w.w3 * value_bar->transpose();
        }

        Mat A2_bar = S2_bar.cwiseProduct(S2d_) + S2d_bar.cwiseProduct(S2dd_);
        if (mixed_bar)
            A2_bar += S2dd_bar.cwiseProduct(S2ddd_);
        out.W2.noalias() += A2_bar * S1_.transpose();
        out.b2 += A2_bar.rowwise().sum();
        const Mat S1_bar = w.W2.transpose() * A2_bar;

        Mat A1_bar = S1_bar.cwiseProduct(S1d_) + S1d_bar.cwiseProduct(S1dd_);
        if (mixed_bar)
            A1_bar += S1dd_bar.cwiseProduct(S1ddd_);
        out.W1.noalias() += A1_bar * X_.transpose();
        out.b1 += A1_bar.rowwise().sum();
    }

private:
    static void check_finite(const Mat& m, int layer) {
        if (!m.allFinite())
            throw NumericError("non-finite activation in hidden layer " + std::to_string(layer));
    }

    Options opt_;
    Mat X_;
    Mat A1_, S1_, S1d_, S1dd_, S1ddd_;
    Mat A2_, S2_, S2d_, S2dd_, S2ddd_;
    Vec value_;
    Mat Delta2_, R_, Delta1_, G_;
    Mat U_, V_;
    std::vector<Mat> J2_;
    std::vector<Mat> mixed_;
};

// ---------------------------------------------------------------------------
// Finite-difference verification
// ---------------------------------------------------------------------------

/// |a - b| / max(|a|, |b|, floor)
inline double relative_error(double a, double b, double floor = 1e-8) {
    const double scale = std::max({std::abs(a), std::abs(b), floor});
    return std::abs(a - b) / scale;
}

inline double max_relative_error(const Vec& a, const Vec& b, double floor = 1e-8) {
    double worst = 0.0;
    for (Index i = 0; i < a.size(); ++i)
        worst = std::max(worst, relative_error(a[i], b[i], floor));
    return worst;
}

using ScalarField = std::function<double(const Vec&)>;
using ExtendedField = std::function<long double(const Vec&)>;

/// Forward pass of one perceptron in extended precision. Shares no code with
/// MlpTape, so it serves as an independent value oracle for difference checks.
inline long double reference_forward(const MlpWeights& w, const Vec& x) {
    using R = long double;
    auto sp = [](R a) { return (a > 0 ? a : R(0)) + std::log1p(std::exp(-std::fabs(a))); };
    const Index width = w.width();
    std::vector<R> h1(static_cast<std::size_t>(width)), h2(static_cast<std::size_t>(width));
    for (Index r = 0; r < width; ++r) {
        R a = w.b1[r];
        for (Index c = 0; c < w.in(); ++c)
            a += R(w.W1(r, c)) * R(x[c]);
        h1[static_cast<std::size_t>(r)] = sp(a);
    }
    for (Index r = 0; r < width; ++r) {
        R a = w.b2[r];
        for (Index c = 0; c < width; ++c)
            a += R(w.W2(r, c)) * h1[static_cast<std::size_t>(c)];
        h2[static_cast<std::size_t>(r)] = sp(a);
    }
    R out = w.b3;
    for (Index r = 0; r < width; ++r)
        out += R(w.w3[r]) * h2[static_cast<std::size_t>(r)];
    return out;
}

/// Central differences with step h * max(1, |x_i|); `f` may return double or
/// long double, differences are formed in long double.
template <class F>
Vec fd_gradient(const F& f, const Vec& x, double h = 1e-4) {
    Vec g(x.size());
    Vec xp = x;
    for (Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x[i]));
        xp[i] = x[i] + step;
        const double up = xp[i];
        const long double fp = f(xp);
        xp[i] = x[i] - step;
        const double down = xp[i];
        const long double fm = f(xp);
        xp[i] = x[i];
        g[i] = static_cast<double>((fp - fm) / (static_cast<long double>(up) - down));
    }
    return g;
}

/// Central-difference estimate of d2f / dx_i dx_{split+j}, i < split.
template <class F>
Mat fd_mixed_block(const F& f, const Vec& x, Index split, double h = 1e-4) {
    const Index n_q = split, n_p = x.size() - split;
    Mat M(n_q, n_p);
    Vec xp = x;
    for (Index i = 0; i < n_q; ++i) {
        const double hi = h * std::max(1.0, std::abs(x[i]));
        const long double di = static_cast<long double>(x[i] + hi) - (x[i] - hi);
        for (Index j = 0; j < n_p; ++j) {
            const Index k = split + j;
            const double hk = h * std::max(1.0, std::abs(x[k]));
            const long double dk = static_cast<long double>(x[k] + hk) - (x[k] - hk);
            auto at = [&](double si, double sk) -> long double {
                xp[i] = x[i] + si * hi;
                xp[k] = x[k] + sk * hk;
                const long double v = f(xp);
                xp[i] = x[i];
                xp[k] = x[k];
                return v;
            };
            M(i, j) = static_cast<double>((at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (di * dk));
        }
    }
    return M;
}

} // namespace shnn
