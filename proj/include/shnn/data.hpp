#pragma once

// Training, validation and test sets of (q, p, qdot, pdot), stored
// column-wise so that a batch is a column selection.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "shnn/error.hpp"
#include "shnn/io.hpp"
#include "shnn/random.hpp"
#include "shnn/systems.hpp"

namespace shnn {

using Mat = Eigen::MatrixXd;

struct Sample {
    PhaseState state;
    PhaseVelocity deriv;
};

enum class ProvenanceKind { sampled, augmented, grid, file };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::sampled;
    int mu = 0; // augmentation factor when kind == augmented

    std::string str() const {
        switch (kind) {
        case ProvenanceKind::sampled:
            return "sampled";
        case ProvenanceKind::augmented:
            return "augmented(" + std::to_string(mu) + ")";
        case ProvenanceKind::grid:
            return "grid";
        case ProvenanceKind::file:
            return "file";
        }
        return "?";
    }
};

struct Dataset {
    std::string system;
    Provenance provenance;
    Mat Q, P, dQ, dP; // n x K each

    Index n() const { return Q.rows(); }
    Index size() const { return Q.cols(); }
    bool empty() const { return Q.cols() == 0; }

    Sample sample(Index i) const { return {{Q.col(i), P.col(i)}, {dQ.col(i), dP.col(i)}}; }
    PhaseState state(Index i) const { return {Q.col(i), P.col(i)}; }

    /// Stacked states (2n x K).
    Mat Z() const {
        Mat z(2 * n(), size());
        z << Q, P;
        return z;
    }

    Dataset select(const std::vector<Index>& idx) const {
        Dataset out{system, provenance, Mat(n(), idx.size()), Mat(n(), idx.size()), Mat(n(), idx.size()),
                    Mat(n(), idx.size())};
        for (std::size_t j = 0; j < idx.size(); ++j) {
            out.Q.col(j) = Q.col(idx[j]);
            out.P.col(j) = P.col(idx[j]);
            out.dQ.col(j) = dQ.col(idx[j]);
            out.dP.col(j) = dP.col(idx[j]);
        }
        return out;
    }

    bool operator==(const Dataset& o) const {
        return Q.rows() == o.Q.rows() && Q.cols() == o.Q.cols() && Q == o.Q && P == o.P && dQ == o.dQ &&
               dP == o.dP;
    }
};

namespace detail {

inline Dataset with_analytic_field(const SystemDef& sys, Mat Q, Mat P, Provenance prov) {
    const Index K = Q.cols();
    Dataset ds{sys.name(), prov, std::move(Q), std::move(P), Mat(sys.n(), K), Mat(sys.n(), K)};
    for (Index i = 0; i < K; ++i) {
        const PhaseVelocity f = sys.vector_field(ds.state(i));
        ds.dQ.col(i) = f.dq;
        ds.dP.col(i) = f.dp;
    }
    return ds;
}

} // namespace detail

/// i.i.d. states over the system's box domain with analytic derivatives.
inline Dataset sample_uniform(const SystemDef& sys, Index count, std::uint64_t seed) {
    if (count < 1)
        throw ConfigError("sample count must be at least 1");
    const Index n = sys.n();
    const Interval dq = sys.domain_q(), dp = sys.domain_p();
    Mat Q(n, count), P(n, count);
    Rng rng(seed);
    for (Index k = 0; k < count; ++k) {
        for (Index i = 0; i < n; ++i)
            Q(i, k) = rng.uniform(dq.lo, dq.hi);
        for (Index i = 0; i < n; ++i)
            P(i, k) = rng.uniform(dp.lo, dp.hi);
    }
    return detail::with_analytic_field(sys, std::move(Q), std::move(P), {ProvenanceKind::sampled, 0});
}

/// Seeded shuffle, then the last round(K * val_fraction) samples become
/// validation data.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw ConfigError("validation fraction must lie in (0, 1)");
    const Index K = ds.size();
    const Index n_val = static_cast<Index>(std::llround(static_cast<double>(K) * val_fraction));
    const Index n_train = K - n_val;
    if (n_val < 1 || n_train < 1)
        throw ConfigError("split of " + std::to_string(K) + " samples leaves an empty partition");
    Rng rng(seed);
    const auto perm = rng.permutation(static_cast<std::size_t>(K));
    std::vector<Index> train_idx(perm.begin(), perm.begin() + n_train);
    std::vector<Index> val_idx(perm.begin() + n_train, perm.end());
    return {ds.select(train_idx), ds.select(val_idx)};
}

/// Appends, for each shift s = 1..mu, the recombined samples
/// (q^i, p^{i+s}, qdot^{i+s}, pdot^i) with indices taken mod K.
inline Dataset augment(const Dataset& train, int mu) {
    const Index K = train.size();
    if (mu < 1 || mu > K - 1)
        throw ConfigError("augmentation factor mu = " + std::to_string(mu) + " must lie in [1, " +
                          std::to_string(K - 1) + "]");
    const Index total = K * (1 + mu);
    Dataset out{train.system, {ProvenanceKind::augmented, mu}, Mat(train.n(), total), Mat(train.n(), total),
                Mat(train.n(), total), Mat(train.n(), total)};
    out.Q.leftCols(K) = train.Q;
    out.P.leftCols(K) = train.P;
    out.dQ.leftCols(K) = train.dQ;
    out.dP.leftCols(K) = train.dP;
    for (int s = 1; s <= mu; ++s) {
        for (Index i = 0; i < K; ++i) {
            const Index j = (i + s) % K;
            const Index dst = s * K + i;
            out.Q.col(dst) = train.Q.col(i);
            out.P.col(dst) = train.P.col(j);
            out.dQ.col(dst) = train.dQ.col(j);
            out.dP.col(dst) = train.dP.col(i);
        }
    }
    return out;
}

inline constexpr double default_grid_cap = 1e7;

/// Endpoint-inclusive evenly spaced points per coordinate over the box
/// domain; the last coordinate varies fastest.
inline Dataset grid(const SystemDef& sys, Index points_per_dim, double cap = default_grid_cap) {
    if (points_per_dim < 2)
        throw ConfigError("grid needs at least 2 points per dimension");
    const Index n = sys.n(), dims = 2 * n;
    const double total_d = std::pow(static_cast<double>(points_per_dim), static_cast<double>(dims));
    if (total_d > cap)
        throw ConfigError("grid of " + std::to_string(points_per_dim) + "^" + std::to_string(dims) +
                          " points exceeds the cap of " + io::format_shortest(cap));
    const Index total = static_cast<Index>(std::llround(total_d));
    const Interval dq = sys.domain_q(), dp = sys.domain_p();
    auto coord = [&](const Interval& iv, Index k) {
        if (k == points_per_dim - 1)
            return iv.hi;
        return iv.lo + (iv.hi - iv.lo) * static_cast<double>(k) / static_cast<double>(points_per_dim - 1);
    };
    Mat Q(n, total), P(n, total);
    std::vector<Index> digit(static_cast<std::size_t>(dims), 0);
    for (Index k = 0; k < total; ++k) {
        for (Index d = 0; d < dims; ++d) {
            if (d < n)
                Q(d, k) = coord(dq, digit[d]);
            else
                P(d - n, k) = coord(dp, digit[d]);
        }
        for (Index d = dims - 1; d >= 0; --d) {
            if (++digit[d] < points_per_dim)
                break;
            digit[d] = 0;
        }
    }
    return detail::with_analytic_field(sys, std::move(Q), std::move(P), {ProvenanceKind::grid, 0});
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline std::string csv_header(Index n) {
    std::vector<std::string> cols;
    for (const char* prefix : {"q", "p", "dq", "dp"})
        for (Index i = 1; i <= n; ++i)
            cols.push_back(prefix + std::to_string(i));
    return io::join(cols);
}

inline std::string to_csv(const Dataset& ds) {
    std::string out = csv_header(ds.n()) + "\n";
    for (Index k = 0; k < ds.size(); ++k) {
        std::string row;
        for (const Mat* m : {&ds.Q, &ds.P, &ds.dQ, &ds.dP})
            for (Index i = 0; i < ds.n(); ++i) {
                if (!row.empty())
                    row += ',';
                row += io::format_double((*m)(i, k));
            }
        out += row + "\n";
    }
    return out;
}

inline void write_csv(const Dataset& ds, const std::filesystem::path& path) { io::write_file(path, to_csv(ds)); }

inline Dataset parse_csv(const std::string& text, std::string system = {}) {
    const auto lines = io::lines(text);
    if (lines.empty() || lines[0].empty())
        throw ParseError("empty dataset file", 1);
    const auto header = io::split(lines[0]);
    if (header.size() % 4 != 0 || header.empty())
        throw ParseError("header must have 4n columns", 1);
    const Index n = static_cast<Index>(header.size() / 4);
    if (lines[0] != csv_header(n))
        throw ParseError("unexpected header, expected " + csv_header(n), 1);
    std::vector<std::vector<double>> rows;
    for (std::size_t l = 1; l < lines.size(); ++l) {
        if (lines[l].empty())
            continue;
        const auto cells = io::split(lines[l]);
        if (cells.size() != header.size())
            throw ParseError("expected " + std::to_string(header.size()) + " columns, found " +
                                 std::to_string(cells.size()),
                             l + 1);
        std::vector<double> row;
        row.reserve(cells.size());
        for (auto c : cells) {
            const auto v = io::parse_double(c);
            if (!v || !std::isfinite(*v))
                throw ParseError("malformed number '" + std::string(c) + "'", l + 1);
            row.push_back(*v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw ParseError("dataset file has no samples", 2);
    const Index K = static_cast<Index>(rows.size());
    Dataset ds{std::move(system), {ProvenanceKind::file, 0}, Mat(n, K), Mat(n, K), Mat(n, K), Mat(n, K)};
    for (Index k = 0; k < K; ++k)
        for (Index i = 0; i < n; ++i) {
            ds.Q(i, k) = rows[k][i];
            ds.P(i, k) = rows[k][n + i];
            ds.dQ(i, k) = rows[k][2 * n + i];
            ds.dP(i, k) = rows[k][3 * n + i];
        }
    return ds;
}

inline Dataset read_csv(const std::filesystem::path& path, std::string system = {}) {
    return parse_csv(io::read_file(path), std::move(system));
}

/// {system}_{role}_{seed}.csv
inline std::string dataset_filename(const std::string& system, const std::string& role, std::uint64_t seed) {
    return system + "_" + role + "_" + std::to_string(seed) + ".csv";
}

} // namespace shnn
