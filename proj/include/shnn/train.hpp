#pragma once

// Minibatch Adam training with validation-based early stopping, and the
// eight bias combinations (HNN, O, L, I, OL, LI, OI, OLI).

#include <Eigen/Dense>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shnn/data.hpp"
#include "shnn/error.hpp"
#include "shnn/io.hpp"
#include "shnn/loss.hpp"
#include "shnn/model.hpp"
#include "shnn/presets.hpp"
#include "shnn/random.hpp"

namespace shnn {

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam(AdamConfig cfg, Index size) : cfg_(cfg), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {}

    void step(Vec& params, const Vec& grad) {
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        params.array() -= cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.eps);
    }

    long steps() const { return t_; }

private:
    AdamConfig cfg_;
    Vec m_, v_;
    long t_ = 0;
};

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

enum class StopReason { patience, max_epochs, time_budget, diverged };

inline std::string to_string(StopReason r) {
    switch (r) {
    case StopReason::patience:
        return "patience";
    case StopReason::max_epochs:
        return "max_epochs";
    case StopReason::time_budget:
        return "time_budget";
    case StopReason::diverged:
        return "diverged";
    }
    return "?";
}

struct TrainConfig {
    Index batch_size = 80;
    AdamConfig adam;
    long patience_epochs = 4000;
    long max_epochs = 15000;
    std::optional<double> time_budget_seconds;
    std::uint64_t seed = 0;
    /// Validation loss uses the separability term whenever training does.
    bool validation_includes_mixed = true;
    long checkpoint_every = 50;
    std::function<void(long epoch, const HamiltonianModel&)> on_checkpoint;

    void validate() const {
        if (batch_size < 1)
            throw ConfigError("batch size must be at least 1");
        if (patience_epochs < 1)
            throw ConfigError("patience must be at least 1 epoch");
        if (max_epochs < 0)
            throw ConfigError("max epochs must be non-negative");
        if (!(adam.learning_rate > 0.0))
            throw ConfigError("learning rate must be positive");
    }
};

struct EpochLoss {
    long epoch;
    double train_loss;
    double val_loss;
};

struct TrainReport {
    long epochs_run = 0;
    double wall_seconds = 0.0;
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
    long best_epoch = 0;
    std::vector<EpochLoss> loss_curve;
    StopReason stop_reason = StopReason::max_epochs;
    std::string failure; // set when diverged
};

/// Trains `model` in place on `train_set`, keeping the weights of the epoch
/// with the lowest validation loss (the initial weights count as epoch 0).
inline TrainReport train(HamiltonianModel& model, const Dataset& train_set, const Dataset& val_set,
                         const LossSpec& spec, const TrainConfig& cfg) {
    cfg.validate();
    if (train_set.empty() || val_set.empty())
        throw ConfigError("training and validation sets must be nonempty");
    if (train_set.n() != model.n() || val_set.n() != model.n())
        throw ConfigError("dataset dimension does not match the model");
    spec.validate(model.n());

    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };

    LossSpec val_spec = spec;
    if (!cfg.validation_includes_mixed)
        val_spec.include_mixed = false;

    TrainReport report;
    LossEvaluator ev;
    Adam adam(cfg.adam, model.params.size());
    Rng rng(derive_seed(cfg.seed, 0x5bd1e995));
    const Index K = train_set.size(), n = model.n();

    report.initial_val_loss = ev.evaluate(model, val_set, val_spec, nullptr).total(val_spec);
    report.best_val_loss = report.initial_val_loss;
    Vec best_params = model.params.values;

    Vec grad(model.params.size());
    Mat bQ(n, cfg.batch_size), bP(n, cfg.batch_size), bdQ(n, cfg.batch_size), bdP(n, cfg.batch_size);
    report.stop_reason = StopReason::max_epochs;
    for (long epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        if (cfg.time_budget_seconds && elapsed() >= *cfg.time_budget_seconds) {
            report.stop_reason = StopReason::time_budget;
            break;
        }
        const auto perm = rng.permutation(static_cast<std::size_t>(K));
        double train_sum = 0.0;
        try {
            long batch_index = 0;
            for (Index start_i = 0; start_i < K; start_i += cfg.batch_size, ++batch_index) {
                const Index B = std::min(cfg.batch_size, K - start_i);
                bQ.resize(n, B);
                bP.resize(n, B);
                bdQ.resize(n, B);
                bdP.resize(n, B);
                for (Index j = 0; j < B; ++j) {
                    const Index src = static_cast<Index>(perm[start_i + j]);
                    bQ.col(j) = train_set.Q.col(src);
                    bP.col(j) = train_set.P.col(src);
                    bdQ.col(j) = train_set.dQ.col(src);
                    bdP.col(j) = train_set.dP.col(src);
                }
                grad.setZero();
                const LossTerms t = ev.evaluate(model, bQ, bP, bdQ, bdP, spec, &grad, batch_index);
                train_sum += t.total(spec) * static_cast<double>(B);
                adam.step(model.params.values, grad);
            }
            const double val = ev.evaluate(model, val_set, val_spec, nullptr).total(val_spec);
            report.loss_curve.push_back({epoch, train_sum / static_cast<double>(K), val});
            report.epochs_run = epoch;
            if (val < report.best_val_loss) {
                report.best_val_loss = val;
                report.best_epoch = epoch;
                best_params = model.params.values;
            }
        } catch (const NumericError& e) {
            report.stop_reason = StopReason::diverged;
            report.failure = "epoch " + std::to_string(epoch) + ", " + e.what();
            break;
        }
        if (cfg.on_checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            cfg.on_checkpoint(epoch, model);
        if (epoch - report.best_epoch >= cfg.patience_epochs) {
            report.stop_reason = StopReason::patience;
            break;
        }
    }
    model.params.values = best_params;
    report.wall_seconds = elapsed();
    return report;
}

inline std::string loss_curve_csv(const TrainReport& r) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (const EpochLoss& e : r.loss_curve)
        out += std::to_string(e.epoch) + "," + io::format_double(e.train_loss) + "," +
               io::format_double(e.val_loss) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Bias combinations
// ---------------------------------------------------------------------------

enum class Variant { HNN, O, L, I, OL, LI, OI, OLI };

inline const std::vector<Variant>& all_variants() {
    static const std::vector<Variant> v{Variant::HNN, Variant::O,  Variant::L,  Variant::I,
                                        Variant::OL,  Variant::LI, Variant::OI, Variant::OLI};
    return v;
}

inline std::string to_string(Variant v) {
    switch (v) {
    case Variant::HNN:
        return "HNN";
    case Variant::O:
        return "HNN-O";
    case Variant::L:
        return "HNN-L";
    case Variant::I:
        return "HNN-I";
    case Variant::OL:
        return "HNN-OL";
    case Variant::LI:
        return "HNN-LI";
    case Variant::OI:
        return "HNN-OI";
    case Variant::OLI:
        return "HNN-OLI";
    }
    return "?";
}

/// Accepts "HNN", "OI", "HNN-OI" and lower-case forms.
inline Variant parse_variant(std::string s) {
    for (auto& c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (s.rfind("HNN-", 0) == 0)
        s = s.substr(4);
    for (Variant v : all_variants()) {
        std::string name = to_string(v);
        if (name.rfind("HNN-", 0) == 0)
            name = name.substr(4);
        if (s == name)
            return v;
    }
    throw ConfigError("unknown variant '" + s + "' (HNN, O, L, I, OL, LI, OI, OLI)");
}

inline bool uses_observational(Variant v) {
    return v == Variant::O || v == Variant::OL || v == Variant::OI || v == Variant::OLI;
}
inline bool uses_learning(Variant v) {
    return v == Variant::L || v == Variant::OL || v == Variant::LI || v == Variant::OLI;
}
inline bool uses_inductive(Variant v) {
    return v == Variant::I || v == Variant::LI || v == Variant::OI || v == Variant::OLI;
}

/// Everything a variant run may change; unset fields fall back to the
/// system preset.
struct RunOptions {
    int mu = 2;
    double c3 = 1.0;
    ExecMode exec = ExecMode::parallel;
    Summation summation = Summation::L0;
    std::optional<double> learning_rate;
    std::optional<Index> baseline_width;
    std::optional<Index> conjoined_width;
    Index sample_count = 512;
    double val_fraction = 0.2;
    Index batch_size = 80;
    long patience_epochs = 4000;
    long max_epochs = 15000;
    std::optional<double> time_budget_seconds;
    long checkpoint_every = 50;
    std::function<void(long epoch, const HamiltonianModel&)> on_checkpoint;
};

struct RunData {
    Dataset train; // after augmentation
    Dataset val;
};

/// Seed streams shared by every variant so that runs with the same seed see
/// the same data and the same initial weights for the same architecture.
inline std::uint64_t data_seed(std::uint64_t seed) { return derive_seed(seed, 1); }
inline std::uint64_t split_seed(std::uint64_t seed) { return derive_seed(seed, 2); }
inline std::uint64_t init_seed(std::uint64_t seed) { return derive_seed(seed, 3); }
inline std::uint64_t shuffle_seed(std::uint64_t seed) { return derive_seed(seed, 4); }

/// Sampled data split into training and validation parts (training part not
/// yet augmented).
inline RunData make_run_data(const SystemDef& sys, std::uint64_t seed, const RunOptions& opt) {
    const Dataset all = sample_uniform(sys, opt.sample_count, data_seed(seed));
    auto [tr, va] = split(all, opt.val_fraction, split_seed(seed));
    return {std::move(tr), std::move(va)};
}

inline ModelSpec variant_model_spec(Variant v, const SystemDef& sys, const RunOptions& opt) {
    const SystemPreset pre = preset_for(sys);
    ModelSpec spec;
    spec.n = sys.n();
    if (uses_inductive(v)) {
        spec.kind = ModelKind::conjoined;
        spec.hidden_width = opt.conjoined_width.value_or(pre.conjoined_width);
        spec.exec = opt.exec;
        spec.summation = opt.summation;
    } else {
        spec.kind = ModelKind::baseline;
        spec.hidden_width = opt.baseline_width.value_or(pre.baseline_width);
    }
    return spec;
}

inline LossSpec variant_loss_spec(Variant v, const SystemDef& sys, const RunOptions& opt) {
    LossSpec spec = LossSpec::pinned_at_origin(sys);
    spec.include_mixed = uses_learning(v);
    spec.c3 = uses_learning(v) ? opt.c3 : 0.0;
    return spec;
}

struct VariantRun {
    Variant variant;
    HamiltonianModel model;
    TrainReport report;
    Index train_size = 0;
};

inline VariantRun run_variant(Variant v, const SystemDef& sys, std::uint64_t seed, const RunOptions& opt,
                              const RunData& data) {
    Dataset train_set = uses_observational(v) ? augment(data.train, opt.mu) : data.train;
    HamiltonianModel model = init_model(variant_model_spec(v, sys, opt), init_seed(seed));
    TrainConfig cfg;
    cfg.batch_size = opt.batch_size;
    cfg.adam.learning_rate = opt.learning_rate.value_or(preset_for(sys).learning_rate);
    cfg.patience_epochs = opt.patience_epochs;
    cfg.max_epochs = opt.max_epochs;
    cfg.time_budget_seconds = opt.time_budget_seconds;
    cfg.seed = shuffle_seed(seed);
    cfg.checkpoint_every = opt.checkpoint_every;
    cfg.on_checkpoint = opt.on_checkpoint;
    TrainReport report = train(model, train_set, data.val, variant_loss_spec(v, sys, opt), cfg);
    return {v, std::move(model), std::move(report), train_set.size()};
}

inline VariantRun run_variant(Variant v, const SystemDef& sys, std::uint64_t seed, const RunOptions& opt = {}) {
    return run_variant(v, sys, seed, opt, make_run_data(sys, seed, opt));
}

} // namespace shnn
