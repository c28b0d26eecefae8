#pragma once

// Experiment harness behind the command-line tool: sweeps, the eight-variant
// comparison, time-budget runs, convergence curves, rollouts and the
// energy-split study. Each command writes CSV files under an output
// directory plus a manifest listing them.

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "shnn/data.hpp"
#include "shnn/dynamics.hpp"
#include "shnn/error.hpp"
#include "shnn/eval.hpp"
#include "shnn/io.hpp"
#include "shnn/model.hpp"
#include "shnn/presets.hpp"
#include "shnn/systems.hpp"
#include "shnn/train.hpp"

namespace shnn {

inline constexpr const char* tool_version = "1.0.0";

struct ExperimentConfig {
    std::string system = "pendulum";
    std::vector<Variant> variants = all_variants();
    std::vector<std::uint64_t> seeds = default_seeds();
    int mu = 2;
    double c3 = 1.0;
    ExecMode exec = ExecMode::parallel;
    Summation summation = Summation::L0;
    std::optional<double> learning_rate;
    std::optional<Index> baseline_width;
    std::optional<Index> conjoined_width;
    Index sample_count = 512;
    long patience = 4000;
    long max_epochs = 15000;
    long checkpoint_every = 50;
    std::filesystem::path out = "runs";
    unsigned workers = default_workers();
    /// Metric CSVs carry measured wall time; off writes 0 for reproducible files.
    bool record_wall_time = true;

    std::vector<int> mu_values{1, 2, 3, 4, 5, 10, 20, 30, 40, 50};
    std::vector<double> c3_values{0.25, 0.50, 1.00, 2.00, 4.00};

    Index test_points_per_dim = 10;
    Index fallback_test_samples = 10000;

    double rollout_step = 0.01;
    double rollout_end = 6.0 * std::numbers::pi;
    std::optional<PhaseState> rollout_start;
    /// Record the model's own H-hat in candidate trajectory files instead of the true H.
    bool rollout_model_energy = false;
    /// `compare` runs under the per-seed baseline time budget.
    bool time_budget = false;

    static std::vector<std::uint64_t> default_seeds() {
        std::vector<std::uint64_t> s;
        for (std::uint64_t i = 0; i < 20; ++i)
            s.push_back(i);
        return s;
    }

    static unsigned default_workers() {
        if (const char* env = std::getenv("SHNN_WORKERS")) {
            const int v = std::atoi(env);
            if (v > 0)
                return static_cast<unsigned>(v);
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }

    void validate() const {
        make_system(system);
        if (seeds.empty())
            throw ConfigError("seed list is empty");
        if (variants.empty())
            throw ConfigError("variant list is empty");
        if (mu < 1)
            throw ConfigError("mu must be at least 1");
        if (!(c3 >= 0.0))
            throw ConfigError("c3 must be non-negative");
        if (patience < 1 || max_epochs < 0)
            throw ConfigError("patience must be >= 1 and epochs >= 0");
        if (workers < 1)
            throw ConfigError("need at least one worker");
    }

    RunOptions run_options() const {
        RunOptions o;
        o.mu = mu;
        o.c3 = c3;
        o.exec = exec;
        o.summation = summation;
        o.learning_rate = learning_rate;
        o.baseline_width = baseline_width;
        o.conjoined_width = conjoined_width;
        o.sample_count = sample_count;
        o.patience_epochs = patience;
        o.max_epochs = max_epochs;
        o.checkpoint_every = checkpoint_every;
        return o;
    }

    /// Canonical text of every setting that influences results.
    std::string canonical() const {
        std::ostringstream s;
        s << "system=" << system << ";variants=";
        for (Variant v : variants)
            s << to_string(v) << ' ';
        s << ";seeds=";
        for (auto x : seeds)
            s << x << ' ';
        s << ";mu=" << mu << ";c3=" << io::format_shortest(c3) << ";exec=" << to_string(exec)
          << ";summation=" << to_string(summation) << ";lr=" << (learning_rate ? io::format_shortest(*learning_rate) : "")
          << ";bw=" << (baseline_width ? std::to_string(*baseline_width) : "")
          << ";cw=" << (conjoined_width ? std::to_string(*conjoined_width) : "") << ";samples=" << sample_count
          << ";patience=" << patience << ";epochs=" << max_epochs << ";mus=";
        for (int m : mu_values)
            s << m << ' ';
        s << ";c3s=";
        for (double c : c3_values)
            s << io::format_shortest(c) << ' ';
        s << ";grid=" << test_points_per_dim << ";h=" << io::format_shortest(rollout_step)
          << ";t_end=" << io::format_shortest(rollout_end) << ";budget=" << time_budget;
        return s.str();
    }
};

/// FNV-1a, stable across platforms.
inline std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : cfg.canonical()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to per-index slots; the first exception (by index) is rethrown.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Evenly spaced grid when it fits under the cap, otherwise a fixed uniform
/// sample (high-dimensional chains).
inline Dataset make_test_set(const SystemDef& sys, const ExperimentConfig& cfg) {
    const double total = std::pow(static_cast<double>(cfg.test_points_per_dim), 2.0 * static_cast<double>(sys.n()));
    if (total <= default_grid_cap)
        return grid(sys, cfg.test_points_per_dim);
    return sample_uniform(sys, cfg.fallback_test_samples, derive_seed(0x7e57, static_cast<std::uint64_t>(sys.n())));
}

inline std::string file_tag(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
            c = '_';
    return s;
}

inline std::filesystem::path checkpoint_path(const ExperimentConfig& cfg, const std::string& system,
                                             const std::string& label, std::uint64_t seed) {
    return cfg.out / "checkpoints" / (file_tag(system + "_" + label + "_" + std::to_string(seed)) + ".ckpt");
}

/// One training job of a command.
struct Job {
    Variant variant = Variant::HNN;
    std::uint64_t seed = 0;
    RunOptions options;
    std::string label;   // variant name plus sweep setting
    std::string setting; // sweep value, empty for plain runs
};

struct JobResult {
    MetricRow metrics;
    TrainReport report;
    std::filesystem::path checkpoint;
};

class Manifest {
public:
    explicit Manifest(const ExperimentConfig& cfg, std::string command) : cfg_(cfg) {
        doc_["tool_version"] = tool_version;
        doc_["command"] = std::move(command);
        doc_["config_hash"] = config_hash(cfg);
        doc_["config"] = cfg.canonical();
        doc_["artifacts"] = nlohmann::json::array();
    }

    void add(const std::filesystem::path& p) {
        std::lock_guard lock(mu_);
        doc_["artifacts"].push_back(std::filesystem::relative(p, cfg_.out).generic_string());
    }

    void note(const std::string& key, nlohmann::json value) {
        std::lock_guard lock(mu_);
        doc_[key] = std::move(value);
    }

    /// Writes manifest.json after confirming every listed artifact exists.
    std::filesystem::path write() {
        for (const auto& a : doc_["artifacts"])
            if (!std::filesystem::exists(cfg_.out / a.get<std::string>()))
                throw ConfigError("manifest references missing file " + a.get<std::string>());
        const auto path = cfg_.out / "manifest.json";
        io::write_file(path, doc_.dump(2) + "\n");
        return path;
    }

private:
    const ExperimentConfig& cfg_;
    nlohmann::json doc_;
    std::mutex mu_;
};

inline void write_artifact(Manifest& m, const std::filesystem::path& p, const std::string& contents) {
    io::write_file(p, contents);
    m.add(p);
}

/// Runs every job, evaluates it on the test set and saves its checkpoint.
/// Results come back in job order whatever the scheduling.
inline std::vector<JobResult> run_jobs(const ExperimentConfig& cfg, const std::vector<Job>& jobs, Manifest& manifest,
                                       const std::string& checkpoint_group = "") {
    const SystemPtr sys = make_system(cfg.system);
    const Dataset test = make_test_set(*sys, cfg);
    std::vector<JobResult> results(jobs.size());
    parallel_for(jobs.size(), cfg.workers, [&](std::size_t i) {
        const Job& job = jobs[i];
        VariantRun run = run_variant(job.variant, *sys, job.seed, job.options);
        JobResult& r = results[i];
        r.metrics = evaluate_model(run.model, test, sys);
        r.metrics.variant = job.label;
        r.metrics.seed = job.seed;
        r.metrics.epochs = run.report.epochs_run;
        r.metrics.wall_seconds = run.report.wall_seconds;
        r.report = std::move(run.report);
        const std::string group = checkpoint_group.empty() ? "" : checkpoint_group + "/";
        r.checkpoint = cfg.out / "checkpoints" / group /
                       (file_tag(sys->name() + "_" + job.label + "_" + std::to_string(job.seed)) + ".ckpt");
        save_model(run.model, r.checkpoint);
        manifest.add(r.checkpoint);
    });
    return results;
}

inline std::string timing_csv(const std::vector<Job>& jobs, const std::vector<JobResult>& results) {
    std::string out = "variant,system,seed,epochs,best_epoch,stop_reason,wall_seconds\n";
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto& r = results[i];
        out += r.metrics.variant + "," + r.metrics.system + "," + std::to_string(jobs[i].seed) + "," +
               std::to_string(r.report.epochs_run) + "," + std::to_string(r.report.best_epoch) + "," +
               to_string(r.report.stop_reason) + "," + io::format_double(r.report.wall_seconds) + "\n";
    }
    return out;
}

/// Per-setting mean and standard error over seeds, in first-appearance order.
inline std::string summary_csv(const std::string& setting_name, const std::vector<Job>& jobs,
                               const std::vector<JobResult>& results, bool include_wall_time) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const std::string key = jobs[i].label;
        if (!groups.count(key))
            order.push_back(key);
        groups[key].push_back(i);
    }
    auto fmt = [](const Aggregate& a) { return io::format_double(a.mean) + "," + io::format_double(a.std_error); };
    std::string out = "variant,system," + setting_name +
                      ",seeds,e_h_mean,e_h_se,e_v_mean,e_v_se,e_ke_mean,e_ke_se,e_pe_mean,e_pe_se,"
                      "epochs_mean,epochs_se,wall_mean,wall_se\n";
    for (const auto& key : order) {
        std::vector<double> eh, ev, ke, pe, ep, wall;
        for (std::size_t i : groups[key]) {
            const MetricRow& m = results[i].metrics;
            eh.push_back(m.e_h);
            ev.push_back(m.e_v);
            if (m.e_ke)
                ke.push_back(*m.e_ke);
            if (m.e_pe)
                pe.push_back(*m.e_pe);
            ep.push_back(static_cast<double>(m.epochs));
            wall.push_back(include_wall_time ? m.wall_seconds : 0.0);
        }
        const Job& first = jobs[groups[key].front()];
        out += to_string(first.variant) + "," + results[groups[key].front()].metrics.system + "," + first.setting +
               "," + std::to_string(eh.size()) + "," + fmt(aggregate(eh)) + "," + fmt(aggregate(ev)) + "," +
               (ke.empty() ? "," : fmt(aggregate(ke))) + "," + (pe.empty() ? "," : fmt(aggregate(pe))) + "," +
               fmt(aggregate(ep)) + "," + fmt(aggregate(wall)) + "\n";
    }
    return out;
}

struct CommandResult {
    std::vector<std::filesystem::path> files;
    std::vector<MetricRow> rows;
    bool any_diverged = false;
};

inline CommandResult finish_training_command(const ExperimentConfig& cfg, const std::string& name,
                                             const std::string& setting_name, const std::vector<Job>& jobs,
                                             const std::vector<JobResult>& results, Manifest& manifest) {
    CommandResult cr;
    for (const auto& r : results) {
        cr.rows.push_back(r.metrics);
        if (r.report.stop_reason == StopReason::diverged)
            cr.any_diverged = true;
    }
    const auto metrics = cfg.out / (name + "_metrics.csv");
    const auto summary = cfg.out / (name + "_summary.csv");
    const auto timing = cfg.out / (name + "_timing.csv");
    write_artifact(manifest, metrics, metric_csv(cr.rows, cfg.record_wall_time));
    write_artifact(manifest, summary, summary_csv(setting_name, jobs, results, cfg.record_wall_time));
    write_artifact(manifest, timing, timing_csv(jobs, results));
    cr.files = {metrics, summary, timing, manifest.write()};
    return cr;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

/// Sampled training data (before the validation split), the fitting and
/// validation partitions, and the test set, per seed.
inline CommandResult cmd_generate(const ExperimentConfig& cfg) {
    cfg.validate();
    const SystemPtr sys = make_system(cfg.system);
    Manifest manifest(cfg, "generate");
    CommandResult cr;
    const RunOptions opt = cfg.run_options();
    const Dataset test = make_test_set(*sys, cfg);
    for (std::uint64_t seed : cfg.seeds) {
        const Dataset all = sample_uniform(*sys, opt.sample_count, data_seed(seed));
        auto [fit, val] = split(all, opt.val_fraction, split_seed(seed));
        const std::pair<std::string, const Dataset*> files[] = {
            {"train", &all}, {"fit", &fit}, {"val", &val}, {"test", &test}};
        for (const auto& [role, ds] : files) {
            const auto path = cfg.out / "data" / dataset_filename(sys->name(), role, seed);
            write_artifact(manifest, path, to_csv(*ds));
            cr.files.push_back(path);
        }
    }
    cr.files.push_back(manifest.write());
    return cr;
}

inline CommandResult cmd_sweep_mu(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "sweep-mu");
    std::vector<Job> jobs;
    for (int mu : cfg.mu_values)
        for (auto seed : cfg.seeds) {
            Job j{Variant::O, seed, cfg.run_options(), "HNN-O_mu" + std::to_string(mu), std::to_string(mu)};
            j.options.mu = mu;
            jobs.push_back(std::move(j));
        }
    const auto results = run_jobs(cfg, jobs, manifest, "sweep_mu");
    return finish_training_command(cfg, "sweep_mu", "mu", jobs, results, manifest);
}

inline CommandResult cmd_sweep_c3(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "sweep-c3");
    std::vector<Job> jobs;
    for (double c3 : cfg.c3_values)
        for (auto seed : cfg.seeds) {
            Job j{Variant::L, seed, cfg.run_options(), "HNN-L_c3_" + io::format_shortest(c3),
                  io::format_shortest(c3)};
            j.options.c3 = c3;
            jobs.push_back(std::move(j));
        }
    const auto results = run_jobs(cfg, jobs, manifest, "sweep_c3");
    return finish_training_command(cfg, "sweep_c3", "c3", jobs, results, manifest);
}

inline CommandResult cmd_sweep_summation(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "sweep-summation");
    std::vector<Job> jobs;
    for (Summation s : {Summation::L0, Summation::L1, Summation::L2, Summation::L3, Summation::L4})
        for (auto seed : cfg.seeds) {
            Job j{Variant::I, seed, cfg.run_options(), "HNN-I_" + to_string(s), to_string(s)};
            j.options.summation = s;
            jobs.push_back(std::move(j));
        }
    const auto results = run_jobs(cfg, jobs, manifest, "sweep_summation");
    return finish_training_command(cfg, "sweep_summation", "summation", jobs, results, manifest);
}

inline CommandResult cmd_sweep_exec(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "sweep-exec");
    std::vector<Job> jobs;
    for (ExecMode m : {ExecMode::parallel, ExecMode::series})
        for (auto seed : cfg.seeds) {
            Job j{Variant::I, seed, cfg.run_options(), "HNN-I_" + to_string(m), to_string(m)};
            j.options.exec = m;
            jobs.push_back(std::move(j));
        }
    const auto results = run_jobs(cfg, jobs, manifest, "sweep_exec");
    return finish_training_command(cfg, "sweep_exec", "exec_mode", jobs, results, manifest);
}

/// The selected variants (default all eight) for every seed. Checkpoints
/// land at checkpoints/{system}_{variant}_{seed}.ckpt for later rollouts.
inline CommandResult cmd_budget_compare(const ExperimentConfig& cfg);

inline CommandResult cmd_compare(const ExperimentConfig& cfg) {
    if (cfg.time_budget)
        return cmd_budget_compare(cfg);
    cfg.validate();
    Manifest manifest(cfg, "compare");
    std::vector<Job> jobs;
    for (Variant v : cfg.variants)
        for (auto seed : cfg.seeds)
            jobs.push_back({v, seed, cfg.run_options(), to_string(v), ""});
    const auto results = run_jobs(cfg, jobs, manifest);
    return finish_training_command(cfg, "compare", "setting", jobs, results, manifest);
}

/// Per seed: train the baseline to convergence, then give every other
/// variant the baseline's wall time as its budget. Jobs of one seed run
/// sequentially on one worker.
inline CommandResult cmd_budget_compare(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "budget-compare");
    const SystemPtr sys = make_system(cfg.system);
    const Dataset test = make_test_set(*sys, cfg);
    std::vector<Variant> others;
    for (Variant v : cfg.variants)
        if (v != Variant::HNN)
            others.push_back(v);

    std::vector<std::vector<Job>> per_seed(cfg.seeds.size());
    std::vector<std::vector<JobResult>> per_seed_results(cfg.seeds.size());
    std::vector<double> budgets(cfg.seeds.size(), 0.0);
    parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t s) {
        const auto seed = cfg.seeds[s];
        const RunData data = make_run_data(*sys, seed, cfg.run_options());
        auto run_one = [&](Variant v, std::optional<double> budget) {
            Job job{v, seed, cfg.run_options(), to_string(v), budget ? "budget" : "converged"};
            job.options.time_budget_seconds = budget;
            VariantRun run = run_variant(v, *sys, seed, job.options, data);
            JobResult r;
            r.metrics = evaluate_model(run.model, test, sys);
            r.metrics.variant = job.label;
            r.metrics.seed = seed;
            r.metrics.epochs = run.report.epochs_run;
            r.metrics.wall_seconds = run.report.wall_seconds;
            r.report = std::move(run.report);
            r.checkpoint = cfg.out / "checkpoints" / "budget" /
                           (file_tag(sys->name() + "_" + job.label + "_" + std::to_string(seed)) + ".ckpt");
            save_model(run.model, r.checkpoint);
            manifest.add(r.checkpoint);
            per_seed[s].push_back(std::move(job));
            per_seed_results[s].push_back(std::move(r));
        };
        run_one(Variant::HNN, std::nullopt);
        budgets[s] = per_seed_results[s].front().report.wall_seconds;
        for (Variant v : others)
            run_one(v, budgets[s]);
    });
    std::vector<Job> jobs;
    std::vector<JobResult> results;
    nlohmann::json budget_json = nlohmann::json::object();
    for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
        budget_json[std::to_string(cfg.seeds[s])] = budgets[s];
        for (std::size_t k = 0; k < per_seed[s].size(); ++k) {
            jobs.push_back(std::move(per_seed[s][k]));
            results.push_back(std::move(per_seed_results[s][k]));
        }
    }
    manifest.note("time_budget_seconds", budget_json);
    return finish_training_command(cfg, "budget", "mode", jobs, results, manifest);
}

/// Fixed-length training with a checkpoint every `checkpoint_every` epochs,
/// each evaluated on the test set.
inline CommandResult cmd_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "convergence");
    const SystemPtr sys = make_system(cfg.system);
    const Dataset test = make_test_set(*sys, cfg);
    struct Point {
        long epoch;
        double e_h, e_v;
    };
    std::vector<std::pair<Variant, std::uint64_t>> runs;
    for (Variant v : cfg.variants)
        for (auto seed : cfg.seeds)
            runs.emplace_back(v, seed);
    std::vector<std::vector<Point>> curves(runs.size());
    std::vector<TrainReport> reports(runs.size());
    parallel_for(runs.size(), cfg.workers, [&](std::size_t i) {
        const auto [v, seed] = runs[i];
        RunOptions opt = cfg.run_options();
        opt.patience_epochs = std::max<long>(cfg.max_epochs, 1) + 1; // run to the epoch limit
        opt.on_checkpoint = [&, v = v, seed = seed, i](long epoch, const HamiltonianModel& m) {
            curves[i].push_back({epoch, e_h(m, test, true_hamiltonian(sys)), e_v(m, test)});
            const auto path = cfg.out / "checkpoints" / "convergence" /
                              (file_tag(sys->name() + "_" + to_string(v) + "_" + std::to_string(seed) + "_e" +
                                        std::to_string(epoch)) +
                               ".ckpt");
            save_model(m, path);
            manifest.add(path);
        };
        reports[i] = run_variant(v, *sys, seed, opt).report;
    });
    std::string csv = "variant,system,seed,epoch,e_h,e_v\n";
    CommandResult cr;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (reports[i].stop_reason == StopReason::diverged)
            cr.any_diverged = true;
        for (const Point& p : curves[i])
            csv += to_string(runs[i].first) + "," + sys->name() + "," + std::to_string(runs[i].second) + "," +
                   std::to_string(p.epoch) + "," + io::format_double(p.e_h) + "," + io::format_double(p.e_v) + "\n";
    }
    const auto path = cfg.out / "convergence.csv";
    write_artifact(manifest, path, csv);
    cr.files = {path, manifest.write()};
    return cr;
}

/// Integrates the analytic field and the fields of the HNN and HNN-OI
/// checkpoints written by `compare`, and compares the trajectories.
inline CommandResult cmd_rollout(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "rollout");
    const SystemPtr sys = make_system(cfg.system);
    const std::optional<PhaseState> start = cfg.rollout_start ? cfg.rollout_start : default_initial_state(*sys);
    if (!start)
        throw ConfigError("no default initial state for " + sys->name() + "; pass --init");
    sys->check(*start);
    const EnergyFn truth = [sys](const PhaseState& s) { return sys->hamiltonian(s); };
    const FieldFn exact = [sys](const PhaseState& s) { return sys->vector_field(s); };

    std::vector<Variant> models;
    for (Variant v : cfg.variants)
        models.push_back(v);
    // every referenced checkpoint must exist before any work starts
    for (auto seed : cfg.seeds)
        for (Variant v : models) {
            const auto path = checkpoint_path(cfg, sys->name(), to_string(v), seed);
            if (!std::filesystem::exists(path))
                throw ConfigError("missing checkpoint " + path.string() + " (run `compare` first)");
        }

    CommandResult cr;
    const Trajectory reference = symplectic_euler(exact, *start, cfg.rollout_step, cfg.rollout_end, truth);
    const auto ref_path = cfg.out / "rollout" / (sys->name() + "_reference.csv");
    write_artifact(manifest, ref_path, trajectory_csv(reference));
    cr.files.push_back(ref_path);

    std::string metrics = rollout_metrics_csv_header() + "\n";
    for (auto seed : cfg.seeds)
        for (Variant v : models) {
            const HamiltonianModel m = load_model(checkpoint_path(cfg, sys->name(), to_string(v), seed));
            const FieldFn field = [&m](const PhaseState& s) { return predict_field(m, s); };
            const EnergyFn learned = [&m](const PhaseState& s) { return predict_h(m, s); };
            const Trajectory tr = symplectic_euler(field, *start, cfg.rollout_step, cfg.rollout_end,
                                                   cfg.rollout_model_energy ? learned : truth);
            const auto path =
                cfg.out / "rollout" / (file_tag(sys->name() + "_" + to_string(v) + "_" + std::to_string(seed)) + ".csv");
            write_artifact(manifest, path, trajectory_csv(tr));
            cr.files.push_back(path);
            metrics += rollout_metrics_row(to_string(v), sys->name(), seed, compare(reference, tr, truth)) + "\n";
        }
    const auto mpath = cfg.out / "rollout_metrics.csv";
    write_artifact(manifest, mpath, metrics);
    cr.files.push_back(mpath);
    cr.files.push_back(manifest.write());
    return cr;
}

/// Energy-split errors for the conjoined variants among those selected
/// (default I, LI, OI, OLI).
inline CommandResult cmd_energy_split(const ExperimentConfig& cfg) {
    cfg.validate();
    Manifest manifest(cfg, "energy-split");
    std::vector<Job> jobs;
    for (Variant v : cfg.variants)
        if (uses_inductive(v))
            for (auto seed : cfg.seeds)
                jobs.push_back({v, seed, cfg.run_options(), to_string(v), ""});
    if (jobs.empty())
        throw ConfigError("energy-split needs at least one variant with the inductive bias");
    const auto results = run_jobs(cfg, jobs, manifest, "energy_split");
    return finish_training_command(cfg, "energy_split", "setting", jobs, results, manifest);
}

} // namespace shnn
