// Command-line driver for the experiment harness.
//
//   shnn <command> [options]
//
// Exit status: 0 success, 1 configuration or input error, 2 numeric failure.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "shnn/experiment.hpp"

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    // "0-19", "3", or "0,2,5"
    std::vector<std::uint64_t> out;
    for (auto part : shnn::io::split(text)) {
        const std::string s(part);
        const auto dash = s.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoull(s));
            } else {
                const auto lo = std::stoull(s.substr(0, dash)), hi = std::stoull(s.substr(dash + 1));
                if (hi < lo)
                    throw shnn::ConfigError("bad seed range " + s);
                for (auto k = lo; k <= hi; ++k)
                    out.push_back(k);
            }
        } catch (const std::logic_error&) {
            throw shnn::ConfigError("bad seed list '" + text + "'");
        }
    }
    return out;
}

std::vector<double> parse_numbers(const std::string& text) {
    std::vector<double> out;
    for (auto part : shnn::io::split(text)) {
        const auto v = shnn::io::parse_double(part);
        if (!v)
            throw shnn::ConfigError("bad number '" + std::string(part) + "' in '" + text + "'");
        out.push_back(*v);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Separable Hamiltonian neural network experiments"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_config("--config", "", "TOML/INI file with option values");

    std::vector<std::string> variants;
    std::string system = "pendulum", seeds = "0-19", out = "runs", exec = "parallel", summation = "L0";
    std::string mu_values, c3_values, init;
    int mu = 2;
    double c3 = 1.0;
    long epochs = 15000, patience = 4000, checkpoint_every = 50;
    double lr = 0.0, step = 0.01, t_end = 0.0;
    long width = 0;
    unsigned workers = 0;
    bool deterministic = false, budget = false, model_energy = false;

    app.add_option("--system", system, "pendulum, anisotropic, henon_heiles, toda, coupled3, coupled10")
        ->capture_default_str();
    app.add_option("--variant", variants, "comma-separated variants, e.g. HNN,OI (default: all)")->delimiter(',');
    app.add_option("--seeds,--seed", seeds, "seed list: 0-19, 4 or 0,2,5")->capture_default_str();
    app.add_option("--mu", mu, "augmentation factor")->capture_default_str();
    app.add_option("--c3", c3, "weight of the mixed-derivative loss")->capture_default_str();
    app.add_option("--mu-values", mu_values, "values for sweep-mu");
    app.add_option("--c3-values", c3_values, "values for sweep-c3");
    app.add_option("--exec", exec, "conjoined execution: series or parallel")->capture_default_str();
    app.add_option("--summation", summation, "conjoined output form L0..L4")->capture_default_str();
    app.add_option("--epochs", epochs, "maximum epochs")->capture_default_str();
    app.add_option("--patience", patience, "early-stopping patience in epochs")->capture_default_str();
    app.add_option("--checkpoint-every", checkpoint_every, "convergence checkpoint interval")->capture_default_str();
    app.add_option("--lr", lr, "learning rate (default: per-system preset)");
    app.add_option("--width", width, "hidden width of single networks (default: preset)");
    app.add_option("--workers", workers, "parallel training jobs (default: SHNN_WORKERS or core count)");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--step", step, "rollout step size")->capture_default_str();
    app.add_option("--t-end", t_end, "rollout end time (default 6 pi)");
    app.add_option("--init", init, "rollout start q1,..,qn,p1,..,pn");
    app.add_flag("--budget", budget, "compare: give each variant the baseline's wall time per seed");
    app.add_flag("--model-energy", model_energy, "rollout: record the model's H in trajectory files");
    app.add_flag("--deterministic", deterministic, "write 0 for wall time in metric CSVs");

    const std::vector<std::pair<std::string, std::string>> commands{
        {"generate", "write train/fit/val/test CSVs"},
        {"sweep-mu", "HNN-O over augmentation factors"},
        {"sweep-c3", "HNN-L over mixed-loss weights"},
        {"sweep-summation", "HNN-I over output forms L0..L4"},
        {"sweep-exec", "HNN-I series versus parallel"},
        {"compare", "train and evaluate variants"},
        {"budget-compare", "variants under the baseline's wall-time budget"},
        {"convergence", "test error every few epochs"},
        {"rollout", "integrate trained fields from compare checkpoints"},
        {"energy-split", "kinetic/potential split errors of conjoined variants"},
    };
    for (const auto& [name, help] : commands)
        app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        shnn::ExperimentConfig cfg;
        cfg.system = system;
        cfg.seeds = parse_seeds(seeds);
        cfg.mu = mu;
        cfg.c3 = c3;
        cfg.exec = shnn::parse_exec_mode(exec);
        cfg.summation = shnn::parse_summation(summation);
        cfg.max_epochs = epochs;
        cfg.patience = patience;
        cfg.checkpoint_every = checkpoint_every;
        cfg.out = out;
        cfg.record_wall_time = !deterministic;
        cfg.time_budget = budget;
        cfg.rollout_model_energy = model_energy;
        if (workers > 0)
            cfg.workers = workers;
        if (lr > 0.0)
            cfg.learning_rate = lr;
        if (width > 0)
            cfg.baseline_width = width;
        if (t_end > 0.0)
            cfg.rollout_end = t_end;
        cfg.rollout_step = step;
        if (!mu_values.empty()) {
            cfg.mu_values.clear();
            for (double v : parse_numbers(mu_values))
                cfg.mu_values.push_back(static_cast<int>(v));
        }
        if (!c3_values.empty())
            cfg.c3_values = parse_numbers(c3_values);

        const std::string command = app.get_subcommands().front()->get_name();
        if (!variants.empty()) {
            cfg.variants.clear();
            for (const auto& v : variants)
                cfg.variants.push_back(shnn::parse_variant(v));
        } else if (command == "rollout" || command == "convergence") {
            cfg.variants = {shnn::Variant::HNN, shnn::Variant::OI};
        } else if (command == "energy-split") {
            cfg.variants = {shnn::Variant::I, shnn::Variant::LI, shnn::Variant::OI, shnn::Variant::OLI};
        }
        if (!init.empty()) {
            const auto v = parse_numbers(init);
            const auto sys = shnn::make_system(cfg.system);
            if (static_cast<shnn::Index>(v.size()) != 2 * sys->n())
                throw shnn::ConfigError("--init needs " + std::to_string(2 * sys->n()) + " values");
            shnn::Vec z = Eigen::Map<const shnn::Vec>(v.data(), static_cast<shnn::Index>(v.size()));
            cfg.rollout_start = shnn::PhaseState::from_z(z);
        }

        shnn::CommandResult result;
        if (command == "generate")
            result = shnn::cmd_generate(cfg);
        else if (command == "sweep-mu")
            result = shnn::cmd_sweep_mu(cfg);
        else if (command == "sweep-c3")
            result = shnn::cmd_sweep_c3(cfg);
        else if (command == "sweep-summation")
            result = shnn::cmd_sweep_summation(cfg);
        else if (command == "sweep-exec")
            result = shnn::cmd_sweep_exec(cfg);
        else if (command == "compare")
            result = shnn::cmd_compare(cfg);
        else if (command == "budget-compare")
            result = shnn::cmd_budget_compare(cfg);
        else if (command == "convergence")
            result = shnn::cmd_convergence(cfg);
        else if (command == "rollout")
            result = shnn::cmd_rollout(cfg);
        else
            result = shnn::cmd_energy_split(cfg);

        for (const auto& f : result.files)
            std::cout << f.string() << "\n";
        if (result.any_diverged) {
            std::cerr << "error: at least one run diverged; see the timing CSV\n";
            return 2;
        }
        return 0;
    } catch (const shnn::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
