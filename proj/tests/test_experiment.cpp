#include <catch_amalgamated.hpp>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "shnn/experiment.hpp"

using namespace shnn;
using namespace testing_support;

namespace {

ExperimentConfig quick(const std::string& name, const std::string& system = "pendulum") {
    ExperimentConfig cfg;
    cfg.system = system;
    cfg.seeds = {0, 1};
    cfg.variants = {Variant::HNN, Variant::OI};
    cfg.max_epochs = 3;
    cfg.out = scratch_dir(name);
    cfg.workers = 2;
    cfg.record_wall_time = false;
    return cfg;
}

} // namespace

TEST_CASE("generate writes the datasets", "[cli]") {
    ExperimentConfig cfg = quick("generate");
    cfg.seeds = {0};
    cmd_generate(cfg);
    const auto data = cfg.out / "data";
    CHECK(read_csv(data / "pendulum_train_0.csv").size() == 512);
    CHECK(read_csv(data / "pendulum_fit_0.csv").size() == 410);
    CHECK(read_csv(data / "pendulum_val_0.csv").size() == 102);
    CHECK(read_csv(data / "pendulum_test_0.csv").size() == 100);
    const std::string first = io::read_file(data / "pendulum_train_0.csv");
    cmd_generate(cfg);
    CHECK(io::read_file(data / "pendulum_train_0.csv") == first);

    const auto manifest = nlohmann::json::parse(io::read_file(cfg.out / "manifest.json"));
    CHECK(manifest["artifacts"].size() == 4);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);

    cfg.system = "double_pendulum";
    CHECK_THROWS_AS(cmd_generate(cfg), ConfigError);
}

TEST_CASE("large systems fall back to a sampled test set", "[cli]") {
    ExperimentConfig cfg;
    cfg.fallback_test_samples = 50;
    CHECK(make_test_set(*make_system("coupled10"), cfg).size() == 50);
    CHECK(make_test_set(*make_system("henon_heiles"), cfg).size() == 10000);
}

TEST_CASE("compare, then rollout from its checkpoints", "[cli]") {
    ExperimentConfig cfg = quick("compare", "henon_heiles");
    const CommandResult r = cmd_compare(cfg);
    const auto rows = parse_metric_csv(io::read_file(cfg.out / "compare_metrics.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].variant == "HNN");
    CHECK(rows[2].variant == "HNN-OI");
    CHECK(rows[2].e_ke);
    CHECK(rows[0].epochs == 3);
    CHECK(std::filesystem::exists(cfg.out / "checkpoints" / "henon_heiles_HNN-OI_1.ckpt"));
    CHECK(io::lines(io::read_file(cfg.out / "compare_summary.csv")).size() == 3);

    const std::string first = io::read_file(cfg.out / "compare_metrics.csv");
    cmd_compare(cfg);
    CHECK(io::read_file(cfg.out / "compare_metrics.csv") == first);

    cmd_rollout(cfg);
    const Trajectory ref = parse_trajectory_csv(io::read_file(cfg.out / "rollout" / "henon_heiles_reference.csv"));
    CHECK(ref.size() == 1885);
    CHECK(std::abs(ref.energies[0] - 0.166) < 5e-4);
    const auto metrics = io::lines(io::read_file(cfg.out / "rollout_metrics.csv"));
    CHECK(metrics[0] == rollout_metrics_csv_header());
    CHECK(metrics.size() == 5);

    const auto manifest = nlohmann::json::parse(io::read_file(cfg.out / "manifest.json"));
    for (const auto& a : manifest["artifacts"])
        CHECK(std::filesystem::exists(cfg.out / a.get<std::string>()));
}

TEST_CASE("rollout names the missing checkpoint", "[cli]") {
    ExperimentConfig cfg = quick("rollout_missing", "henon_heiles");
    try {
        cmd_rollout(cfg);
        FAIL("expected a configuration error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("henon_heiles_HNN_0.ckpt") != std::string::npos);
    }
}

TEST_CASE("sweeps emit one summary row per setting", "[cli]") {
    ExperimentConfig cfg = quick("sweeps");
    cfg.seeds = {0, 1};
    cfg.mu_values = {1, 3};
    cfg.c3_values = {0.5, 2.0};
    cmd_sweep_mu(cfg);
    auto summary = io::lines(io::read_file(cfg.out / "sweep_mu_summary.csv"));
    REQUIRE(summary.size() == 3);
    CHECK(summary[1].rfind("HNN-O,pendulum,1,2,", 0) == 0);
    CHECK(parse_metric_csv(io::read_file(cfg.out / "sweep_mu_metrics.csv")).size() == 4);

    cmd_sweep_c3(cfg);
    CHECK(io::lines(io::read_file(cfg.out / "sweep_c3_summary.csv")).size() == 3);
    cmd_sweep_summation(cfg);
    CHECK(io::lines(io::read_file(cfg.out / "sweep_summation_summary.csv")).size() == 6);
    cmd_sweep_exec(cfg);
    const auto exec_rows = parse_metric_csv(io::read_file(cfg.out / "sweep_exec_metrics.csv"));
    REQUIRE(exec_rows.size() == 4);
    // series and parallel are the same function; training differs only by rounding
    CHECK(std::abs(exec_rows[0].e_v - exec_rows[2].e_v) < 1e-6 * exec_rows[0].e_v);
}

TEST_CASE("summation sweep: L0 and L1 train identically", "[cli]") {
    ExperimentConfig cfg = quick("l0l1");
    cfg.seeds = {3};
    cmd_sweep_summation(cfg);
    const auto rows = parse_metric_csv(io::read_file(cfg.out / "sweep_summation_metrics.csv"));
    REQUIRE(rows.size() == 5);
    CHECK(rows[0].e_h == rows[1].e_h);
    CHECK(rows[0].e_v == rows[1].e_v);
}

TEST_CASE("budget mode, convergence and energy split", "[cli]") {
    ExperimentConfig cfg = quick("budget");
    cfg.seeds = {0};
    cfg.variants = {Variant::HNN, Variant::O, Variant::OI};
    cfg.time_budget = true;
    cmd_compare(cfg);
    const auto rows = parse_metric_csv(io::read_file(cfg.out / "budget_metrics.csv"));
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].variant == "HNN");
    const auto manifest = nlohmann::json::parse(io::read_file(cfg.out / "manifest.json"));
    CHECK(manifest["time_budget_seconds"]["0"].get<double>() > 0.0);

    ExperimentConfig conv = quick("convergence");
    conv.seeds = {0};
    conv.max_epochs = 6;
    conv.checkpoint_every = 2;
    cmd_convergence(conv);
    const auto lines = io::lines(io::read_file(conv.out / "convergence.csv"));
    CHECK(lines.size() == 1 + 2 * 3);
    CHECK(std::filesystem::exists(conv.out / "checkpoints" / "convergence" / "pendulum_HNN-OI_0_e4.ckpt"));

    ExperimentConfig split_cfg = quick("split");
    split_cfg.seeds = {0};
    split_cfg.variants = {Variant::HNN, Variant::I, Variant::LI};
    cmd_energy_split(split_cfg);
    const auto split_rows = parse_metric_csv(io::read_file(split_cfg.out / "energy_split_metrics.csv"));
    REQUIRE(split_rows.size() == 2);
    CHECK(split_rows[0].e_ke == split_rows[1].e_ke);
    split_cfg.variants = {Variant::HNN};
    CHECK_THROWS_AS(cmd_energy_split(split_cfg), ConfigError);
}

TEST_CASE("worker count does not change results", "[cli]") {
    ExperimentConfig a = quick("workers_a");
    a.workers = 1;
    ExperimentConfig b = quick("workers_b");
    b.workers = 3;
    cmd_compare(a);
    cmd_compare(b);
    CHECK(io::read_file(a.out / "compare_metrics.csv") == io::read_file(b.out / "compare_metrics.csv"));
}

TEST_CASE("parallel_for rethrows the first failure", "[cli]") {
    std::vector<int> hit(10, 0);
    CHECK_THROWS_WITH(parallel_for(10, 3,
                                   [&](std::size_t i) {
                                       hit[i] = 1;
                                       if (i == 4 || i == 7)
                                           throw ConfigError("job " + std::to_string(i));
                                   }),
                      "job 4");
    CHECK(std::count(hit.begin(), hit.end(), 1) == 10);
}

TEST_CASE("configuration validation", "[cli]") {
    ExperimentConfig cfg;
    cfg.seeds.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.mu = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    ExperimentConfig x, y;
    CHECK(config_hash(x) == config_hash(y));
    y.mu = 3;
    CHECK(config_hash(x) != config_hash(y));
}
