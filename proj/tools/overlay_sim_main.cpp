#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "oorp/experiment.hpp"

using namespace oorp;

namespace {

struct CommonFlags {
    std::string config;
    std::string topology;
    std::string out_dir;
    std::string policy;
    std::string estimator;
    int probe_interval = -1;
    int frame_length = -1;
    int horizon = -1;
    long long seed = -1;
    double rho = -1.0;
};

ExperimentConfig resolve_config(const CommonFlags& f) {
    ExperimentConfig cfg;
    if (!f.config.empty()) cfg = ExperimentConfig::load(f.config);
    if (!f.topology.empty()) cfg.topology_path = f.topology;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (!f.policy.empty()) cfg.policies = {f.policy};
    if (!f.estimator.empty()) cfg.estimator = f.estimator;
    if (f.probe_interval > 0) cfg.probe_interval = f.probe_interval;
    if (f.frame_length > 0) cfg.frame_length = f.frame_length;
    if (f.horizon > 0) cfg.horizon = f.horizon;
    if (f.seed >= 0) cfg.base_seed = static_cast<uint64_t>(f.seed);
    if (cfg.topology_path.empty())
        throw std::runtime_error("no topology given (use --topology or --config)");
    return cfg;
}

void add_common(CLI::App* app, CommonFlags& f) {
    app->add_option("--config", f.config, "experiment config JSON");
    app->add_option("--topology", f.topology, "topology fixture file");
    app->add_option("--out", f.out_dir, "output directory");
    app->add_option("--policy", f.policy, "bp|obp|centralized|oorp");
    app->add_option("--estimator", f.estimator, "exact|delay|delay-probe|priority-probe");
    app->add_option("--probe-interval", f.probe_interval, "priority-probe period (slots)");
    app->add_option("--frame-length", f.frame_length, "centralized frame length (slots)");
    app->add_option("--horizon", f.horizon, "slots to simulate");
    app->add_option("--seed", f.seed, "base RNG seed");
}

int cmd_validate(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    Scenario sc = load_scenario(cfg.topology_path);
    int n_overlay = 0, n_underlay = 0;
    for (const Node& n : sc.topo.nodes)
        (n.kind == NodeKind::Overlay ? n_overlay : n_underlay)++;
    std::printf("topology OK: %d overlay + %d underlay nodes, %zu links, %zu commodities\n",
                n_overlay, n_underlay, sc.topo.links.size(), sc.topo.commodities.size());
    std::printf("tunnels (%d):\n", sc.tunnels.size());
    for (TunnelIndex t = 0; t < sc.tunnels.size(); ++t) {
        std::string allowed;
        for (size_t k = 0; k < sc.topo.commodities.size(); ++k)
            if (sc.tunnels.allowed(t, static_cast<int>(k)))
                allowed += (allowed.empty() ? "" : ",") + sc.topo.commodities[k].name;
        std::printf("  %2d %-28s commodities: %s\n", t,
                    sc.tunnels.path_string(sc.topo, t).c_str(), allowed.c_str());
    }
    return 0;
}

int cmd_oracle(const CommonFlags& f, const std::string& kind) {
    ExperimentConfig cfg = resolve_config(f);
    Scenario sc = load_scenario(cfg.topology_path);
    auto bg = apply_background(sc.topo, cfg.background);
    std::vector<double> caps = background_reduced_caps(sc.topo, bg);
    nlohmann::ordered_json j;
    j["topology"] = cfg.topology_path;
    if (kind == "maxflow") {
        double theta = max_scaling(sc.topo, sc.tunnels, sc.lambda_max, caps);
        j["direction"] = sc.lambda_max;
        j["theta"] = theta;
        std::vector<double> lm;
        for (double v : sc.lambda_max) lm.push_back(theta * v);
        j["lambda_max"] = lm;
    } else {
        const int K = static_cast<int>(sc.topo.commodities.size());
        RateVector w(K, 0.0), M(K, 0.0);
        for (int k = 0; k < K; ++k) {
            const std::string& name = sc.topo.commodities[k].name;
            if (cfg.utility_weight.count(name)) w[k] = cfg.utility_weight.at(name);
            if (cfg.rate_cap.count(name)) M[k] = cfg.rate_cap.at(name);
            if (w[k] <= 0) w[k] = 20.0;
            if (M[k] <= 0) M[k] = 20.0;
        }
        UtilityOracleResult r = utility_optimum_oracle(sc.topo, sc.tunnels, w, M, caps);
        if (!r.ok) {
            std::fprintf(stderr, "utility oracle failed to converge\n");
            return 1;
        }
        j["weights"] = w;
        j["rate_caps"] = M;
        j["optimal_rates"] = r.rates;
        j["optimal_utility"] = r.utility;
    }
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_run(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    Scenario sc = load_scenario(cfg.topology_path);
    const int K = static_cast<int>(sc.topo.commodities.size());
    double rho = f.rho > 0 ? f.rho : 0.9;

    EstimatorConfig est;
    est.mode = estimator_mode_from_string(cfg.estimator);
    est.probe_interval = cfg.probe_interval;
    est.idle_threshold = cfg.idle_threshold;
    CentralizedConfig cen;
    cen.frame_length = cfg.frame_length;
    cen.capacity_shrink = cfg.capacity_shrink;
    auto policy = make_policy(cfg.policies.at(0), sc.topo, sc.tunnels, est, cen);

    ArrivalSpec arrivals;
    for (int k = 0; k < K; ++k)
        arrivals.per_commodity.push_back(
            {ArrivalKind::Poisson, rho * sc.topo.commodities[k].lambda_max});
    auto bg = apply_background(sc.topo, cfg.background);

    RunOptions opt;
    opt.horizon = cfg.horizon;
    opt.seed = cfg.base_seed;
    opt.record_every = cfg.record_every;
    RunResult run = run_policy(sc.topo, sc.tunnels, *policy, arrivals, bg, opt);
    StabilityVerdict v = classify_stability(run, cfg.slope_threshold, cfg.backlog_floor);

    std::printf("%s rho=%.2f seed=%llu: slope=%.4f final-quarter mean=%.1f -> %s\n",
                policy->name().c_str(), rho, static_cast<unsigned long long>(cfg.base_seed),
                v.slope, v.final_quarter_mean, v.unstable ? "unstable" : "stable");
    for (int k = 0; k < K; ++k)
        std::printf("  %s delivered %lld (%.4f/slot)\n", sc.topo.commodities[k].name.c_str(),
                    static_cast<long long>(run.final_delivered[k]),
                    static_cast<double>(run.final_delivered[k]) / cfg.horizon);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        char name[256];
        std::snprintf(name, sizeof(name), "%s/run_%s_rho%.2f_seed%llu", cfg.out_dir.c_str(),
                      policy->name().c_str(), rho,
                      static_cast<unsigned long long>(cfg.base_seed));
        write_run_csv(std::string(name) + ".csv", sc.topo, run);
        write_run_summary_json(std::string(name) + ".json", sc.topo, run, v);
        std::printf("wrote %s.{csv,json}\n", name);
    }
    return 0;
}

int cmd_sweep(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    if (cfg.rho_grid.empty())
        for (double r = 0.5; r <= 1.0001; r += 0.05) cfg.rho_grid.push_back(r);
    Scenario sc = load_scenario(cfg.topology_path);
    SweepResult sweep = run_sweep(sc.topo, cfg);
    for (const auto& [key, unstable] : sweep.unstable)
        std::printf("%-22s rho=%.2f  %s\n", key.first.c_str(), key.second,
                    unstable ? "UNSTABLE" : "stable");
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_sweep_csv(cfg.out_dir + "/sweep.csv", sweep);
        write_sweep_json(cfg.out_dir + "/sweep.json", cfg, sweep);
        std::printf("wrote %s/sweep.{csv,json}\n", cfg.out_dir.c_str());
    }
    return 0;
}

int cmd_rate_control(const CommonFlags& f) {
    ExperimentConfig cfg = resolve_config(f);
    Scenario sc = load_scenario(cfg.topology_path);
    const int K = static_cast<int>(sc.topo.commodities.size());
    if (cfg.utility_weight.empty())
        for (const Commodity& c : sc.topo.commodities) {
            cfg.utility_weight[c.name] = 20.0;
            cfg.rate_cap[c.name] = 20.0;
        }
    RateControlResult r = rate_control_experiment(sc.topo, sc.tunnels, cfg);
    std::printf("converged rates over final %d slots:\n", r.window);
    for (int k = 0; k < K; ++k)
        std::printf("  %s: %.4f packets/slot\n", sc.topo.commodities[k].name.c_str(),
                    r.converged_rates[k]);
    std::printf("achieved utility: %.4f\n", r.achieved_utility);
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        write_rate_csv(cfg.out_dir + "/rate_control.csv", sc.topo, r.run, cfg.rate_window);
        std::printf("wrote %s/rate_control.csv\n", cfg.out_dir.c_str());
    }
    return 0;
}

int cmd_demo_queue(const CommonFlags& f, int tau, int idle) {
    QueueDemoResult demo = single_queue_demo(tau, idle);
    size_t t1 = static_cast<size_t>(tau), t2 = static_cast<size_t>(2 * tau);
    std::printf("t=%d: actual=%lld delay-estimate=%.0f\n", tau,
                static_cast<long long>(demo.actual[t1]), demo.delay_est[t1]);
    std::printf("t=%d: actual=%lld delay-estimate=%.0f probe-estimate=%.0f\n", 2 * tau,
                static_cast<long long>(demo.actual[t2]), demo.delay_est[t2],
                demo.delay_probe_est[t2]);
    if (!f.out_dir.empty()) {
        std::filesystem::create_directories(f.out_dir);
        write_demo_csv(f.out_dir + "/queue_demo.csv", demo);
        std::printf("wrote %s/queue_demo.csv\n", f.out_dir.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overlay routing simulator"};
    app.require_subcommand(1);

    CommonFlags flags;
    int tau = 100, idle = 10;
    std::string oracle_kind = "maxflow";

    CLI::App* validate = app.add_subcommand("validate-topology", "parse and check a topology");
    add_common(validate, flags);
    CLI::App* oracle = app.add_subcommand("oracle", "max-flow or utility optimum");
    add_common(oracle, flags);
    oracle->add_option("kind", oracle_kind, "maxflow|utility");
    CLI::App* runc = app.add_subcommand("run", "single simulation run");
    add_common(runc, flags);
    runc->add_option("--rho", flags.rho, "load factor");
    CLI::App* sweep = app.add_subcommand("sweep", "load sweep with stability verdicts");
    add_common(sweep, flags);
    CLI::App* rate = app.add_subcommand("rate-control", "utility-maximizing admission run");
    add_common(rate, flags);
    CLI::App* demo = app.add_subcommand("demo-queue", "single-queue estimate pathology");
    demo->add_option("--tau", tau, "arrival burst length");
    demo->add_option("--idle-threshold", idle, "empty-probe idle threshold");
    demo->add_option("--out", flags.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(flags);
        if (oracle->parsed()) return cmd_oracle(flags, oracle_kind);
        if (runc->parsed()) return cmd_run(flags);
        if (sweep->parsed()) return cmd_sweep(flags);
        if (rate->parsed()) return cmd_rate_control(flags);
        if (demo->parsed()) return cmd_demo_queue(flags, tau, idle);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
