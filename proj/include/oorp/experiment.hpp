#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "oorp/engine.hpp"
#include "oorp/estimators.hpp"
#include "oorp/flow_problems.hpp"
#include "oorp/policies.hpp"

namespace oorp {

struct RunOptions {
    int horizon = 200000;
    uint64_t seed = 1;
    int record_every = 100;
    bool check_conservation = false;
    // Dual-tracking instrumentation: samples D(q_hat) and subgradient norms
    // along the run, plus the per-slot norm of the full queue vector.
    bool track_duals = false;
    int dual_sample_every = 100;
    RateVector lambda; // mean arrival rates, used by dual tracking
};

struct RunResult {
    std::vector<int> slots; // end-of-slot sample times
    std::vector<int64_t> total_backlog;
    std::vector<std::vector<int64_t>> commodity_backlog; // [K][sample]
    std::vector<std::vector<int64_t>> delivered;         // [K][sample], cumulative
    std::vector<int64_t> final_delivered;
    int64_t final_total_backlog = 0;
    int64_t tunnel_cap_exceeded_slots = 0;
    int64_t max_underlay_content = 0;
    // dual tracking
    std::vector<int> dual_slots;
    std::vector<double> d_values;
    std::vector<double> g_norms;
    std::vector<double> qhat_norms; // per slot when track_duals
    double wall_seconds = 0.0;
};

RunResult run_policy(const Topology& topo, const TunnelSet& tunnels, Policy& policy,
                     const ArrivalSpec& arrivals, const std::vector<BackgroundFlow>& background,
                     const RunOptions& opt);

struct StabilityVerdict {
    double slope = 0.0;              // packets/slot over the final half
    double final_quarter_mean = 0.0; // mean backlog over the final quarter
    bool unstable = false;
};

StabilityVerdict classify_stability(const RunResult& run, double slope_threshold = 0.01,
                                    double backlog_floor = 500.0);

// Least-squares slope of y against x.
double fit_slope(const std::vector<int>& x, const std::vector<int64_t>& y, size_t from);

struct ExperimentConfig {
    std::string topology_path;
    std::vector<std::string> policies{"oorp"};
    std::string estimator = "exact";
    int probe_interval = 10;
    int idle_threshold = 10;
    int frame_length = 100;
    double capacity_shrink = 0.0;
    std::vector<double> rho_grid;
    int horizon = 200000;
    int replications = 3;
    uint64_t base_seed = 1;
    int record_every = 100;
    double slope_threshold = 0.01;
    double backlog_floor = 500.0;
    std::vector<std::pair<std::vector<std::string>, double>> background;
    // rate control (enabled when any weight > 0); keyed by commodity name
    std::map<std::string, double> utility_weight;
    std::map<std::string, double> rate_cap;
    int rate_window = 5000;
    std::string out_dir;
    int threads = 0; // 0 = hardware concurrency

    // Sweep preconditions: loads in (0, 1], a horizon long enough for the
    // stability verdict, at least one replication.
    void validate_for_sweep() const;

    static ExperimentConfig load(const std::string& path);
};

struct SweepEntry {
    std::string policy; // includes estimator suffix for oorp
    double rho = 0.0;
    uint64_t seed = 0;
    StabilityVerdict verdict;
    int64_t final_backlog = 0;
    std::vector<double> throughput; // delivered/slot per commodity
};

struct SweepResult {
    std::vector<SweepEntry> entries; // ordered by (policy, rho, seed)
    // Majority verdict across replications, keyed by (policy, rho).
    std::map<std::pair<std::string, double>, bool> unstable;
};

SweepResult run_sweep(const Topology& topo, const ExperimentConfig& cfg);

// Builds validated background flows from (path, rate) specs.
std::vector<BackgroundFlow> apply_background(
    const Topology& topo, const std::vector<std::pair<std::vector<std::string>, double>>& flows);

// Capacities left for overlay traffic once background flows are accounted.
std::vector<double> background_reduced_caps(const Topology& topo,
                                            const std::vector<BackgroundFlow>& flows);

struct RateControlResult {
    RunResult run;
    std::vector<double> converged_rates; // delivered/slot over the final window
    double achieved_utility = 0.0;
    int window = 0;
};

RateControlResult rate_control_experiment(const Topology& topo, const TunnelSet& tunnels,
                                          const ExperimentConfig& cfg, int final_window = 50000);

struct QueueDemoResult {
    int tau = 100;
    std::vector<int> t;                  // boundary times 0..3*tau
    std::vector<int64_t> actual;         // data backlog
    std::vector<double> delay_est;       // pure delay estimator
    std::vector<double> delay_probe_est; // delay + empty probes
};

// Single FIFO queue (service 1/slot) fed at 2 packets/slot for tau slots:
// the actual backlog against what delay-based estimation believes.
QueueDemoResult single_queue_demo(int tau = 100, int idle_threshold = 10);

// ---- result emission -------------------------------------------------------

void write_run_csv(const std::string& path, const Topology& topo, const RunResult& run);
void write_run_summary_json(const std::string& path, const Topology& topo, const RunResult& run,
                            const StabilityVerdict& verdict);
void write_sweep_csv(const std::string& path, const SweepResult& sweep);
void write_sweep_json(const std::string& path, const ExperimentConfig& cfg,
                      const SweepResult& sweep);
void write_demo_csv(const std::string& path, const QueueDemoResult& demo);
// Per-sample delivered-rate moving averages alongside the raw counters.
void write_rate_csv(const std::string& path, const Topology& topo, const RunResult& run,
                    int window);

// Convenience: topology + tunnels + per-commodity lambda_max direction.
struct Scenario {
    Topology topo;
    TunnelSet tunnels;
    RateVector lambda_max;
};
Scenario load_scenario(const std::string& topology_path);

} // namespace oorp
