#include "oorp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace oorp {

namespace {

DualState queue_snapshot(const Engine& eng) {
    const Topology& topo = eng.topo();
    const int K = eng.commodity_count();
    DualState q = DualState::zeros(static_cast<int>(topo.links.size()),
                                   static_cast<int>(topo.nodes.size()), K);
    for (LinkIndex e : topo.uncontrollable_links())
        q.link_dual[e] = static_cast<double>(eng.link_backlog(e));
    for (NodeIndex i = 0; i < static_cast<int>(topo.nodes.size()); ++i) {
        if (!topo.is_overlay(i)) continue;
        for (int k = 0; k < K; ++k) q.qn(i, k, K) = static_cast<double>(eng.weight_queue(i, k));
    }
    return q;
}

} // namespace

RunResult run_policy(const Topology& topo, const TunnelSet& tunnels, Policy& policy,
                     const ArrivalSpec& arrivals, const std::vector<BackgroundFlow>& background,
                     const RunOptions& opt) {
    auto t0 = std::chrono::steady_clock::now();
    const int K = static_cast<int>(topo.commodities.size());
    Engine eng(topo, tunnels, arrivals, background, opt.seed);
    SlotDecision decision;
    SlotTrace trace;
    std::vector<int> admitted;
    std::vector<double> caps = capacities_of(topo);

    RunResult out;
    out.commodity_backlog.assign(K, {});
    out.delivered.assign(K, {});

    for (int slot = 0; slot < opt.horizon; ++slot) {
        policy.decide(eng, decision);
        policy.admissions(eng, admitted);
        if (!admitted.empty()) eng.set_admissions(admitted);
        eng.step(decision, trace);
        policy.observe(eng, trace);
        if (opt.check_conservation) eng.check_conservation();

        if (opt.track_duals) {
            DualState qh = queue_snapshot(eng);
            out.qhat_norms.push_back(qh.norm());
            if (slot % opt.dual_sample_every == 0) {
                DualObjectiveResult d = dual_objective(topo, tunnels, qh, opt.lambda, caps);
                DualState g = subgradient(topo, tunnels, d.argmax, opt.lambda, caps);
                out.dual_slots.push_back(slot);
                out.d_values.push_back(d.value);
                out.g_norms.push_back(g.norm());
            }
        }

        if ((slot + 1) % opt.record_every == 0 || slot + 1 == opt.horizon) {
            out.slots.push_back(slot + 1);
            out.total_backlog.push_back(eng.total_backlog());
            for (int k = 0; k < K; ++k) {
                out.commodity_backlog[k].push_back(eng.commodity_backlog(k));
                out.delivered[k].push_back(eng.delivered(k));
            }
        }
    }

    out.final_delivered.assign(K, 0);
    for (int k = 0; k < K; ++k) out.final_delivered[k] = eng.delivered(k);
    out.final_total_backlog = eng.total_backlog();
    out.tunnel_cap_exceeded_slots = eng.tunnel_cap_exceeded_slots();
    out.max_underlay_content = eng.max_underlay_content();
    out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

double fit_slope(const std::vector<int>& x, const std::vector<int64_t>& y, size_t from) {
    if (from >= x.size()) return 0.0;
    size_t n = x.size() - from;
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = from; i < x.size(); ++i) {
        double xv = static_cast<double>(x[i]);
        double yv = static_cast<double>(y[i]);
        sx += xv;
        sy += yv;
        sxx += xv * xv;
        sxy += xv * yv;
    }
    double denom = n * sxx - sx * sx;
    if (std::fabs(denom) < 1e-12) return 0.0;
    return (n * sxy - sx * sy) / denom;
}

StabilityVerdict classify_stability(const RunResult& run, double slope_threshold,
                                    double backlog_floor) {
    StabilityVerdict v;
    size_t n = run.slots.size();
    v.slope = fit_slope(run.slots, run.total_backlog, n / 2);
    size_t q = n - n / 4;
    double sum = 0.0;
    size_t cnt = 0;
    for (size_t i = q; i < n; ++i) {
        sum += static_cast<double>(run.total_backlog[i]);
        ++cnt;
    }
    v.final_quarter_mean = cnt ? sum / cnt : 0.0;
    v.unstable = v.slope > slope_threshold && v.final_quarter_mean > backlog_floor;
    return v;
}

std::vector<BackgroundFlow> apply_background(
    const Topology& topo, const std::vector<std::pair<std::vector<std::string>, double>>& flows) {
    std::vector<BackgroundFlow> out;
    for (const auto& [path, rate] : flows) out.push_back(make_background_flow(topo, path, rate));
    return out;
}

std::vector<double> background_reduced_caps(const Topology& topo,
                                            const std::vector<BackgroundFlow>& flows) {
    std::vector<double> caps = capacities_of(topo);
    for (const BackgroundFlow& f : flows)
        for (LinkIndex e : f.links) caps[e] = std::max(0.0, caps[e] - f.rate);
    return caps;
}

namespace {

struct SweepTask {
    std::string policy_name;
    double rho;
    uint64_t seed;
};

} // namespace

void ExperimentConfig::validate_for_sweep() const {
    for (double rho : rho_grid)
        if (!(rho > 0.0 && rho <= 1.0))
            throw std::invalid_argument("sweep load must be in (0, 1], got " +
                                        std::to_string(rho));
    if (horizon < 10000)
        throw std::invalid_argument("stability sweeps need a horizon of at least 10000 slots");
    if (replications < 1) throw std::invalid_argument("need at least one replication");
}

SweepResult run_sweep(const Topology& topo, const ExperimentConfig& cfg) {
    cfg.validate_for_sweep();
    TunnelSet tunnels = TunnelSet::enumerate(topo);
    const int K = static_cast<int>(topo.commodities.size());
    std::vector<BackgroundFlow> background = apply_background(topo, cfg.background);

    std::vector<SweepTask> tasks;
    for (const std::string& pname : cfg.policies)
        for (double rho : cfg.rho_grid)
            for (int rep = 0; rep < cfg.replications; ++rep)
                tasks.push_back({pname, rho, cfg.base_seed + static_cast<uint64_t>(rep)});

    std::vector<SweepEntry> entries(tasks.size());
    std::atomic<size_t> next{0};
    int nthreads = cfg.threads > 0 ? cfg.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
    if (nthreads < 1) nthreads = 1;

    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            const SweepTask& task = tasks[i];
            EstimatorConfig est;
            est.mode = estimator_mode_from_string(cfg.estimator);
            est.probe_interval = cfg.probe_interval;
            est.idle_threshold = cfg.idle_threshold;
            CentralizedConfig cen;
            cen.frame_length = cfg.frame_length;
            cen.capacity_shrink = cfg.capacity_shrink;
            auto policy = make_policy(task.policy_name, topo, tunnels, est, cen);

            ArrivalSpec arrivals;
            for (int k = 0; k < K; ++k)
                arrivals.per_commodity.push_back(
                    {ArrivalKind::Poisson, task.rho * topo.commodities[k].lambda_max});
            RunOptions opt;
            opt.horizon = cfg.horizon;
            opt.seed = task.seed;
            opt.record_every = cfg.record_every;
            RunResult run = run_policy(topo, tunnels, *policy, arrivals, background, opt);

            SweepEntry e;
            e.policy = policy->name();
            e.rho = task.rho;
            e.seed = task.seed;
            e.verdict = classify_stability(run, cfg.slope_threshold, cfg.backlog_floor);
            e.final_backlog = run.final_total_backlog;
            for (int k = 0; k < K; ++k)
                e.throughput.push_back(static_cast<double>(run.final_delivered[k]) / cfg.horizon);
            entries[i] = std::move(e);

            if (!cfg.out_dir.empty()) {
                std::filesystem::create_directories(cfg.out_dir);
                char name[256];
                std::snprintf(name, sizeof(name), "%s/run_%s_rho%.3f_seed%llu.csv",
                              cfg.out_dir.c_str(), policy->name().c_str(), task.rho,
                              static_cast<unsigned long long>(task.seed));
                write_run_csv(name, topo, run);
            }
        }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    SweepResult out;
    out.entries = std::move(entries);
    std::map<std::pair<std::string, double>, int> votes, total;
    for (const SweepEntry& e : out.entries) {
        auto key = std::make_pair(e.policy, e.rho);
        total[key] += 1;
        if (e.verdict.unstable) votes[key] += 1;
    }
    for (const auto& [key, n] : total) out.unstable[key] = votes[key] * 2 > n;
    return out;
}

RateControlResult rate_control_experiment(const Topology& topo, const TunnelSet& tunnels,
                                          const ExperimentConfig& cfg, int final_window) {
    const int K = static_cast<int>(topo.commodities.size());
    EstimatorConfig est;
    est.mode = estimator_mode_from_string(cfg.estimator);
    est.probe_interval = cfg.probe_interval;
    est.idle_threshold = cfg.idle_threshold;

    RateControllerConfig rc;
    rc.weight.assign(K, 0.0);
    rc.cap.assign(K, 0.0);
    for (int k = 0; k < K; ++k) {
        auto it = cfg.utility_weight.find(topo.commodities[k].name);
        if (it != cfg.utility_weight.end()) rc.weight[k] = it->second;
        auto ic = cfg.rate_cap.find(topo.commodities[k].name);
        if (ic != cfg.rate_cap.end()) rc.cap[k] = ic->second;
    }
    RateControlledPolicy policy(std::make_unique<OorpPolicy>(tunnels, est), rc);

    ArrivalSpec arrivals;
    for (int k = 0; k < K; ++k) {
        if (rc.weight[k] > 0)
            arrivals.per_commodity.push_back({ArrivalKind::Controlled, 0.0});
        else
            arrivals.per_commodity.push_back({ArrivalKind::None, 0.0});
    }
    std::vector<BackgroundFlow> background = apply_background(topo, cfg.background);

    RunOptions opt;
    opt.horizon = cfg.horizon;
    opt.seed = cfg.base_seed;
    opt.record_every = std::max(1, cfg.record_every);
    RateControlResult out;
    out.run = run_policy(topo, tunnels, policy, arrivals, background, opt);
    out.window = final_window;

    // Converged rate: delivered over the final window.
    out.converged_rates.assign(K, 0.0);
    const auto& slots = out.run.slots;
    int64_t t_end = slots.back();
    int64_t t_from = t_end - final_window;
    size_t i_from = 0;
    for (size_t i = 0; i < slots.size(); ++i)
        if (slots[i] <= t_from) i_from = i;
    for (int k = 0; k < K; ++k) {
        int64_t d = out.run.delivered[k].back() - out.run.delivered[k][i_from];
        int64_t span = t_end - slots[i_from];
        out.converged_rates[k] = span > 0 ? static_cast<double>(d) / span : 0.0;
    }
    out.achieved_utility = 0.0;
    for (int k = 0; k < K; ++k)
        if (rc.weight[k] > 0)
            out.achieved_utility +=
                rc.weight[k] * std::log(std::max(out.converged_rates[k], 1e-9));
    return out;
}

QueueDemoResult single_queue_demo(int tau, int idle_threshold) {
    QueueDemoResult out;
    out.tau = tau;

    struct Item {
        int inject;
        bool probe;
    };
    struct Track {
        std::deque<Item> q;
        double est = 0.0;
        int last_traffic = -1;
        int probe_inflight = 0;
        int64_t data_len = 0;
    };
    Track plain, probed;
    bool probes_for[2] = {false, true};
    Track* tracks[2] = {&plain, &probed};

    out.t.push_back(0);
    out.actual.push_back(0);
    out.delay_est.push_back(0.0);
    out.delay_probe_est.push_back(0.0);

    for (int t = 0; t < 3 * tau; ++t) {
        for (int v = 0; v < 2; ++v) {
            Track& tr = *tracks[v];
            if (t < tau) {
                tr.q.push_back({t, false});
                tr.q.push_back({t, false});
                tr.data_len += 2;
                tr.last_traffic = t;
            }
            if (probes_for[v] && tr.probe_inflight == 0 && tr.last_traffic >= 0 &&
                t - tr.last_traffic >= idle_threshold) {
                tr.q.push_back({t, true});
                tr.probe_inflight += 1;
                tr.last_traffic = t;
            }
            if (!tr.q.empty()) {
                Item it = tr.q.front();
                tr.q.pop_front();
                if (it.probe)
                    tr.probe_inflight -= 1;
                else
                    tr.data_len -= 1;
                tr.est = static_cast<double>(t - it.inject);
            }
        }
        out.t.push_back(t + 1);
        out.actual.push_back(plain.data_len);
        out.delay_est.push_back(plain.est);
        out.delay_probe_est.push_back(probed.est);
    }
    return out;
}

// ---- config + emission ------------------------------------------------------

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(f);
    ExperimentConfig cfg;
    cfg.topology_path = j.at("topology").get<std::string>();
    if (j.contains("policies")) cfg.policies = j["policies"].get<std::vector<std::string>>();
    if (j.contains("estimator")) cfg.estimator = j["estimator"].get<std::string>();
    if (j.contains("probe_interval")) cfg.probe_interval = j["probe_interval"].get<int>();
    if (j.contains("idle_threshold")) cfg.idle_threshold = j["idle_threshold"].get<int>();
    if (j.contains("frame_length")) cfg.frame_length = j["frame_length"].get<int>();
    if (j.contains("capacity_shrink")) cfg.capacity_shrink = j["capacity_shrink"].get<double>();
    if (j.contains("rho_grid")) cfg.rho_grid = j["rho_grid"].get<std::vector<double>>();
    if (j.contains("horizon")) cfg.horizon = j["horizon"].get<int>();
    if (j.contains("replications")) cfg.replications = j["replications"].get<int>();
    if (j.contains("base_seed")) cfg.base_seed = j["base_seed"].get<uint64_t>();
    if (j.contains("record_every")) cfg.record_every = j["record_every"].get<int>();
    if (j.contains("slope_threshold")) cfg.slope_threshold = j["slope_threshold"].get<double>();
    if (j.contains("backlog_floor")) cfg.backlog_floor = j["backlog_floor"].get<double>();
    if (j.contains("background"))
        for (const auto& b : j["background"])
            cfg.background.push_back(
                {b.at("path").get<std::vector<std::string>>(), b.at("rate").get<double>()});
    if (j.contains("utility_weight"))
        cfg.utility_weight = j["utility_weight"].get<std::map<std::string, double>>();
    if (j.contains("rate_cap")) cfg.rate_cap = j["rate_cap"].get<std::map<std::string, double>>();
    if (j.contains("rate_window")) cfg.rate_window = j["rate_window"].get<int>();
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
    return cfg;
}

void write_run_csv(const std::string& path, const Topology& topo, const RunResult& run) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    const int K = static_cast<int>(topo.commodities.size());
    f << "slot,total_backlog";
    for (int k = 0; k < K; ++k) f << ",backlog_" << topo.commodities[k].name;
    for (int k = 0; k < K; ++k) f << ",delivered_" << topo.commodities[k].name;
    f << "\n";
    for (size_t i = 0; i < run.slots.size(); ++i) {
        f << run.slots[i] << "," << run.total_backlog[i];
        for (int k = 0; k < K; ++k) f << "," << run.commodity_backlog[k][i];
        for (int k = 0; k < K; ++k) f << "," << run.delivered[k][i];
        f << "\n";
    }
}

void write_run_summary_json(const std::string& path, const Topology& topo, const RunResult& run,
                            const StabilityVerdict& verdict) {
    nlohmann::ordered_json j;
    size_t n = run.slots.size();
    double mean_final_half = 0.0;
    size_t cnt = 0;
    for (size_t i = n / 2; i < n; ++i) {
        mean_final_half += static_cast<double>(run.total_backlog[i]);
        ++cnt;
    }
    j["mean_backlog_final_half"] = cnt ? mean_final_half / cnt : 0.0;
    j["stability_slope"] = verdict.slope;
    j["final_quarter_mean_backlog"] = verdict.final_quarter_mean;
    j["verdict"] = verdict.unstable ? "unstable" : "stable";
    nlohmann::ordered_json tp;
    int horizon = run.slots.empty() ? 0 : run.slots.back();
    for (size_t k = 0; k < topo.commodities.size(); ++k)
        tp[topo.commodities[k].name] =
            horizon ? static_cast<double>(run.final_delivered[k]) / horizon : 0.0;
    j["throughput"] = tp;
    j["slots_exceeding_tunnel_capacity"] = run.tunnel_cap_exceeded_slots;
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << j.dump(2) << "\n";
}

void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << "policy,rho,seed,slope,final_quarter_mean,verdict\n";
    char buf[256];
    for (const SweepEntry& e : sweep.entries) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%llu,%.6f,%.2f,%s\n", e.policy.c_str(), e.rho,
                      static_cast<unsigned long long>(e.seed), e.verdict.slope,
                      e.verdict.final_quarter_mean, e.verdict.unstable ? "unstable" : "stable");
        f << buf;
    }
}

void write_sweep_json(const std::string& path, const ExperimentConfig& cfg,
                      const SweepResult& sweep) {
    nlohmann::ordered_json j;
    j["topology"] = cfg.topology_path;
    j["horizon"] = cfg.horizon;
    j["replications"] = cfg.replications;
    j["points"] = nlohmann::ordered_json::array();
    for (const auto& [key, unstable] : sweep.unstable) {
        nlohmann::ordered_json p;
        p["policy"] = key.first;
        p["rho"] = key.second;
        p["unstable"] = unstable;
        double slope_sum = 0.0, mean_sum = 0.0;
        int n = 0;
        for (const SweepEntry& e : sweep.entries)
            if (e.policy == key.first && e.rho == key.second) {
                slope_sum += e.verdict.slope;
                mean_sum += e.verdict.final_quarter_mean;
                ++n;
            }
        p["mean_slope"] = n ? slope_sum / n : 0.0;
        p["mean_final_quarter_backlog"] = n ? mean_sum / n : 0.0;
        j["points"].push_back(p);
    }
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << j.dump(2) << "\n";
}

void write_demo_csv(const std::string& path, const QueueDemoResult& demo) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << "slot,actual,delay_estimate,delay_probe_estimate\n";
    char buf[128];
    for (size_t i = 0; i < demo.t.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.1f,%.1f\n", demo.t[i],
                      static_cast<long long>(demo.actual[i]), demo.delay_est[i],
                      demo.delay_probe_est[i]);
        f << buf;
    }
}

void write_rate_csv(const std::string& path, const Topology& topo, const RunResult& run,
                    int window) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    const int K = static_cast<int>(topo.commodities.size());
    f << "slot,total_backlog";
    for (int k = 0; k < K; ++k) f << ",delivered_" << topo.commodities[k].name;
    for (int k = 0; k < K; ++k) f << ",rate_" << topo.commodities[k].name;
    f << "\n";
    char num[64];
    for (size_t i = 0; i < run.slots.size(); ++i) {
        f << run.slots[i] << "," << run.total_backlog[i];
        for (int k = 0; k < K; ++k) f << "," << run.delivered[k][i];
        // Moving average over roughly `window` slots of recorded samples.
        size_t j = i;
        while (j > 0 && run.slots[i] - run.slots[j - 1] <= window) --j;
        for (int k = 0; k < K; ++k) {
            double rate = 0.0;
            if (j < i) {
                rate = static_cast<double>(run.delivered[k][i] - run.delivered[k][j]) /
                       static_cast<double>(run.slots[i] - run.slots[j]);
            }
            std::snprintf(num, sizeof(num), ",%.6f", rate);
            f << num;
        }
        f << "\n";
    }
}

Scenario load_scenario(const std::string& topology_path) {
    Scenario s;
    s.topo = Topology::parse_file(topology_path);
    s.topo.derive_routes();
    s.topo.validate();
    s.tunnels = TunnelSet::enumerate(s.topo);
    for (const Commodity& c : s.topo.commodities) s.lambda_max.push_back(c.lambda_max);
    return s;
}

} // namespace oorp
