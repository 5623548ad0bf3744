#include "mwrl/rl.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

std::vector<double> db_s11(const SParamSweep& s) {
    std::vector<double> v;
    for (const auto& p : s.points) v.push_back(db_mag(p.s11));
    return v;
}

std::vector<double> db_s21(const SParamSweep& s) {
    std::vector<double> v;
    for (const auto& p : s.points) v.push_back(db_mag(p.s21));
    return v;
}

double lerp_freq(const std::vector<double>& f, const std::vector<double>& d, std::size_t a, std::size_t b, double level) {
    const double t = (level - d[a]) / (d[b] - d[a]);
    return f[a] + t * (f[b] - f[a]);
}

// Walks outwards from `centre` until the curve passes `level` in the direction given by `above`.
std::pair<double, double> crossings(const std::vector<double>& f, const std::vector<double>& d, std::size_t centre,
                                    double level, bool above) {
    auto passed = [&](double v) { return above ? v > level : v < level; };
    double lo = f.front(), hi = f.back();
    for (std::size_t i = centre; i > 0; --i)
        if (passed(d[i - 1])) {
            lo = lerp_freq(f, d, i - 1, i, level);
            break;
        }
    for (std::size_t i = centre; i + 1 < d.size(); ++i)
        if (passed(d[i + 1])) {
            hi = lerp_freq(f, d, i, i + 1, level);
            break;
        }
    return {lo, hi};
}

std::size_t nearest_index(const std::vector<double>& f, double x) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < f.size(); ++i)
        if (std::abs(f[i] - x) < std::abs(f[best] - x)) best = i;
    return best;
}

std::vector<std::size_t> band_indices(const std::vector<double>& f, double lo, double hi) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < f.size(); ++i)
        if (f[i] >= lo && f[i] <= hi) idx.push_back(i);
    return idx;
}

}  // namespace

void DesignTask::check() const {
    if (!(f1 < f0 && f0 < f2)) throw UserError("task requires f1 < f0 < f2");
    if (!std::isfinite(il_floor_db) || !std::isfinite(rl_ceiling_db)) throw UserError("task loss thresholds must be finite");
}

BandMeasurement measure_band(const SParamSweep& s, CircuitKind kind) {
    const auto& f = s.frequencies;
    const auto d11 = db_s11(s);
    const auto d21 = db_s21(s);
    BandMeasurement m;
    std::size_t centre = 0;
    if (kind == CircuitKind::Antenna) {
        for (std::size_t i = 1; i < f.size(); ++i)
            if (std::abs(s.points[i].s11) < std::abs(s.points[centre].s11)) centre = i;
        if (d11[centre] < -10.0) {
            std::tie(m.f1, m.f2) = crossings(f, d11, centre, -10.0, true);
        } else {
            m.f1 = f.front();
            m.f2 = f.back();
        }
    } else {
        for (std::size_t i = 1; i < f.size(); ++i)
            if (std::abs(s.points[i].s21) > std::abs(s.points[centre].s21)) centre = i;
        std::tie(m.f1, m.f2) = crossings(f, d21, centre, d21[centre] - 3.0, false);
    }
    m.f0 = f[centre];
    auto idx = band_indices(f, m.f1, m.f2);
    if (idx.empty()) idx.push_back(centre);
    double sum = 0.0, il = INFINITY;
    for (auto i : idx) {
        sum += d11[i];
        il = std::min(il, d21[i]);
    }
    m.passband_rl_db = sum / static_cast<double>(idx.size());
    m.passband_il_db = il;
    return m;
}

bool task_success(const SParamSweep& s, const DesignTask& task) {
    const auto& f = s.frequencies;
    if (task.kind == CircuitKind::Antenna)
        return db_mag(s.points[nearest_index(f, task.f0)].s11) <= task.rl_ceiling_db;
    auto idx = band_indices(f, task.f1, task.f2);
    if (idx.empty()) idx.push_back(nearest_index(f, task.f0));
    for (auto i : idx) {
        if (db_mag(s.points[i].s11) > task.rl_ceiling_db) return false;
        if (db_mag(s.points[i].s21) < task.il_floor_db) return false;
    }
    return true;
}

double mean_band_loss(const SParamSweep& s, const DesignTask& task) {
    auto idx = band_indices(s.frequencies, task.f1, task.f2);
    if (idx.empty()) idx.push_back(nearest_index(s.frequencies, task.f0));
    double sum = 0.0;
    for (auto i : idx) sum += std::max(db_mag(s.points[i].s11), task.rl_ceiling_db);
    return sum / static_cast<double>(idx.size());
}

double reward(const BandMeasurement& m, const SParamSweep& s, const DesignTask& task, const RewardWeights& w) {
    double r = w.beta1 / std::max(std::abs(task.f0 - m.f0), w.eps_hz);
    r += w.beta2 / std::max(std::abs(task.f1 - m.f1) + std::abs(task.f2 - m.f2), w.eps_hz);
    r += w.beta3 * (-mean_band_loss(s, task));
    if (task_success(s, task)) r += w.success_bonus;
    return r;
}

double reward_upper_bound(const RewardWeights& w, const DesignTask& task) {
    return w.beta1 / w.eps_hz + w.beta2 / w.eps_hz + w.beta3 * std::abs(task.rl_ceiling_db) + w.success_bonus;
}

std::vector<double> n_step_returns(const std::vector<double>& rewards, double bootstrap, double gamma, bool terminal) {
    std::vector<double> out(rewards.size());
    double run = terminal ? 0.0 : bootstrap;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        run = rewards[i] + gamma * run;
        out[i] = run;
    }
    return out;
}

DesignEnv::DesignEnv(MeshModel seed, Solver solver, DesignTask task, RewardWeights weights, std::vector<double> freqs,
                     int grid, int episode_cap)
    : seed_(std::move(seed)), solver_(std::move(solver)), task_(std::move(task)), w_(weights),
      freqs_(std::move(freqs)), grid_(grid), cap_(episode_cap) {
    task_.check();
    if (task_.size_bound_mm)
        seed_.bound = std::array<std::int64_t, 2>{mm_to_um((*task_.size_bound_mm)[0]), mm_to_um((*task_.size_bound_mm)[1])};
    if (auto v = validate(seed_); !v.empty()) throw UserError("invalid seed mesh: " + describe(v));
    frame_ = default_frame(seed_);
    reset();
}

void DesignEnv::reset() {
    mesh_ = seed_;
    sweep_ = solver_.sweep(mesh_, freqs_);
    meas_ = measure_band(sweep_, task_.kind);
    steps_ = 0;
    done_ = false;
}

double DesignEnv::current_reward() const { return reward(meas_, sweep_, task_, w_); }

StepInfo DesignEnv::step(const MemberList& members, std::int64_t delta_um) {
    if (done_) throw UserError("step on a finished episode");
    StepInfo info;
    ++steps_;
    MeshModel next = mesh_;
    bool ok = true;
    for (const auto& [v, d] : members) {
        try {
            next = apply_action(next, VertexAction{v, d, delta_um});
        } catch (const RejectedAction& e) {
            ok = false;
            info.violation = e.what();
            break;
        }
    }
    SParamSweep sweep;
    if (ok) {
        try {
            sweep = solver_.sweep(next, freqs_);
        } catch (const UserError& e) {
            ok = false;
            info.violation = e.what();
        }
    }
    if (!ok) {
        info.rejected = true;
        info.reward = w_.invalid_penalty;
    } else {
        mesh_ = std::move(next);
        sweep_ = std::move(sweep);
        meas_ = measure_band(sweep_, task_.kind);
        info.success = task_success(sweep_, task_);
        info.reward = reward(meas_, sweep_, task_, w_);
    }
    if (info.success) {
        info.done = true;
    } else if (steps_ >= cap_) {
        info.done = true;
        info.timeout = true;
    }
    done_ = info.done;
    return info;
}

NetInput DesignEnv::observe() const {
    NetInput in;
    const Grid g = rasterize(mesh_, frame_, grid_);
    in.grid = Eigen::Map<const Eigen::VectorXd>(g.cells.data(), static_cast<Eigen::Index>(g.cells.size()));
    const std::size_t n = sweep_.size();
    in.svec.resize(static_cast<Eigen::Index>(2 * n));
    for (std::size_t i = 0; i < n; ++i) {
        in.svec(static_cast<Eigen::Index>(i)) = (db_mag(sweep_.points[i].s11) + 100.0) / 100.0;
        in.svec(static_cast<Eigen::Index>(n + i)) = (db_mag(sweep_.points[i].s21) + 100.0) / 100.0;
    }
    return in;
}

NetConfig net_config_for(const DesignEnv& env, int actions) {
    NetConfig c;
    c.grid = env.grid();
    c.svec = env.svec_size();
    c.actions = actions;
    return c;
}

std::vector<MemberList> cluster_action_set(const ActionClusterModel& clusters) {
    std::vector<MemberList> out;
    for (int c : clusters.effective_clusters()) out.push_back(clusters.members(c));
    return out;
}

std::vector<MemberList> vertex_action_set(const MeshModel& mesh) {
    std::vector<MemberList> out;
    for (const auto& a : vertex_action_space(mesh)) out.push_back({a});
    return out;
}

namespace {

struct Transition {
    ForwardCache cache;
    int action = 0;
    double reward = 0.0;
};

int sample_action(const Eigen::VectorXd& pi, std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    double run = 0.0;
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        run += pi(i);
        if (u < run) return static_cast<int>(i);
    }
    return static_cast<int>(pi.size() - 1);
}

struct SharedProgress {
    std::mutex mu;
    std::atomic<std::uint64_t> steps{0};
    std::atomic<bool> stop{false};
    std::uint64_t episodes = 0;
    TrainResult* result = nullptr;
};

}  // namespace

TrainResult train_actions(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed, const Solver& solver,
                          const std::vector<double>& freqs, const RewardWeights& w,
                          const std::vector<MemberList>& actions, const std::optional<ResumeState>& resume,
                          const CheckpointHook& hook) {
    if (actions.empty()) throw UserError("no effective actions");
    if (cfg.workers < 1 || cfg.n_step < 1 || !(cfg.gamma >= 0.0 && cfg.gamma <= 1.0))
        throw UserError("invalid training configuration");
    const std::int64_t delta_um = mm_to_um(cfg.delta_rl_mm);
    if (delta_um <= 0) throw UserError("action step must be at least one micrometre");

    DesignEnv probe(seed, solver, task, w, freqs, cfg.grid, cfg.episode_cap);
    const NetConfig ncfg = net_config_for(probe, static_cast<int>(actions.size()));

    TrainResult result;
    result.policy_size = static_cast<int>(actions.size());
    result.best_mesh = probe.mesh();
    result.best_sweep = probe.sweep();
    result.best_reward = probe.current_reward();

    PolicyValueNet init(ncfg);
    RmsProp opt;
    opt.lr = cfg.lr;
    std::uint64_t start = 0;
    if (resume) {
        if (!(resume->net.config() == ncfg)) throw UserError("checkpoint does not match the task network shape");
        init = resume->net;
        opt = resume->optimizer;
        opt.lr = cfg.lr;
        start = resume->global_step;
    } else {
        init.init_orthogonal(cfg.seed);
    }
    SharedNet shared(init, opt);

    SharedProgress prog;
    prog.steps = start;
    prog.result = &result;
    const auto t0 = std::chrono::steady_clock::now();

    auto worker = [&](int wid) {
        DesignEnv env(seed, solver, task, w, freqs, cfg.grid, cfg.episode_cap);
        std::mt19937_64 rng(cfg.seed * 1000003ULL + static_cast<std::uint64_t>(wid) * 7919ULL + start);
        PolicyValueNet local;
        double ep_return = 0.0;
        std::vector<Transition> traj;
        while (!prog.stop.load()) {
            if (prog.steps.load() >= cfg.max_steps) break;
            shared.copy_to(local);
            traj.clear();
            bool terminal = false;
            for (int t = 0; t < cfg.n_step; ++t) {
                const std::uint64_t gstep = prog.steps.fetch_add(1) + 1;
                if (gstep > cfg.max_steps) {
                    prog.steps.fetch_sub(1);
                    break;
                }
                Transition tr;
                local.forward(env.observe(), tr.cache);
                tr.action = sample_action(tr.cache.pi, rng);
                const StepInfo info = env.step(actions[static_cast<std::size_t>(tr.action)], delta_um);
                tr.reward = info.reward;
                ep_return += info.reward;
                traj.push_back(std::move(tr));
                {
                    std::lock_guard<std::mutex> lock(prog.mu);
                    if (!info.rejected && info.reward > result.best_reward) {
                        result.best_reward = info.reward;
                        result.best_mesh = env.mesh();
                        result.best_sweep = env.sweep();
                    }
                    if (info.success && !result.success) {
                        result.success = true;
                        result.success_step = gstep;
                    }
                    if (info.done) {
                        CurveRow row;
                        row.global_step = gstep;
                        row.episode = prog.episodes++;
                        row.ret = ep_return;
                        row.f0_err_hz = std::abs(env.measurement().f0 - task.f0);
                        row.passband_rl_db = env.measurement().passband_rl_db;
                        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                        row.success = info.success;
                        result.curve.push_back(row);
                    }
                }
                if (info.success && cfg.stop_on_success) prog.stop = true;
                if (info.done) {
                    terminal = true;
                    break;
                }
            }
            if (traj.empty()) break;
            std::vector<double> rewards;
            for (const auto& tr : traj) rewards.push_back(tr.reward);
            double boot = 0.0;
            if (!terminal) {
                ForwardCache c;
                local.forward(env.observe(), c);
                boot = c.value;
            }
            const auto returns = n_step_returns(rewards, boot, cfg.gamma, terminal);
            Grads g = local.zero_grads();
            for (std::size_t i = 0; i < traj.size(); ++i)
                a3c_backward(local, traj[i].cache, traj[i].action, returns[i], cfg.entropy_beta, g);
            shared.update(g);
            if (hook && cfg.checkpoint_every > 0 && wid == 0) {
                const RmsProp o = shared.optimizer();
                if (o.updates % cfg.checkpoint_every == 0) hook(shared.snapshot(), o, prog.steps.load());
            }
            if (terminal) {
                env.reset();
                ep_return = 0.0;
            }
        }
    };

    if (cfg.workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < cfg.workers; ++i) pool.emplace_back(worker, i);
        for (auto& t : pool) t.join();
    }
    result.net = shared.snapshot();
    result.optimizer = shared.optimizer();
    result.steps = prog.steps.load();
    if (hook) hook(result.net, result.optimizer, result.steps);
    return result;
}

TrainResult train(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed, const Solver& solver,
                  const std::vector<double>& freqs, const RewardWeights& w, const ActionClusterModel& clusters,
                  const std::optional<ResumeState>& resume, const CheckpointHook& hook) {
    return train_actions(cfg, task, seed, solver, freqs, w, cluster_action_set(clusters), resume, hook);
}

TrainResult train_vertex_baseline(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed,
                                  const Solver& solver, const std::vector<double>& freqs, const RewardWeights& w,
                                  const std::optional<ResumeState>& resume, const CheckpointHook& hook) {
    return train_actions(cfg, task, seed, solver, freqs, w, vertex_action_set(seed), resume, hook);
}

void write_curve_csv(const std::vector<CurveRow>& rows, std::ostream& out, bool include_wall) {
    out << "global_step,episode,return,f0_err_hz,passband_rl_db";
    if (include_wall) out << ",wall_ms";
    out << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.global_step << ',' << r.episode << ',' << r.ret << ',' << r.f0_err_hz << ',' << r.passband_rl_db;
        if (include_wall) out << ',' << std::setprecision(6) << r.wall_ms << std::setprecision(17);
        out << '\n';
    }
}

}  // namespace mwrl
