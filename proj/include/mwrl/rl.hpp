#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mwrl/clustering.hpp"
#include "mwrl/mesh.hpp"
#include "mwrl/nn.hpp"
#include "mwrl/sparams.hpp"
#include "mwrl/surrogate.hpp"

namespace mwrl {

struct DesignTask {
    double f0 = 9.3e9, f1 = 8.9e9, f2 = 9.7e9;  // Hz
    double il_floor_db = -0.5;
    double rl_ceiling_db = -20.0;
    std::optional<std::array<double, 2>> size_bound_mm;
    CircuitKind kind = CircuitKind::Filter;

    void check() const;
};

struct RewardWeights {
    double beta1 = 1e9, beta2 = 1e9, beta3 = 0.05;
    double eps_hz = 1e7;
    double success_bonus = 100.0;
    double invalid_penalty = -1.0;
};

struct BandMeasurement {
    double f0 = 0, f1 = 0, f2 = 0;  // measured centre and edges, Hz
    double passband_rl_db = 0;      // mean dB(s11) over the measured band
    double passband_il_db = 0;      // min dB(s21) over the measured band
};

BandMeasurement measure_band(const SParamSweep& s, CircuitKind kind);
bool task_success(const SParamSweep& s, const DesignTask& task);
// Mean over design-band grid points of dB(s11) clamped below at the return-loss ceiling.
double mean_band_loss(const SParamSweep& s, const DesignTask& task);
double reward(const BandMeasurement& m, const SParamSweep& s, const DesignTask& task, const RewardWeights& w);
double reward_upper_bound(const RewardWeights& w, const DesignTask& task);

std::vector<double> n_step_returns(const std::vector<double>& rewards, double bootstrap, double gamma, bool terminal);

using MemberList = std::vector<std::pair<std::size_t, Direction>>;

struct StepInfo {
    double reward = 0.0;
    bool done = false;
    bool rejected = false;
    bool success = false;
    bool timeout = false;
    std::string violation;
};

class DesignEnv {
public:
    DesignEnv(MeshModel seed, Solver solver, DesignTask task, RewardWeights weights, std::vector<double> freqs,
              int grid = 32, int episode_cap = 100);

    void reset();
    StepInfo step(const MemberList& members, std::int64_t delta_um);
    NetInput observe() const;

    const MeshModel& mesh() const { return mesh_; }
    const SParamSweep& sweep() const { return sweep_; }
    const BandMeasurement& measurement() const { return meas_; }
    int steps() const { return steps_; }
    bool done() const { return done_; }
    double current_reward() const;
    const DesignTask& task() const { return task_; }
    const std::vector<double>& freqs() const { return freqs_; }
    int svec_size() const { return static_cast<int>(2 * freqs_.size()); }
    int grid() const { return grid_; }

private:
    MeshModel seed_, mesh_;
    Solver solver_;
    DesignTask task_;
    RewardWeights w_;
    std::vector<double> freqs_;
    Frame frame_;
    int grid_;
    int cap_;
    SParamSweep sweep_;
    BandMeasurement meas_;
    int steps_ = 0;
    bool done_ = false;
};

struct TrainConfig {
    int workers = 4;
    int n_step = 5;
    double gamma = 0.99;
    double entropy_beta = 0.01;
    double lr = 7e-4;
    std::uint64_t max_steps = 20000;
    int episode_cap = 100;
    double delta_rl_mm = 0.05;
    std::uint64_t seed = 1;
    int grid = 32;
    bool stop_on_success = false;
    std::uint64_t checkpoint_every = 0;  // updates between checkpoint callbacks, 0 = only at the end
};

struct CurveRow {
    std::uint64_t global_step = 0;
    std::uint64_t episode = 0;
    double ret = 0.0;
    double f0_err_hz = 0.0;
    double passband_rl_db = 0.0;
    double wall_ms = 0.0;
    bool success = false;
};

struct TrainResult {
    PolicyValueNet net;
    RmsProp optimizer;
    std::vector<CurveRow> curve;
    MeshModel best_mesh;
    SParamSweep best_sweep;
    double best_reward = 0.0;
    bool success = false;
    std::uint64_t success_step = 0;
    std::uint64_t steps = 0;
    int policy_size = 0;
};

struct ResumeState {
    PolicyValueNet net;
    RmsProp optimizer;
    std::uint64_t global_step = 0;
};

using CheckpointHook = std::function<void(const PolicyValueNet&, const RmsProp&, std::uint64_t)>;

NetConfig net_config_for(const DesignEnv& env, int actions);

TrainResult train_actions(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed, const Solver& solver,
                          const std::vector<double>& freqs, const RewardWeights& w,
                          const std::vector<MemberList>& actions, const std::optional<ResumeState>& resume = {},
                          const CheckpointHook& hook = {});

// Cluster agent: one policy logit per effective cluster.
TrainResult train(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed, const Solver& solver,
                  const std::vector<double>& freqs, const RewardWeights& w, const ActionClusterModel& clusters,
                  const std::optional<ResumeState>& resume = {}, const CheckpointHook& hook = {});

// Baseline: one policy logit per raw (vertex, direction) action.
TrainResult train_vertex_baseline(const TrainConfig& cfg, const DesignTask& task, const MeshModel& seed,
                                  const Solver& solver, const std::vector<double>& freqs, const RewardWeights& w,
                                  const std::optional<ResumeState>& resume = {}, const CheckpointHook& hook = {});

std::vector<MemberList> cluster_action_set(const ActionClusterModel& clusters);
std::vector<MemberList> vertex_action_set(const MeshModel& mesh);

void write_curve_csv(const std::vector<CurveRow>& rows, std::ostream& out, bool include_wall = true);

}  // namespace mwrl
