#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mwrl/rl.hpp"
#include "mwrl/surrogate.hpp"

namespace mwrl {

struct ClusterConfig {
    int k = 5;
    std::vector<double> deltas_mm{0.05, 0.1, 0.15};
    double tau = 0.05;
    std::uint64_t seed = 7;
    int restarts = 10;
};

struct RunConfig {
    DesignTask task;
    std::string mesh_path;  // resolved against the config file's directory
    Solver solver;
    int grid_points = 101;
    ClusterConfig clustering;
    TrainConfig training;
    RewardWeights reward;
    std::string output_dir;
    std::string canonical;  // normalized JSON text after overrides, hashed into manifests

    std::vector<double> freqs() const { return default_grid(task.f0, grid_points); }
};

// Parses JSON text; unknown keys are rejected. `base_dir` resolves the mesh path.
RunConfig parse_run_config(const std::string& text, const std::string& base_dir,
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace mwrl
