#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mwrl/mesh.hpp"
#include "mwrl/sparams.hpp"
#include "mwrl/surrogate.hpp"

namespace mwrl {

struct PerturbationSample {
    VertexAction action;
    std::vector<double> feature;
};

struct PerturbationDataset {
    std::vector<PerturbationSample> samples;
    std::size_t rejected = 0;
    SParamSweep baseline;
};

// dB(s11) followed by dB(s21) unless the solver is one-port.
std::vector<double> sweep_db_vector(const SParamSweep& s, bool one_port);

PerturbationDataset gen_perturbation_dataset(const MeshModel& mesh, const Solver& solver,
                                             const std::vector<double>& deltas_mm,
                                             const std::vector<double>& freqs);

void write_dataset_csv(const PerturbationDataset& d, std::ostream& out);

using Matrix = std::vector<std::vector<double>>;

struct KMeansResult {
    Matrix centroids;
    std::vector<int> assignment;
    double objective = 0.0;
    std::vector<std::vector<double>> histories;  // J after every Lloyd iteration, one list per restart
};

double squared_distance(const std::vector<double>& a, const std::vector<double>& b);
double kmeans_objective(const Matrix& x, const Matrix& c, const std::vector<int>& a);
KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts = 10, int max_iter = 500);

struct ActionClusterModel {
    int k = 0;
    std::uint64_t seed = 0;
    double objective = 0.0;
    double tau = 0.0;
    Matrix centroids;
    std::vector<int> assignment;
    std::vector<VertexAction> actions;  // one per training sample, same order as assignment
    std::vector<double> magnitude;
    std::vector<bool> negligible;

    std::vector<int> effective_clusters() const;
    // Deduplicated (vertex, direction) members of a cluster in sample order.
    std::vector<std::pair<std::size_t, Direction>> members(int cluster) const;
};

ActionClusterModel fit_action_clusters(const PerturbationDataset& d, int k, std::uint64_t seed,
                                       int restarts = 10);
ActionClusterModel prune_negligible(ActionClusterModel m, double tau = 0.05);
int assign(const ActionClusterModel& m, const std::vector<double>& feature);

struct ClusterReport {
    std::string assignments_csv;
    std::vector<std::pair<int, std::string>> mean_curves;  // effective clusters only
};

ClusterReport cluster_report(const ActionClusterModel& m, const PerturbationDataset& d,
                             const std::vector<double>& freqs);

std::string cluster_model_to_json(const ActionClusterModel& m);
ActionClusterModel cluster_model_from_json(const std::string& text);

}  // namespace mwrl
