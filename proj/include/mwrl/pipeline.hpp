#pragma once

#include "mwrl/clustering.hpp"
#include "mwrl/config.hpp"
#include "mwrl/mesh.hpp"

namespace mwrl {

struct ClusterRun {
    PerturbationDataset dataset;
    ActionClusterModel model;
};

// Dataset generation, k-means and pruning as configured.
ClusterRun cluster_pipeline(const RunConfig& rc, const MeshModel& mesh);

// Loads and validates the configured seed mesh; invalid meshes raise UserError with the violation list.
MeshModel load_seed_mesh(const RunConfig& rc);

}  // namespace mwrl
