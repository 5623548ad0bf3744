#include "mwrl/pipeline.hpp"

#include "mwrl/errors.hpp"

namespace mwrl {

MeshModel load_seed_mesh(const RunConfig& rc) {
    MeshModel m = load_mesh(rc.mesh_path);
    if (rc.task.size_bound_mm)
        m.bound = std::array<std::int64_t, 2>{mm_to_um((*rc.task.size_bound_mm)[0]), mm_to_um((*rc.task.size_bound_mm)[1])};
    if (auto v = validate(m); !v.empty()) throw UserError("invalid mesh " + rc.mesh_path + ": " + describe(v));
    return m;
}

ClusterRun cluster_pipeline(const RunConfig& rc, const MeshModel& mesh) {
    ClusterRun r;
    r.dataset = gen_perturbation_dataset(mesh, rc.solver, rc.clustering.deltas_mm, rc.freqs());
    if (r.dataset.samples.empty()) throw UserError("no accepted perturbation samples");
    if (rc.clustering.k > static_cast<int>(r.dataset.samples.size()))
        throw UserError("k = " + std::to_string(rc.clustering.k) + " exceeds the sample count " +
                        std::to_string(r.dataset.samples.size()));
    r.model = fit_action_clusters(r.dataset, rc.clustering.k, rc.clustering.seed, rc.clustering.restarts);
    r.model = prune_negligible(std::move(r.model), rc.clustering.tau);
    return r;
}

}  // namespace mwrl
