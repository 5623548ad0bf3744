#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "mwrl/clustering.hpp"
#include "mwrl/config.hpp"
#include "mwrl/errors.hpp"
#include "mwrl/mesh.hpp"
#include "mwrl/nn.hpp"
#include "mwrl/pipeline.hpp"
#include "mwrl/rl.hpp"
#include "mwrl/sparams.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace mwrl;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    bool baseline = false;
    bool resume = false;
    std::string report_dir;
};

void write_text(const fs::path& p, const std::string& text) {
    const fs::path tmp = p.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw IoError("cannot write " + p.string());
        f << text;
        if (!f) throw IoError("write failed: " + p.string());
    }
    std::error_code ec;
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw UserError("cannot read " + p.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

RunConfig load(const Options& o) {
    if (o.config.empty()) throw UserError("--config is required");
    auto sets = o.sets;
    if (o.seed) sets.push_back("training.seed=" + std::to_string(*o.seed));
    return load_run_config(o.config, sets);
}

fs::path prepare_out(const Options& o, const RunConfig& rc) {
    const std::string dir = !o.out.empty() ? o.out : rc.output_dir;
    if (dir.empty()) throw UserError("no output directory (use --out or output_dir)");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw IoError("output directory not writable: " + dir);
    }
    fs::remove(probe, ec);
    return dir;
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& rc, const ordered_json& extra) {
    ordered_json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config_hash"] = hex64(fnv1a64(rc.canonical));
    m["mesh"] = rc.mesh_path;
    m["seeds"] = {{"training", rc.training.seed}, {"clustering", rc.clustering.seed}};
    for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

std::string sweep_csv(const SParamSweep& s) {
    std::ostringstream os;
    write_sweep_csv(s, os);
    return os.str();
}

std::string sweep_s2p(const SParamSweep& s) {
    std::ostringstream os;
    write_touchstone(s, os);
    return os.str();
}

int cmd_simulate(const Options& o) {
    const RunConfig rc = load(o);
    const MeshModel mesh = load_seed_mesh(rc);
    const fs::path dir = prepare_out(o, rc);
    const SParamSweep s = rc.solver.sweep(mesh, rc.freqs());
    write_text(dir / "sweep.s2p", sweep_s2p(s));
    write_text(dir / "sweep.csv", sweep_csv(s));
    write_manifest(dir, "simulate", rc, {});
    std::cout << "wrote " << (dir / "sweep.s2p").string() << " and sweep.csv\n";
    return 0;
}

int cmd_dataset(const Options& o) {
    const RunConfig rc = load(o);
    const MeshModel mesh = load_seed_mesh(rc);
    const fs::path dir = prepare_out(o, rc);
    const auto d = gen_perturbation_dataset(mesh, rc.solver, rc.clustering.deltas_mm, rc.freqs());
    std::ostringstream os;
    write_dataset_csv(d, os);
    write_text(dir / "dataset.csv", os.str());
    write_manifest(dir, "dataset", rc, {{"samples", d.samples.size()}, {"rejected", d.rejected}});
    std::cout << d.samples.size() << " samples, " << d.rejected << " rejected\n";
    return 0;
}

void write_cluster_outputs(const fs::path& dir, const RunConfig& rc, const ClusterRun& cr) {
    std::ostringstream ds;
    write_dataset_csv(cr.dataset, ds);
    write_text(dir / "dataset.csv", ds.str());
    write_text(dir / "clusters.json", cluster_model_to_json(cr.model));
    const auto rep = cluster_report(cr.model, cr.dataset, rc.freqs());
    write_text(dir / "cluster_assignments.csv", rep.assignments_csv);
    for (const auto& [id, csv] : rep.mean_curves)
        write_text(dir / ("cluster_" + std::to_string(id) + "_mean_s11.csv"), csv);
}

int cmd_cluster(const Options& o) {
    const RunConfig rc = load(o);
    const MeshModel mesh = load_seed_mesh(rc);
    const fs::path dir = prepare_out(o, rc);
    const ClusterRun cr = cluster_pipeline(rc, mesh);
    write_cluster_outputs(dir, rc, cr);
    const auto eff = cr.model.effective_clusters();
    ordered_json summary;
    summary["k"] = cr.model.k;
    summary["effective_clusters"] = eff;
    summary["effective_count"] = eff.size();
    summary["magnitude"] = cr.model.magnitude;
    write_text(dir / "cluster_summary.json", summary.dump(2) + "\n");
    write_manifest(dir, "cluster", rc, {{"samples", cr.dataset.samples.size()}, {"effective_clusters", eff.size()}});
    std::cout << "effective clusters: " << eff.size() << " of " << cr.model.k << "\n";
    for (int j = 0; j < cr.model.k; ++j)
        std::cout << "  cluster " << j << ": magnitude " << cr.model.magnitude[static_cast<std::size_t>(j)]
                  << (cr.model.negligible[static_cast<std::size_t>(j)] ? " (negligible)" : "") << "\n";
    return 0;
}

int cmd_train(const Options& o) {
    const RunConfig rc = load(o);
    const MeshModel mesh = load_seed_mesh(rc);
    const fs::path dir = prepare_out(o, rc);

    std::vector<MemberList> actions;
    if (o.baseline) {
        actions = vertex_action_set(mesh);
    } else {
        const ClusterRun cr = cluster_pipeline(rc, mesh);
        write_cluster_outputs(dir, rc, cr);
        actions = cluster_action_set(cr.model);
    }

    std::optional<ResumeState> resume;
    if (o.resume) {
        ResumeState st;
        checkpoint_from_json(read_text(dir / "checkpoint.json"), st.net, st.optimizer, st.global_step);
        resume = std::move(st);
        std::cout << "resuming from step " << resume->global_step << "\n";
    }

    ordered_json extra;
    extra["mode"] = o.baseline ? "vertex-baseline" : "cluster";
    extra["policy_size"] = actions.size();
    extra["workers"] = rc.training.workers;
    write_manifest(dir, "train", rc, extra);

    auto hook = [&](const PolicyValueNet& net, const RmsProp& opt, std::uint64_t step) {
        write_text(dir / "checkpoint.json", checkpoint_to_json(net, opt, step));
    };
    const TrainResult r =
        train_actions(rc.training, rc.task, mesh, rc.solver, rc.freqs(), rc.reward, actions, resume, hook);

    std::ostringstream curve;
    write_curve_csv(r.curve, curve);
    write_text(dir / "learning_curve.csv", curve.str());
    write_text(dir / "best_mesh.json", mesh_to_json_text(r.best_mesh));
    write_text(dir / "best_sweep.s2p", sweep_s2p(r.best_sweep));

    const BandMeasurement m = measure_band(r.best_sweep, rc.task.kind);
    ordered_json s;
    s["success"] = r.success;
    if (r.success) s["success_step"] = r.success_step;
    s["steps"] = r.steps;
    s["episodes"] = r.curve.size();
    s["policy_size"] = r.policy_size;
    s["best_reward"] = r.best_reward;
    s["task"] = {{"kind", circuit_kind_name(rc.task.kind)}, {"f0_hz", rc.task.f0}, {"f1_hz", rc.task.f1},
                 {"f2_hz", rc.task.f2}, {"il_floor_db", rc.task.il_floor_db}, {"rl_ceiling_db", rc.task.rl_ceiling_db}};
    s["best"] = {{"f0_hz", m.f0}, {"f1_hz", m.f1}, {"f2_hz", m.f2}, {"passband_rl_db", m.passband_rl_db},
                 {"passband_il_db", m.passband_il_db}, {"band_loss_db", mean_band_loss(r.best_sweep, rc.task)},
                 {"meets_thresholds", task_success(r.best_sweep, rc.task)}};
    write_text(dir / "train_summary.json", s.dump(2) + "\n");
    std::cout << (r.success ? "success at step " + std::to_string(r.success_step) : std::string("no success"))
              << " after " << r.steps << " steps\n";
    return 0;
}

int cmd_report(const Options& o) {
    const fs::path dir = o.report_dir.empty() ? fs::path(o.out) : fs::path(o.report_dir);
    if (dir.empty() || !fs::is_directory(dir)) throw UserError("report needs an existing run directory");
    if (!fs::exists(dir / "train_summary.json")) throw UserError("no train_summary.json in " + dir.string());
    const auto s = nlohmann::json::parse(read_text(dir / "train_summary.json"));
    ordered_json r;
    r["success"] = s.at("success");
    if (s.contains("success_step")) r["steps_to_success"] = s.at("success_step");
    r["steps"] = s.at("steps");
    r["task"] = s.at("task");
    r["achieved"] = s.at("best");
    if (fs::exists(dir / "learning_curve.csv")) {
        std::istringstream in(read_text(dir / "learning_curve.csv"));
        std::string line;
        std::getline(in, line);
        std::vector<std::string> rows;
        while (std::getline(in, line))
            if (!line.empty()) rows.push_back(line);
        r["episodes"] = rows.size();
        const std::size_t tail = std::min<std::size_t>(rows.size(), 10);
        r["final_curve"] = std::vector<std::string>(rows.end() - static_cast<std::ptrdiff_t>(tail), rows.end());
    }
    write_text(dir / "report.json", r.dump(2) + "\n");
    std::cout << r.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh-based microwave circuit design with clustered actions and actor-critic learning"};
    app.require_subcommand(1);
    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "run configuration JSON");
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--seed", o.seed, "training seed override");
        sub->add_option("--set", o.sets, "key=value override, dotted keys (repeatable)");
    };
    auto* sim = app.add_subcommand("simulate", "sweep the seed mesh");
    auto* ds = app.add_subcommand("dataset", "differential S-parameter dataset");
    auto* cl = app.add_subcommand("cluster", "dataset, k-means and pruning");
    auto* tr = app.add_subcommand("train", "train the actor-critic agent");
    auto* rp = app.add_subcommand("report", "summarize a training run directory");
    for (auto* s : {sim, ds, cl, tr}) add_common(s);
    tr->add_flag("--baseline", o.baseline, "use raw vertex actions");
    tr->add_flag("--resume", o.resume, "continue from checkpoint.json in the output directory");
    rp->add_option("dir", o.report_dir, "run directory");
    rp->add_option("--out", o.out, "run directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    try {
        if (*sim) return cmd_simulate(o);
        if (*ds) return cmd_dataset(o);
        if (*cl) return cmd_cluster(o);
        if (*tr) return cmd_train(o);
        if (*rp) return cmd_report(o);
    } catch (const DivergedError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const UserError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const RejectedAction& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
