#include "mwrl/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

using nlohmann::json;

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw UserError("config: '" + where + "' must be an object");
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw UserError("config: unknown key '" + where + "." + it.key() + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_override(json& root, const std::string& spec) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw UserError("override must look like key=value: " + spec);
    const std::string path = spec.substr(0, eq);
    const std::string text = spec.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &root;
    std::stringstream ss(path);
    std::vector<std::string> parts;
    for (std::string p; std::getline(ss, p, '.');) parts.push_back(p);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw UserError("override path is not an object: " + path);
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    (*node)[parts.back()] = value;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& base_dir,
                           const std::vector<std::string>& overrides) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw UserError(std::string("config: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(root, o);
    RunConfig rc;
    try {
        only_keys(root, "", {"task", "mesh", "surrogate", "grid_points", "clustering", "training", "reward", "output_dir"});
        const json& t = root.at("task");
        only_keys(t, "task", {"kind", "f0_ghz", "f1_ghz", "f2_ghz", "il_floor_db", "rl_ceiling_db", "size_bound_mm"});
        rc.task.kind = parse_circuit_kind(t.at("kind").get<std::string>());
        rc.task.f0 = t.at("f0_ghz").get<double>() * 1e9;
        rc.task.f1 = t.at("f1_ghz").get<double>() * 1e9;
        rc.task.f2 = t.at("f2_ghz").get<double>() * 1e9;
        read(t, "il_floor_db", rc.task.il_floor_db);
        read(t, "rl_ceiling_db", rc.task.rl_ceiling_db);
        if (t.contains("size_bound_mm") && !t.at("size_bound_mm").is_null())
            rc.task.size_bound_mm = t.at("size_bound_mm").get<std::array<double, 2>>();
        rc.task.check();

        const std::string mesh = root.at("mesh").get<std::string>();
        const std::filesystem::path mp(mesh);
        rc.mesh_path = mp.is_absolute() ? mesh : (std::filesystem::path(base_dir) / mp).lexically_normal().string();
        if (!std::filesystem::exists(rc.mesh_path)) throw UserError("mesh file not found: " + rc.mesh_path);

        rc.solver.kind = rc.task.kind;
        if (root.contains("surrogate")) {
            const json& s = root.at("surrogate");
            only_keys(s, "surrogate", {"er", "h_mm", "z_ref", "filter_map"});
            read(s, "er", rc.solver.material.er);
            read(s, "h_mm", rc.solver.material.h_mm);
            read(s, "z_ref", rc.solver.z_ref);
            if (s.contains("filter_map")) {
                const json& f = s.at("filter_map");
                only_keys(f, "surrogate.filter_map", {"k0", "g0_mm", "tap_base", "tap_slope", "w_nominal_mm", "bw_fraction"});
                auto& m = rc.solver.filter_map;
                read(f, "k0", m.k0);
                read(f, "g0_mm", m.g0_mm);
                read(f, "tap_base", m.tap_base);
                read(f, "tap_slope", m.tap_slope);
                read(f, "w_nominal_mm", m.w_nominal_mm);
                read(f, "bw_fraction", m.bw_fraction);
            }
        }
        if (!(rc.solver.material.er >= 1.0) || !(rc.solver.material.h_mm > 0.0) || !(rc.solver.z_ref > 0.0))
            throw UserError("config: invalid surrogate constants");
        read(root, "grid_points", rc.grid_points);
        if (rc.grid_points < 2) throw UserError("config: grid_points must be at least 2");

        if (root.contains("clustering")) {
            const json& c = root.at("clustering");
            only_keys(c, "clustering", {"k", "deltas_mm", "tau", "seed", "restarts"});
            read(c, "k", rc.clustering.k);
            read(c, "deltas_mm", rc.clustering.deltas_mm);
            read(c, "tau", rc.clustering.tau);
            read(c, "seed", rc.clustering.seed);
            read(c, "restarts", rc.clustering.restarts);
        }
        if (root.contains("training")) {
            const json& c = root.at("training");
            only_keys(c, "training", {"workers", "n_step", "gamma", "entropy_beta", "lr", "max_steps", "episode_cap",
                                      "delta_rl_mm", "seed", "raster_grid", "stop_on_success", "checkpoint_every"});
            auto& tc = rc.training;
            read(c, "workers", tc.workers);
            read(c, "n_step", tc.n_step);
            read(c, "gamma", tc.gamma);
            read(c, "entropy_beta", tc.entropy_beta);
            read(c, "lr", tc.lr);
            read(c, "max_steps", tc.max_steps);
            read(c, "episode_cap", tc.episode_cap);
            read(c, "delta_rl_mm", tc.delta_rl_mm);
            read(c, "seed", tc.seed);
            read(c, "raster_grid", tc.grid);
            read(c, "stop_on_success", tc.stop_on_success);
            read(c, "checkpoint_every", tc.checkpoint_every);
        }
        if (root.contains("reward")) {
            const json& c = root.at("reward");
            only_keys(c, "reward", {"beta1", "beta2", "beta3", "eps_hz", "success_bonus", "invalid_penalty"});
            auto& w = rc.reward;
            read(c, "beta1", w.beta1);
            read(c, "beta2", w.beta2);
            read(c, "beta3", w.beta3);
            read(c, "eps_hz", w.eps_hz);
            read(c, "success_bonus", w.success_bonus);
            read(c, "invalid_penalty", w.invalid_penalty);
            if (!(w.eps_hz > 0.0)) throw UserError("config: reward.eps_hz must be positive");
        }
        read(root, "output_dir", rc.output_dir);
    } catch (const json::exception& e) {
        throw UserError(std::string("config: ") + e.what());
    }
    rc.canonical = root.dump();
    return rc;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw UserError("cannot open config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path().string();
    return parse_run_config(ss.str(), dir.empty() ? "." : dir, overrides);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << v;
    return os.str();
}

}  // namespace mwrl
