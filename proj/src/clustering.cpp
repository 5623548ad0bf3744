#include "mwrl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
}

Matrix seed_plus_plus(const Matrix& x, int k, std::mt19937_64& rng) {
    Matrix c;
    c.push_back(x[pick_index(rng, x.size())]);
    std::vector<double> d2(x.size(), std::numeric_limits<double>::infinity());
    while (static_cast<int>(c.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            d2[i] = std::min(d2[i], squared_distance(x[i], c.back()));
            total += d2[i];
        }
        if (!(total > 0.0)) {
            c.push_back(x[pick_index(rng, x.size())]);
            continue;
        }
        const double target = uniform01(rng) * total;
        double run = 0.0;
        std::size_t chosen = x.size() - 1;
        for (std::size_t i = 0; i < x.size(); ++i) {
            run += d2[i];
            if (run > target && d2[i] > 0.0) {
                chosen = i;
                break;
            }
        }
        c.push_back(x[chosen]);
    }
    return c;
}

int nearest(const Matrix& c, const std::vector<double>& v) {
    int best = 0;
    double bd = squared_distance(c[0], v);
    for (int j = 1; j < static_cast<int>(c.size()); ++j) {
        const double d = squared_distance(c[static_cast<std::size_t>(j)], v);
        if (d < bd) {
            bd = d;
            best = j;
        }
    }
    return best;
}

void lloyd(const Matrix& x, Matrix& c, std::vector<int>& a, std::vector<double>& history, int max_iter) {
    const std::size_t dim = x[0].size();
    const int k = static_cast<int>(c.size());
    a.assign(x.size(), -1);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const int j = nearest(c, x[i]);
            if (j != a[i]) {
                a[i] = j;
                changed = true;
            }
        }
        if (!changed) break;
        std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
        Matrix sum(static_cast<std::size_t>(k), std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < x.size(); ++i) {
            auto& s = sum[static_cast<std::size_t>(a[i])];
            for (std::size_t d = 0; d < dim; ++d) s[d] += x[i][d];
            ++count[static_cast<std::size_t>(a[i])];
        }
        for (int j = 0; j < k; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            if (count[ju] == 0) continue;
            for (std::size_t d = 0; d < dim; ++d) c[ju][d] = sum[ju][d] / static_cast<double>(count[ju]);
        }
        for (int j = 0; j < k; ++j) {
            if (count[static_cast<std::size_t>(j)] != 0) continue;
            // Re-seed an empty cluster at the sample farthest from its own centroid.
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = squared_distance(x[i], c[static_cast<std::size_t>(a[i])]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            c[static_cast<std::size_t>(j)] = x[far];
        }
        history.push_back(kmeans_objective(x, c, a));
    }
}

}  // namespace

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double kmeans_objective(const Matrix& x, const Matrix& c, const std::vector<int>& a) {
    double j = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) j += squared_distance(x[i], c[static_cast<std::size_t>(a[i])]);
    return j;
}

KMeansResult kmeans(const Matrix& x, int k, std::uint64_t seed, int restarts, int max_iter) {
    if (x.empty()) throw UserError("k-means on an empty sample list");
    if (k < 1 || static_cast<std::size_t>(k) > x.size())
        throw UserError("k = " + std::to_string(k) + " is invalid for " + std::to_string(x.size()) + " samples");
    for (const auto& v : x)
        if (v.size() != x[0].size()) throw UserError("k-means samples differ in length");
    std::mt19937_64 rng(seed);
    KMeansResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (int r = 0; r < std::max(1, restarts); ++r) {
        Matrix c = seed_plus_plus(x, k, rng);
        std::vector<int> a;
        std::vector<double> hist;
        lloyd(x, c, a, hist, max_iter);
        const double j = kmeans_objective(x, c, a);
        best.histories.push_back(hist);
        if (j < best.objective) {
            best.objective = j;
            best.centroids = c;
            best.assignment = a;
        }
    }
    return best;
}

std::vector<double> sweep_db_vector(const SParamSweep& s, bool one_port) {
    std::vector<double> out;
    out.reserve(s.size() * (one_port ? 1 : 2));
    for (const auto& p : s.points) out.push_back(db_mag(p.s11));
    if (!one_port)
        for (const auto& p : s.points) out.push_back(db_mag(p.s21));
    return out;
}

PerturbationDataset gen_perturbation_dataset(const MeshModel& mesh, const Solver& solver,
                                             const std::vector<double>& deltas_mm,
                                             const std::vector<double>& freqs) {
    if (deltas_mm.empty()) throw UserError("no perturbation magnitudes");
    if (auto v = validate(mesh); !v.empty()) throw UserError("invalid seed mesh: " + describe(v));
    PerturbationDataset d;
    d.baseline = solver.sweep(mesh, freqs);
    const auto base = sweep_db_vector(d.baseline, solver.one_port());
    for (const auto& [vi, dir] : vertex_action_space(mesh)) {
        for (double delta : deltas_mm) {
            const VertexAction act{vi, dir, mm_to_um(delta)};
            const MeshModel moved = displace(mesh, act);
            if (!validate(moved).empty()) {
                ++d.rejected;
                continue;
            }
            SParamSweep s;
            try {
                s = solver.sweep(moved, freqs);
            } catch (const UserError&) {
                ++d.rejected;  // extraction refused the geometry
                continue;
            } catch (const std::exception& e) {
                std::ostringstream os;
                os << "solver failed for vertex " << vi << ' ' << direction_name(dir) << ' ' << delta
                   << " mm: " << e.what();
                throw DivergedError(os.str());
            }
            const auto pert = sweep_db_vector(s, solver.one_port());
            PerturbationSample smp{act, std::vector<double>(base.size())};
            for (std::size_t i = 0; i < base.size(); ++i) smp.feature[i] = base[i] - pert[i];
            d.samples.push_back(std::move(smp));
        }
    }
    return d;
}

void write_dataset_csv(const PerturbationDataset& d, std::ostream& out) {
    const std::size_t n = d.samples.empty() ? 0 : d.samples[0].feature.size();
    out << "vertex,direction,delta_mm";
    for (std::size_t i = 0; i < n; ++i) out << ",f_" << i;
    out << '\n' << std::setprecision(17);
    for (const auto& s : d.samples) {
        out << s.action.vertex << ',' << direction_name(s.action.direction) << ',' << um_to_mm(s.action.delta_um);
        for (double v : s.feature) out << ',' << v;
        out << '\n';
    }
}

std::vector<int> ActionClusterModel::effective_clusters() const {
    std::vector<int> out;
    for (int j = 0; j < k; ++j)
        if (!negligible[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
}

std::vector<std::pair<std::size_t, Direction>> ActionClusterModel::members(int cluster) const {
    std::vector<std::pair<std::size_t, Direction>> out;
    std::set<std::pair<std::size_t, int>> seen;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] != cluster) continue;
        const auto key = std::make_pair(actions[i].vertex, static_cast<int>(actions[i].direction));
        if (seen.insert(key).second) out.emplace_back(actions[i].vertex, actions[i].direction);
    }
    return out;
}

ActionClusterModel fit_action_clusters(const PerturbationDataset& d, int k, std::uint64_t seed, int restarts) {
    Matrix x;
    x.reserve(d.samples.size());
    for (const auto& s : d.samples) x.push_back(s.feature);
    const KMeansResult r = kmeans(x, k, seed, restarts);
    ActionClusterModel m;
    m.k = k;
    m.seed = seed;
    m.objective = r.objective;
    m.centroids = r.centroids;
    m.assignment = r.assignment;
    for (const auto& s : d.samples) m.actions.push_back(s.action);
    m.magnitude.assign(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto j = static_cast<std::size_t>(r.assignment[i]);
        m.magnitude[j] += std::sqrt(squared_distance(x[i], std::vector<double>(x[i].size(), 0.0)));
        ++count[j];
    }
    for (std::size_t j = 0; j < m.magnitude.size(); ++j)
        if (count[j]) m.magnitude[j] /= static_cast<double>(count[j]);
    m.negligible.assign(static_cast<std::size_t>(k), false);
    return m;
}

ActionClusterModel prune_negligible(ActionClusterModel m, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw UserError("pruning ratio must lie in (0, 1)");
    const double top = *std::max_element(m.magnitude.begin(), m.magnitude.end());
    if (!(top > 0.0)) throw UserError("no effective actions");
    m.tau = tau;
    for (std::size_t j = 0; j < m.magnitude.size(); ++j) m.negligible[j] = m.magnitude[j] < tau * top;
    return m;
}

int assign(const ActionClusterModel& m, const std::vector<double>& feature) {
    if (m.centroids.empty() || feature.size() != m.centroids[0].size())
        throw UserError("feature length does not match the cluster model");
    return nearest(m.centroids, feature);
}

ClusterReport cluster_report(const ActionClusterModel& m, const PerturbationDataset& d,
                             const std::vector<double>& freqs) {
    ClusterReport r;
    std::ostringstream a;
    a << "vertex,direction,delta_mm,cluster,flagged\n";
    for (std::size_t i = 0; i < m.assignment.size(); ++i) {
        const auto& act = m.actions[i];
        a << act.vertex << ',' << direction_name(act.direction) << ',' << um_to_mm(act.delta_um) << ','
          << m.assignment[i] << ',' << (m.negligible[static_cast<std::size_t>(m.assignment[i])] ? 1 : 0) << '\n';
    }
    r.assignments_csv = a.str();
    const std::size_t n = freqs.size();
    for (int j : m.effective_clusters()) {
        std::vector<double> curve(n, 0.0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < m.assignment.size(); ++i) {
            if (m.assignment[i] != j) continue;
            for (std::size_t f = 0; f < n; ++f) curve[f] += d.samples[i].feature[f];
            ++count;
        }
        std::ostringstream c;
        c << "frequency_hz,mean_delta_s11_db\n" << std::setprecision(17);
        for (std::size_t f = 0; f < n; ++f) c << freqs[f] << ',' << (count ? curve[f] / count : 0.0) << '\n';
        r.mean_curves.emplace_back(j, c.str());
    }
    return r;
}

std::string cluster_model_to_json(const ActionClusterModel& m) {
    nlohmann::ordered_json j;
    j["format"] = "mwrl-clusters-1";
    j["k"] = m.k;
    j["seed"] = m.seed;
    j["objective"] = m.objective;
    j["tau"] = m.tau;
    j["magnitude"] = m.magnitude;
    std::vector<int> neg;
    for (bool b : m.negligible) neg.push_back(b ? 1 : 0);
    j["negligible"] = neg;
    j["centroids"] = m.centroids;
    j["assignment"] = m.assignment;
    auto acts = nlohmann::ordered_json::array();
    for (const auto& a : m.actions)
        acts.push_back({a.vertex, direction_name(a.direction), a.delta_um});
    j["actions"] = acts;
    return j.dump() + "\n";
}

ActionClusterModel cluster_model_from_json(const std::string& text) {
    ActionClusterModel m;
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format") != "mwrl-clusters-1") throw UserError("unknown cluster model format");
        m.k = j.at("k").get<int>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.objective = j.at("objective").get<double>();
        m.tau = j.at("tau").get<double>();
        m.magnitude = j.at("magnitude").get<std::vector<double>>();
        for (int b : j.at("negligible").get<std::vector<int>>()) m.negligible.push_back(b != 0);
        m.centroids = j.at("centroids").get<Matrix>();
        m.assignment = j.at("assignment").get<std::vector<int>>();
        for (const auto& a : j.at("actions"))
            m.actions.push_back({a.at(0).get<std::size_t>(), parse_direction(a.at(1).get<std::string>()),
                                 a.at(2).get<std::int64_t>()});
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("cluster model JSON: ") + e.what());
    }
    if (static_cast<int>(m.centroids.size()) != m.k || m.negligible.size() != m.centroids.size() ||
        m.assignment.size() != m.actions.size())
        throw UserError("cluster model JSON: inconsistent sizes");
    return m;
}

}  // namespace mwrl
