// One line per criterion: "criterion N: PASS|FAIL <detail>". Exit status is
// non-zero when any selected criterion fails.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "mwrl/clustering.hpp"
#include "mwrl/config.hpp"
#include "mwrl/errors.hpp"
#include "mwrl/nn.hpp"
#include "mwrl/pipeline.hpp"
#include "mwrl/rl.hpp"
#include "mwrl/sparams.hpp"
#include "mwrl/surrogate.hpp"

#ifndef MWRL_SOURCE_DIR
#define MWRL_SOURCE_DIR "."
#endif

using namespace mwrl;
using Clock = std::chrono::steady_clock;

namespace {

const std::string kRoot = MWRL_SOURCE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

// 1: losslessness and reciprocity of the line and filter surrogates.
Outcome criterion1() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    bool reciprocal = true;
    auto check = [&](const SParamSweep& s) {
        for (const auto& p : s.points) {
            worst = std::max(worst, std::abs(std::norm(p.s11) + std::norm(p.s21) - 1.0));
            worst = std::max(worst, std::abs(std::norm(p.s22) + std::norm(p.s12) - 1.0));
            reciprocal = reciprocal && p.s12 == p.s21;
        }
    };
    for (int t = 0; t < 1000; ++t) {
        std::vector<MicrostripSegment> segs(1 + rng() % 5);
        for (auto& s : segs) s = {0.05 + 3.0 * u(rng), 0.2 + 10.0 * u(rng), 0.2 + u(rng), 2.0 + 11.0 * u(rng)};
        check(tl_sweep(segs, default_grid(1e9 + 19e9 * u(rng)), 20.0 + 80.0 * u(rng)));

        CoupledResonatorParams p;
        p.f1 = 2e9 + 18e9 * u(rng);
        p.f2 = p.f1 * (0.8 + 0.4 * u(rng));
        p.m0 = 0.01 + u(rng);
        p.m1 = u(rng);
        p.m2 = 0.01 + u(rng);
        p.f0 = std::sqrt(p.f1 * p.f2);
        p.bw = (0.01 + 0.3 * u(rng)) * p.f0;
        check(filter_sweep(p, default_grid(p.f0)));
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-9 && reciprocal && secs < 10.0,
            "2000 sweeps (1000 line, 1000 filter), max | |s11|^2+|s21|^2-1 | = " + fmt(worst) +
                ", s12==s21 " + (reciprocal ? "exact" : "VIOLATED") + ", " + fmt(secs) + " s"};
}

// 2: analytic A3C gradient against finite differences on a reduced network.
Outcome criterion2() {
    const auto t0 = Clock::now();
    NetConfig cfg;
    cfg.grid = 8;
    cfg.svec = 32;  // 16-point sweep, s11 and s21
    cfg.actions = 4;
    cfg.f1_out = 64;
    cfg.f2_hidden1 = 64;
    cfg.f2_hidden2 = 32;
    cfg.head_hidden = 32;
    PolicyValueNet net(cfg);
    Normal rnd(2024);
    net.init_orthogonal(5);
    // Non-zero biases so every bias gradient is exercised.
    for (int b = kConv1B; b < kBlockCount; b += 2)
        for (Eigen::Index i = 0; i < net.params()[b].size(); ++i) net.params()[b].data()[i] = 0.1 * rnd();
    NetInput in;
    in.grid.resize(64);
    for (int i = 0; i < 64; ++i) in.grid(i) = rnd.uniform() < 0.4 ? 1.0 : 0.0;
    in.svec.resize(32);
    for (int i = 0; i < 32; ++i) in.svec(i) = 0.5 + 0.3 * rnd();

    ForwardCache base;
    net.forward(in, base);
    const int action = 2;
    const double ret = base.value + 1.3, beta = 0.01;
    const double adv = ret - base.value;
    Grads g = net.zero_grads();
    a3c_backward(net, base, action, ret, beta, g);

    auto loss = [&](const ForwardCache& c) {
        const double h = -(c.pi.array() * c.logp.array()).sum();
        return -c.logp(action) * adv - beta * h + 0.5 * (ret - c.value) * (ret - c.value);
    };
    auto stage_of = [](int b) {
        if (b <= kConv1B) return Stage::Conv1;
        if (b <= kConv2B) return Stage::Conv2;
        if (b <= kF1B) return Stage::F1;
        if (b <= kF2aB) return Stage::F2a;
        if (b <= kF2bB) return Stage::F2b;
        return Stage::Heads;
    };
    auto masks = [](const ForwardCache& c) {
        std::vector<bool> m;
        for (Eigen::Index i = 0; i < c.z1.size(); ++i) m.push_back(c.z1.data()[i] > 0.0);
        for (Eigen::Index i = 0; i < c.z2.size(); ++i) m.push_back(c.z2.data()[i] > 0.0);
        return m;
    };
    const auto base_masks = masks(base);

    const double steps[] = {1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5};
    std::size_t checked = 0, failed = 0, unresolved = 0;
    double worst = 0.0;
    std::string worst_at;
    for (int b = 0; b < kBlockCount; ++b) {
        auto& p = net.params()[b];
        const Stage st = stage_of(b);
        for (Eigen::Index i = 0; i < p.size(); ++i) {
            const double keep = p.data()[i];
            auto eval = [&](double x, bool& kink) {
                p.data()[i] = x;
                ForwardCache c = base;
                net.forward_from(st, c);
                if (st <= Stage::Conv2 && masks(c) != base_masks) kink = true;
                return loss(c);
            };
            std::vector<double> est;
            for (double h : steps) {
                bool kink = false;
                const double fp1 = eval(keep + h, kink), fm1 = eval(keep - h, kink);
                const double fp2 = eval(keep + 2 * h, kink), fm2 = eval(keep - 2 * h, kink);
                est.push_back(kink ? NAN : (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h));
            }
            p.data()[i] = keep;
            // Take the estimate where successive step sizes agree best.
            double fd = NAN, best = INFINITY;
            for (std::size_t k = 0; k + 1 < est.size(); ++k)
                if (std::isfinite(est[k]) && std::isfinite(est[k + 1]) && std::abs(est[k] - est[k + 1]) < best) {
                    best = std::abs(est[k] - est[k + 1]);
                    fd = est[k + 1];
                }
            const double an = g[b].data()[i];
            if (!(std::abs(an) > 1e-8)) continue;
            ++checked;
            if (!std::isfinite(fd)) {
                ++unresolved;
                continue;
            }
            const double rel = std::abs(an - fd) / std::max(std::abs(an), std::abs(fd));
            if (rel > worst) {
                worst = rel;
                worst_at = std::string(block_name(b)) + "[" + std::to_string(i) + "]";
            }
            failed += rel >= 1e-4;
        }
    }
    const double secs = seconds_since(t0);
    return {failed == 0 && unresolved == 0 && checked > 0 && secs < 60.0,
            std::to_string(checked) + " of " + std::to_string(net.parameter_count()) +
                " parameters with |grad| > 1e-8, max relative error " + fmt(worst) + " at " + worst_at + ", " +
                std::to_string(failed) + " over 1e-4, " + std::to_string(unresolved) + " unresolved, " + fmt(secs) + " s"};
}

double exhaustive_two_means(const Matrix& x) {
    const std::size_t n = x.size(), d = x[0].size();
    double best = INFINITY;
    for (std::uint32_t mask = 2; mask + 1 < (1u << n); mask += 2) {
        double j = 0.0;
        for (std::uint32_t side = 0; side < 2; ++side) {
            std::vector<double> c(d, 0.0);
            int cnt = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1u) == side) {
                    for (std::size_t f = 0; f < d; ++f) c[f] += x[i][f];
                    ++cnt;
                }
            for (auto& v : c) v /= cnt;
            for (std::size_t i = 0; i < n; ++i)
                if (((mask >> i) & 1u) == side) j += squared_distance(x[i], c);
        }
        best = std::min(best, j);
    }
    return best;
}

// 3: k-means against exhaustive enumeration on small instances.
Outcome criterion3() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(303);
    std::normal_distribution<double> g(0.0, 1.0);
    int optimal = 0;
    bool monotone = true;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 4 + rng() % 9, d = 1 + rng() % 4;
        Matrix x(n, std::vector<double>(d));
        for (auto& r : x)
            for (auto& v : r) v = g(rng);
        const KMeansResult r = kmeans(x, 2, 1000 + static_cast<std::uint64_t>(t), 10);
        const double best = exhaustive_two_means(x);
        optimal += std::abs(r.objective - best) <= 1e-9 * std::max(1.0, best);
        for (const auto& h : r.histories)
            for (std::size_t i = 1; i < h.size(); ++i) monotone = monotone && h[i] <= h[i - 1] + 1e-12;
    }
    const double secs = seconds_since(t0);
    return {optimal >= 45 && monotone && secs < 30.0,
            std::to_string(optimal) + "/50 instances at the exhaustive optimum, J non-increasing " +
                (monotone ? "in all" : "VIOLATED") + ", " + fmt(secs) + " s"};
}

// Ground-truth label of one action: which geometric parameter it moves most.
using Labeler = std::function<std::string(const MeshModel& before, const MeshModel& after)>;

struct PurityReport {
    int negligible = 0;
    int effective = 0;
    std::size_t majority = 0, labelled = 0;
    std::map<std::string, int> cluster_labels;  // majority label -> count of clusters
    std::string table;
};

PurityReport purity(const ClusterRun& cr, const MeshModel& mesh, const Labeler& label) {
    PurityReport rep;
    const auto& m = cr.model;
    std::vector<std::map<std::string, std::size_t>> counts(static_cast<std::size_t>(m.k));
    for (std::size_t i = 0; i < m.actions.size(); ++i) {
        const MeshModel after = apply_action(mesh, m.actions[i]);
        ++counts[static_cast<std::size_t>(m.assignment[i])][label(mesh, after)];
    }
    std::ostringstream tab;
    for (int c = 0; c < m.k; ++c) {
        const auto& cc = counts[static_cast<std::size_t>(c)];
        tab << " [" << c << (m.negligible[static_cast<std::size_t>(c)] ? " negligible" : "") << ":";
        for (const auto& [k, v] : cc) tab << " " << k << "=" << v;
        tab << "]";
        if (m.negligible[static_cast<std::size_t>(c)]) {
            ++rep.negligible;
            continue;
        }
        ++rep.effective;
        std::size_t top = 0, total = 0;
        std::string top_label;
        for (const auto& [k, v] : cc) {
            total += v;
            if (v > top) {
                top = v;
                top_label = k;
            }
        }
        rep.majority += top;
        rep.labelled += total;
        ++rep.cluster_labels[top_label];
    }
    rep.table = tab.str();
    return rep;
}

std::string filter_label(const MeshModel& a, const MeshModel& b) {
    const FilterGeometry ga = filter_geometry(a), gb = filter_geometry(b);
    const double dl = std::abs(gb.r1.length - ga.r1.length) + std::abs(gb.r2.length - ga.r2.length);
    const double dg = std::abs(gb.gap - ga.gap);
    if (dl == 0.0 && dg == 0.0) return "other";
    return dl >= dg ? "length" : "gap";
}

std::string patch_label(const MeshModel& a, const MeshModel& b) {
    const PatchGeometry ga = patch_geometry(a), gb = patch_geometry(b);
    const double dl = std::abs(gb.l - ga.l);
    const double df = std::abs(gb.wf - ga.wf) + std::abs(gb.lf - ga.lf) + std::abs(gb.inset - ga.inset);
    if (dl == 0.0 && df == 0.0) return "other";
    return dl >= df ? "length" : "feed";
}

// 4: structure of the filter action clusters.
Outcome criterion4() {
    const auto t0 = Clock::now();
    const RunConfig rc = load_run_config(kRoot + "/configs/task1_filter.json");
    const MeshModel mesh = load_seed_mesh(rc);
    const ClusterRun cr = cluster_pipeline(rc, mesh);
    const PurityReport rep = purity(cr, mesh, filter_label);
    const double pur = rep.labelled ? static_cast<double>(rep.majority) / static_cast<double>(rep.labelled) : 0.0;
    const bool both = rep.cluster_labels.count("length") && rep.cluster_labels.count("gap");
    const double secs = seconds_since(t0);
    return {rep.negligible == 1 && rep.effective == 4 && both && pur >= 0.9 && secs < 120.0,
            std::to_string(mesh.movable_count()) + " movable vertices, " + std::to_string(rep.negligible) +
                " negligible, " + std::to_string(rep.effective) + " effective, purity " + fmt(100.0 * pur, 4) +
                "%," + rep.table + ", " + fmt(secs) + " s"};
}

struct SeedRuns {
    int successes = 0;
    double max_secs = 0.0;
    std::string detail;
};

SeedRuns run_seeds(const std::string& config, bool baseline, bool stop_on_success) {
    const RunConfig rc = load_run_config(kRoot + "/configs/" + config);
    const MeshModel mesh = load_seed_mesh(rc);
    std::vector<MemberList> actions;
    if (baseline) {
        actions = vertex_action_set(mesh);
    } else {
        actions = cluster_action_set(cluster_pipeline(rc, mesh).model);
    }
    SeedRuns out;
    std::ostringstream os;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig tc = rc.training;
        tc.seed = seed;
        tc.workers = 1;
        tc.max_steps = 20000;
        tc.stop_on_success = stop_on_success;
        const auto t0 = Clock::now();
        const TrainResult r = train_actions(tc, rc.task, mesh, rc.solver, rc.freqs(), rc.reward, actions);
        const double secs = seconds_since(t0);
        out.max_secs = std::max(out.max_secs, secs);
        out.successes += r.success;
        os << " seed " << seed << ": " << (r.success ? "step " + std::to_string(r.success_step) : std::string("none"))
           << " (" << fmt(secs) << " s)";
    }
    out.detail = os.str();
    return out;
}

// 5: cluster agent on the two filter tasks.
Outcome criterion5() {
    const SeedRuns a = run_seeds("task1_filter.json", false, true);
    const SeedRuns b = run_seeds("task3_filter.json", false, true);
    const bool ok = a.successes >= 3 && b.successes >= 3 && a.max_secs < 900.0 && b.max_secs < 900.0;
    return {ok, "task 1 " + std::to_string(a.successes) + "/5 [" + a.detail + " ], task 3 " +
                    std::to_string(b.successes) + "/5 [" + b.detail + " ]"};
}

// 6: the raw vertex baseline under the same budget.
Outcome criterion6() {
    const SeedRuns agent = run_seeds("task1_filter.json", false, true);
    const SeedRuns base = run_seeds("task1_filter.json", true, false);
    return {base.successes == 0 && agent.successes >= 3,
            "baseline " + std::to_string(base.successes) + "/5 [" + base.detail + " ], cluster agent " +
                std::to_string(agent.successes) + "/5"};
}

// 7: patch antenna task and its cluster purity.
Outcome criterion7() {
    const RunConfig rc = load_run_config(kRoot + "/configs/patch_antenna.json");
    const MeshModel mesh = load_seed_mesh(rc);
    const PurityReport rep = purity(cluster_pipeline(rc, mesh), mesh, patch_label);
    const double pur = rep.labelled ? static_cast<double>(rep.majority) / static_cast<double>(rep.labelled) : 0.0;
    const bool both = rep.cluster_labels.count("length") && rep.cluster_labels.count("feed");
    const SeedRuns runs = run_seeds("patch_antenna.json", false, true);
    return {runs.successes >= 3 && pur >= 0.9 && both,
            std::to_string(runs.successes) + "/5 reach s11 <= -20 dB at 7.35 GHz [" + runs.detail +
                " ], length/feed purity " + fmt(100.0 * pur, 4) + "%," + rep.table};
}

std::string curve_text(const TrainResult& r) {
    std::ostringstream os;
    write_curve_csv(r.curve, os, false);
    return os.str();
}

// 8: determinism of training and clustering, Touchstone precision.
Outcome criterion8() {
    const RunConfig rc = load_run_config(kRoot + "/configs/task1_filter.json");
    const MeshModel mesh = load_seed_mesh(rc);
    const std::string m1 = cluster_model_to_json(cluster_pipeline(rc, mesh).model);
    const ClusterRun cr = cluster_pipeline(rc, mesh);
    const std::string m2 = cluster_model_to_json(cr.model);
    const auto actions = cluster_action_set(cr.model);
    TrainConfig tc = rc.training;
    tc.max_steps = 1500;
    tc.stop_on_success = false;
    const TrainResult a = train_actions(tc, rc.task, mesh, rc.solver, rc.freqs(), rc.reward, actions);
    const TrainResult b = train_actions(tc, rc.task, mesh, rc.solver, rc.freqs(), rc.reward, actions);
    const bool curves = curve_text(a) == curve_text(b) && !a.curve.empty();
    const bool ckpt = checkpoint_to_json(a.net, a.optimizer, a.steps) == checkpoint_to_json(b.net, b.optimizer, b.steps);
    const bool models = m1 == m2;

    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        SParamSweep s;
        s.z_ref = 50.0;
        double f = 1e8 * (1.0 + std::abs(u(rng)));
        const std::size_t n = 2 + rng() % 50;
        for (std::size_t i = 0; i < n; ++i) {
            f += 1e7 * (0.001 + std::abs(u(rng)));
            SParamPoint p;
            p.frequency = f;
            const double scale = std::pow(10.0, -6.0 * std::abs(u(rng)));
            p.s11 = {scale * u(rng), scale * u(rng)};
            p.s21 = {u(rng), u(rng)};
            p.s12 = {u(rng), u(rng)};
            p.s22 = {scale * u(rng), u(rng)};
            s.frequencies.push_back(f);
            s.points.push_back(p);
        }
        std::stringstream io;
        write_touchstone(s, io);
        const SParamSweep r = read_touchstone(io);
        auto rel = [](double x, double y) { return x == y ? 0.0 : std::abs(x - y) / std::max(std::abs(x), std::abs(y)); };
        if (r.size() != s.size()) worst = INFINITY;
        for (std::size_t i = 0; i < std::min(r.size(), s.size()); ++i) {
            const auto& p = s.points[i];
            const auto& q = r.points[i];
            worst = std::max({worst, rel(r.frequencies[i], s.frequencies[i]), rel(q.s11.real(), p.s11.real()),
                              rel(q.s11.imag(), p.s11.imag()), rel(q.s21.real(), p.s21.real()),
                              rel(q.s21.imag(), p.s21.imag()), rel(q.s12.real(), p.s12.real()),
                              rel(q.s12.imag(), p.s12.imag()), rel(q.s22.real(), p.s22.real()),
                              rel(q.s22.imag(), p.s22.imag())});
        }
    }
    const bool touchstone = worst < 5e-10;
    return {curves && ckpt && models && touchstone,
            std::string("learning curves ") + (curves ? "identical" : "DIFFER") + ", checkpoints " +
                (ckpt ? "identical" : "DIFFER") + ", cluster models " + (models ? "identical" : "DIFFER") +
                ", Touchstone worst relative error " + fmt(worst) + " over 1000 sweeps (9 digits needs < 5e-10)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance checks"};
    int only = 0;
    app.add_option("--only", only, "run a single criterion (1-8)")->check(CLI::Range(1, 8));
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::function<Outcome()>> all{criterion1, criterion2, criterion3, criterion4,
                                                     criterion5, criterion6, criterion7, criterion8};
    bool ok = true;
    for (int i = 1; i <= 8; ++i) {
        if (only && only != i) continue;
        Outcome o;
        try {
            o = all[static_cast<std::size_t>(i - 1)]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        std::cout << "criterion " << i << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail << std::endl;
        ok = ok && o.pass;
    }
    return ok ? 0 : 1;
}
