#include "mwrl/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

constexpr double kPi = std::numbers::pi;
const cplx kJ{0.0, 1.0};

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

struct Pts {
    std::vector<double> x, y;
};

Pts points_mm(const MeshModel& m, const Polygon& p) {
    Pts out;
    for (auto i : p.indices) {
        out.x.push_back(um_to_mm(m.vertices[i].x));
        out.y.push_back(um_to_mm(m.vertices[i].y));
    }
    return out;
}

// Mean of the `count` largest (or smallest) values.
double extreme_mean(std::vector<double> v, std::size_t count, bool top) {
    std::sort(v.begin(), v.end());
    count = std::min(count, v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += top ? v[v.size() - 1 - i] : v[i];
    return s / static_cast<double>(count);
}

// Means of the coordinates on either side of the vertex-mean.
std::pair<double, double> half_means(const std::vector<double>& v) {
    const double c = mean(v);
    double lo = 0, hi = 0;
    int nlo = 0, nhi = 0;
    for (double x : v) {
        if (x < c) {
            lo += x;
            ++nlo;
        } else if (x > c) {
            hi += x;
            ++nhi;
        }
    }
    if (nlo == 0 || nhi == 0) throw UserError("degenerate polygon: zero extent");
    return {lo / nlo, hi / nhi};
}

SParamSweep make_sweep(const std::vector<double>& freqs, double z_ref) {
    SParamSweep s;
    s.frequencies = freqs;
    s.points.resize(freqs.size());
    s.z_ref = z_ref;
    for (std::size_t i = 0; i < freqs.size(); ++i) s.points[i].frequency = freqs[i];
    return s;
}

void check_freqs(const std::vector<double>& freqs) {
    for (double f : freqs)
        if (!(f > 0.0)) throw UserError("frequencies must be positive");
}

const Polygon& find_tag(const MeshModel& m, const std::string& tag) {
    const Polygon* hit = nullptr;
    for (const auto& p : m.polygons)
        if (p.tag == tag) {
            if (hit) throw UserError("mesh has more than one '" + tag + "' polygon");
            hit = &p;
        }
    if (!hit) throw UserError("mesh has no '" + tag + "' polygon");
    return *hit;
}

ResonatorGeometry resonator_geometry(const MeshModel& m, const Polygon& p) {
    const Pts pts = points_mm(m, p);
    ResonatorGeometry g;
    const double top = extreme_mean(pts.y, 2, true);
    const double bot = extreme_mean(pts.y, 2, false);
    g.length = top - bot;
    g.y_centre = 0.5 * (top + bot);
    std::tie(g.x_left, g.x_right) = half_means(pts.x);
    return g;
}

}  // namespace

Microstrip microstrip_params(double w, double h, double er) {
    if (!(w > 0.0) || !(h > 0.0)) throw UserError("microstrip dimensions must be positive");
    if (!(er >= 1.0)) throw UserError("relative permittivity must be at least 1");
    const double u = w / h;
    const double u4 = u * u * u * u;
    const double a = 1.0 + std::log((u4 + std::pow(u / 52.0, 2)) / (u4 + 0.432)) / 49.0 +
                     std::log(1.0 + std::pow(u / 18.1, 3)) / 18.7;
    const double b = 0.564 * std::pow((er - 0.9) / (er + 3.0), 0.053);
    const double eeff = (er + 1.0) / 2.0 + (er - 1.0) / 2.0 * std::pow(1.0 + 10.0 / u, -a * b);
    const double fu = 6.0 + (2.0 * kPi - 6.0) * std::exp(-std::pow(30.666 / u, 0.7528));
    const double z01 = kEta0 / (2.0 * kPi) * std::log(fu / u + std::sqrt(1.0 + 4.0 / (u * u)));
    return {z01 / std::sqrt(eeff), eeff};
}

SParamSweep tl_sweep(const std::vector<MicrostripSegment>& segments, const std::vector<double>& freqs,
                     double z_ref) {
    if (segments.empty()) throw UserError("no line segments");
    check_freqs(freqs);
    std::vector<Microstrip> lines;
    for (const auto& s : segments) {
        if (!(s.l_mm >= 0.0)) throw UserError("segment length must be non-negative");
        lines.push_back(microstrip_params(s.w_mm, s.h_mm, s.er));
    }
    SParamSweep out = make_sweep(freqs, z_ref);
    std::vector<Abcd> blocks(segments.size());
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        for (std::size_t i = 0; i < segments.size(); ++i) {
            const double theta = 2.0 * kPi * freqs[k] * std::sqrt(lines[i].eeff) * segments[i].l_mm * 1e-3 / kSpeedOfLight;
            const double c = std::cos(theta), s = std::sin(theta), z0 = lines[i].z0;
            blocks[i] = Abcd{c, kJ * z0 * s, kJ * s / z0, c};
        }
        const SMatrix s = abcd_to_s(abcd_cascade(blocks), z_ref);
        auto& p = out.points[k];
        p.s11 = s.s11;
        p.s21 = s.s21;
        p.s12 = s.s21;
        p.s22 = s.s22;
    }
    return out;
}

SParamSweep filter_sweep(const CoupledResonatorParams& p, const std::vector<double>& freqs) {
    if (!(p.f1 > 0 && p.f2 > 0 && p.f0 > 0 && p.bw > 0)) throw UserError("filter frequencies must be positive");
    if (!(p.m0 >= 0 && p.m1 >= 0 && p.m2 >= 0)) throw UserError("filter couplings must be non-negative");
    check_freqs(freqs);
    const double n = p.f0 / p.bw;
    auto lam = [&](double f) { return n * (f / p.f0 - p.f0 / f); };
    const double l1 = lam(p.f1), l2 = lam(p.f2);
    const double r1 = n * p.m0, r2 = n * p.m2, m = n * p.m1;
    SParamSweep out = make_sweep(freqs, 50.0);
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double l = lam(freqs[k]);
        const cplx a00 = cplx(l - l1, -r1);
        const cplx a11 = cplx(l - l2, -r2);
        const cplx det = a00 * a11 - m * m;
        if (std::abs(det) < 1e-300) {
            std::ostringstream os;
            os << "singular coupling matrix at " << freqs[k] << " Hz";
            throw DivergedError(os.str());
        }
        const cplx i00 = a11 / det, i11 = a00 / det, i10 = -m / det;
        auto& pt = out.points[k];
        pt.s21 = -2.0 * kJ * std::sqrt(r1 * r2) * i10;
        pt.s12 = pt.s21;
        pt.s11 = 1.0 + 2.0 * kJ * r1 * i00;
        pt.s22 = 1.0 + 2.0 * kJ * r2 * i11;
    }
    return out;
}

double patch_length_extension(double w, double h, double eeff) {
    const double u = w / h;
    return 0.412 * h * (eeff + 0.3) * (u + 0.264) / ((eeff - 0.258) * (u + 0.8));
}

double patch_resonance(const PatchParams& p) {
    const Microstrip ms = microstrip_params(p.w_mm, p.h_mm, p.er);
    const double le = p.l_mm + 2.0 * patch_length_extension(p.w_mm, p.h_mm, ms.eeff);
    return kSpeedOfLight / (2.0 * le * 1e-3 * std::sqrt(ms.eeff));
}

double slot_conductance(double w, double h, double f) {
    const double lambda0 = kSpeedOfLight / f * 1e3;
    const double k0h = 2.0 * kPi / lambda0 * h;
    return w / (120.0 * lambda0) * (1.0 - k0h * k0h / 24.0);
}

SParamSweep patch_sweep(const PatchParams& p, const std::vector<double>& freqs, double z_ref) {
    if (!(p.l_mm > 0 && p.w_mm > 0 && p.h_mm > 0 && p.wf_mm > 0))
        throw UserError("patch dimensions must be positive");
    if (!(p.lf_mm >= 0)) throw UserError("feed length must be non-negative");
    check_freqs(freqs);
    const Microstrip ms = microstrip_params(p.w_mm, p.h_mm, p.er);
    const Microstrip feed = microstrip_params(p.wf_mm, p.h_mm, p.er);
    const double le = p.l_mm + 2.0 * patch_length_extension(p.w_mm, p.h_mm, ms.eeff);
    const double x = p.feed_offset_mm;
    if (!(x >= 0.0 && x <= le)) throw UserError("feed offset outside the patch");
    const double y0 = 1.0 / ms.z0;
    SParamSweep out = make_sweep(freqs, z_ref);
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        const double f = freqs[k];
        const double g = slot_conductance(p.w_mm, p.h_mm, f);
        const double beta = 2.0 * kPi * f * std::sqrt(ms.eeff) / kSpeedOfLight * 1e-3;
        // Each side of the feed is a line terminated by its radiating slot.
        auto side = [&](double len) {
            const double t = std::tan(beta * len);
            return y0 * (g + kJ * y0 * t) / (y0 + kJ * g * t);
        };
        const cplx zl = 1.0 / (side(x) + side(le - x));
        const double bf = 2.0 * kPi * f * std::sqrt(feed.eeff) / kSpeedOfLight * 1e-3;
        const double t = std::tan(bf * p.lf_mm);
        const cplx z = feed.z0 * (zl + kJ * feed.z0 * t) / (feed.z0 + kJ * zl * t);
        auto& pt = out.points[k];
        pt.s11 = (z - z_ref) / (z + z_ref);
        pt.s21 = pt.s12 = pt.s22 = 0.0;
    }
    return out;
}

FilterGeometry filter_geometry(const MeshModel& mesh) {
    const Polygon& p1 = find_tag(mesh, "resonator-1");
    const Polygon& p2 = find_tag(mesh, "resonator-2");
    FilterGeometry g;
    g.r1 = resonator_geometry(mesh, p1);
    g.r2 = resonator_geometry(mesh, p2);
    g.gap = g.r2.x_left - g.r1.x_right;
    std::vector<Pts> feeds;
    for (const auto& p : mesh.polygons)
        if (p.tag == "feed") feeds.push_back(points_mm(mesh, p));
    if (feeds.empty()) throw UserError("filter mesh has no feed polygons");
    auto tap = [&](const ResonatorGeometry& r) {
        const double xc = 0.5 * (r.x_left + r.x_right);
        const Pts* best = nullptr;
        double best_d = INFINITY;
        for (const auto& f : feeds) {
            const double d = std::abs(mean(f.x) - xc);
            if (d < best_d) {
                best_d = d;
                best = &f;
            }
        }
        return std::abs(mean(best->y) - r.y_centre) / (0.5 * r.length);
    };
    g.tap1 = tap(g.r1);
    g.tap2 = tap(g.r2);
    return g;
}

CoupledResonatorParams extract_filter_params(const MeshModel& mesh, const Material& mat, const FilterMap& map) {
    std::size_t resonators = 0;
    for (const auto& p : mesh.polygons) resonators += p.tag.rfind("resonator", 0) == 0;
    if (resonators != 2) throw UserError("filter mesh must have exactly two resonator polygons");
    const FilterGeometry g = filter_geometry(mesh);
    if (!(g.gap > 0.0)) throw UserError("geometry collision");
    if (!(g.r1.length > 0.0) || !(g.r2.length > 0.0)) throw UserError("degenerate resonator length");
    const double eeff = microstrip_params(map.w_nominal_mm, mat.h_mm, mat.er).eeff;
    CoupledResonatorParams p;
    p.f1 = kSpeedOfLight / (2.0 * g.r1.length * 1e-3 * std::sqrt(eeff));
    p.f2 = kSpeedOfLight / (2.0 * g.r2.length * 1e-3 * std::sqrt(eeff));
    p.m1 = map.k0 * std::exp(-g.gap / map.g0_mm);
    p.m0 = map.tap_base + map.tap_slope * g.tap1;
    p.m2 = map.tap_base + map.tap_slope * g.tap2;
    p.f0 = std::sqrt(p.f1 * p.f2);
    p.bw = map.bw_fraction * p.f0;
    return p;
}

PatchGeometry patch_geometry(const MeshModel& mesh) {
    const Pts patch = points_mm(mesh, find_tag(mesh, "patch"));
    const Pts feed = points_mm(mesh, find_tag(mesh, "feed"));
    PatchGeometry g;
    const auto [pl, pr] = half_means(patch.x);
    g.l = pr - pl;
    g.w = extreme_mean(patch.y, 2, true) - extreme_mean(patch.y, 2, false);
    // Joint vertices: the feed vertices in the top tenth of its height. The
    // width is read from the remaining side vertices.
    const double ymax = *std::max_element(feed.y.begin(), feed.y.end());
    const double ymin = *std::min_element(feed.y.begin(), feed.y.end());
    const double cut = ymax - 0.1 * (ymax - ymin);
    std::vector<double> side_x;
    for (std::size_t i = 0; i < feed.x.size(); ++i)
        if (feed.y[i] < cut) side_x.push_back(feed.x[i]);
    const auto [fl, fr] = half_means(side_x);
    g.wf = fr - fl;
    double jx = 0, jy = 0;
    int nj = 0;
    for (std::size_t i = 0; i < feed.x.size(); ++i)
        if (feed.y[i] >= cut) {
            jx += feed.x[i];
            jy += feed.y[i];
            ++nj;
        }
    g.lf = jy / nj - extreme_mean(feed.y, 2, false);
    g.inset = jx / nj - pl;
    return g;
}

PatchParams extract_patch_params(const MeshModel& mesh, const Material& mat) {
    const PatchGeometry g = patch_geometry(mesh);
    PatchParams p;
    p.l_mm = g.l;
    p.w_mm = g.w;
    p.h_mm = mat.h_mm;
    p.er = mat.er;
    p.wf_mm = g.wf;
    p.lf_mm = g.lf;
    if (!(g.l > 0 && g.w > 0 && g.wf > 0 && g.lf >= 0)) throw UserError("degenerate patch geometry");
    const double eeff = microstrip_params(g.w, mat.h_mm, mat.er).eeff;
    p.feed_offset_mm = g.inset + patch_length_extension(g.w, mat.h_mm, eeff);
    return p;
}

std::vector<MicrostripSegment> extract_line_segments(const MeshModel& mesh, const Material& mat) {
    std::vector<std::pair<double, MicrostripSegment>> segs;
    for (const auto& p : mesh.polygons) {
        if (p.tag != "line-segment") continue;
        const Pts pts = points_mm(mesh, p);
        MicrostripSegment s;
        s.w_mm = extreme_mean(pts.y, 2, true) - extreme_mean(pts.y, 2, false);
        s.l_mm = extreme_mean(pts.x, 2, true) - extreme_mean(pts.x, 2, false);
        s.h_mm = mat.h_mm;
        s.er = mat.er;
        segs.emplace_back(*std::min_element(pts.x.begin(), pts.x.end()), s);
    }
    if (segs.empty()) throw UserError("line mesh has no line-segment polygons");
    std::stable_sort(segs.begin(), segs.end(), [](auto& a, auto& b) { return a.first < b.first; });
    std::vector<MicrostripSegment> out;
    for (auto& s : segs) out.push_back(s.second);
    return out;
}

CircuitKind parse_circuit_kind(const std::string& s) {
    if (s == "filter") return CircuitKind::Filter;
    if (s == "line") return CircuitKind::Line;
    if (s == "antenna") return CircuitKind::Antenna;
    throw UserError("unknown circuit kind '" + s + "'");
}

const char* circuit_kind_name(CircuitKind k) {
    switch (k) {
        case CircuitKind::Filter: return "filter";
        case CircuitKind::Line: return "line";
        case CircuitKind::Antenna: return "antenna";
    }
    return "?";
}

SParamSweep Solver::sweep(const MeshModel& mesh, const std::vector<double>& freqs) const {
    switch (kind) {
        case CircuitKind::Filter: return filter_sweep(extract_filter_params(mesh, material, filter_map), freqs);
        case CircuitKind::Line: return tl_sweep(extract_line_segments(mesh, material), freqs, z_ref);
        case CircuitKind::Antenna: return patch_sweep(extract_patch_params(mesh, material), freqs, z_ref);
    }
    throw UserError("unknown circuit kind");
}

std::vector<double> default_grid(double f0, int points) {
    if (points < 2) throw UserError("frequency grid needs at least two points");
    std::vector<double> g(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = f0 * (0.5 + static_cast<double>(i) / (points - 1));
    return g;
}

}  // namespace mwrl
