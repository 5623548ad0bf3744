#include "mwrl/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mwrl/errors.hpp"

namespace mwrl {

namespace {

using i128 = __int128;

int orient(const Point& a, const Point& b, const Point& c) {
    const i128 v = static_cast<i128>(b.x - a.x) * (c.y - a.y) - static_cast<i128>(b.y - a.y) * (c.x - a.x);
    return (v > 0) - (v < 0);
}

bool within(const Point& a, const Point& b, const Point& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool on_segment(const Point& a, const Point& b, const Point& p) {
    return orient(a, b, p) == 0 && within(a, b, p);
}

bool segments_touch(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
    return (o1 == 0 && within(a, b, c)) || (o2 == 0 && within(a, b, d)) ||
           (o3 == 0 && within(c, d, a)) || (o4 == 0 && within(c, d, b));
}

bool segments_cross_properly(const Point& a, const Point& b, const Point& c, const Point& d) {
    const int o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
    return o1 * o2 < 0 && o3 * o4 < 0;
}

std::vector<Point> ring(const MeshModel& m, const Polygon& poly, std::int64_t scale = 1) {
    std::vector<Point> r;
    r.reserve(poly.indices.size());
    for (auto i : poly.indices) r.push_back({m.vertices[i].x * scale, m.vertices[i].y * scale});
    return r;
}

// 1 strictly inside, 0 on boundary, -1 outside. Exact integer arithmetic.
int locate(const std::vector<Point>& r, const Point& p) {
    bool inside = false;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = r[i];
        const Point& b = r[(i + 1) % n];
        if (on_segment(a, b, p)) return 0;
        if ((a.y > p.y) != (b.y > p.y)) {
            const int o = orient(a, b, p);
            if ((b.y > a.y && o > 0) || (b.y < a.y && o < 0)) inside = !inside;
        }
    }
    return inside ? 1 : -1;
}

void self_check(const MeshModel& m, std::size_t pi, std::vector<Violation>& out) {
    const auto r = ring(m, m.polygons[pi]);
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (r[i] == r[(i + 1) % n]) {
            out.push_back({"self-intersection", {pi}, {i, (i + 1) % n}, "zero-length edge"});
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = r[i];
        const Point& b = r[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point& c = r[j];
            const Point& d = r[(j + 1) % n];
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            if (adjacent) {
                // Shared vertex is expected; a fold-back along the same line is not.
                const Point& shared = (j == i + 1) ? b : a;
                const Point& p = (j == i + 1) ? a : b;
                const Point& q = (j == i + 1) ? d : c;
                if (orient(p, shared, q) == 0) {
                    const i128 dot = static_cast<i128>(p.x - shared.x) * (q.x - shared.x) +
                                     static_cast<i128>(p.y - shared.y) * (q.y - shared.y);
                    if (dot > 0) out.push_back({"self-intersection", {pi}, {i, j}, "collinear overlap"});
                }
                continue;
            }
            if (segments_touch(a, b, c, d)) out.push_back({"self-intersection", {pi}, {i, j}, "edges cross"});
        }
    }
}

bool interiors_overlap(const MeshModel& m, const Polygon& pa, const Polygon& pb) {
    const auto a = ring(m, pa, 2);
    const auto b = ring(m, pb, 2);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            if (segments_cross_properly(a[i], a[(i + 1) % a.size()], b[j], b[(j + 1) % b.size()]))
                return true;
    auto probe = [](const std::vector<Point>& src, const std::vector<Point>& dst) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            const Point& p = src[i];
            const Point& q = src[(i + 1) % src.size()];
            if (locate(dst, p) > 0) return true;
            if (locate(dst, Point{(p.x + q.x) / 2, (p.y + q.y) / 2}) > 0) return true;
        }
        return false;
    };
    if (probe(a, b) || probe(b, a)) return true;
    // Coincident outlines: no strict containment anywhere, but one interior point decides.
    auto same = a;
    auto other = b;
    std::sort(same.begin(), same.end(), [](auto& l, auto& r) { return l.x < r.x || (l.x == r.x && l.y < r.y); });
    std::sort(other.begin(), other.end(), [](auto& l, auto& r) { return l.x < r.x || (l.x == r.x && l.y < r.y); });
    return same == other;
}

}  // namespace

std::int64_t mm_to_um(double mm) { return std::llround(mm * 1000.0); }

std::size_t MeshModel::movable_count() const {
    return static_cast<std::size_t>(std::count(movable.begin(), movable.end(), true));
}

const char* direction_name(Direction d) {
    switch (d) {
        case Direction::Up: return "up";
        case Direction::Down: return "down";
        case Direction::Left: return "left";
        case Direction::Right: return "right";
    }
    return "?";
}

Direction parse_direction(const std::string& s) {
    for (auto d : kDirections)
        if (s == direction_name(d)) return d;
    throw UserError("unknown direction '" + s + "'");
}

Point direction_step(Direction d, std::int64_t delta_um) {
    switch (d) {
        case Direction::Up: return {0, delta_um};
        case Direction::Down: return {0, -delta_um};
        case Direction::Left: return {-delta_um, 0};
        case Direction::Right: return {delta_um, 0};
    }
    return {0, 0};
}

std::string describe(const std::vector<Violation>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << "; ";
        os << v[i].kind;
        if (!v[i].polygons.empty()) {
            os << " polygons";
            for (auto p : v[i].polygons) os << ' ' << p;
        }
        if (!v[i].items.empty()) {
            os << " items";
            for (auto p : v[i].items) os << ' ' << p;
        }
        if (!v[i].detail.empty()) os << " (" << v[i].detail << ")";
    }
    return os.str();
}

RejectedAction::RejectedAction(std::vector<Violation> v)
    : std::runtime_error("rejected action: " + describe(v)), violations_(std::move(v)) {}

std::vector<Violation> validate(const MeshModel& mesh) {
    std::vector<Violation> out;
    if (mesh.movable.size() != mesh.vertices.size())
        out.push_back({"structure", {}, {}, "movable flag count differs from vertex count"});
    for (std::size_t pi = 0; pi < mesh.polygons.size(); ++pi) {
        const auto& p = mesh.polygons[pi];
        if (p.indices.size() < 3) {
            out.push_back({"structure", {pi}, {}, "polygon with fewer than 3 vertices"});
            continue;
        }
        bool ok = true;
        for (auto i : p.indices)
            if (i >= mesh.vertices.size()) {
                out.push_back({"structure", {pi}, {i}, "vertex index out of range"});
                ok = false;
            }
        if (ok) self_check(mesh, pi, out);
    }
    if (!out.empty()) return out;
    for (std::size_t i = 0; i < mesh.polygons.size(); ++i)
        for (std::size_t j = i + 1; j < mesh.polygons.size(); ++j) {
            if (mesh.polygons[i].tag == mesh.polygons[j].tag) continue;
            if (interiors_overlap(mesh, mesh.polygons[i], mesh.polygons[j]))
                out.push_back({"geometry collision", {i, j}, {}, mesh.polygons[i].tag + " overlaps " + mesh.polygons[j].tag});
        }
    if (mesh.bound && !mesh.vertices.empty()) {
        std::int64_t x0 = INT64_MAX, y0 = INT64_MAX, x1 = INT64_MIN, y1 = INT64_MIN;
        for (const auto& p : mesh.polygons)
            for (auto i : p.indices) {
                x0 = std::min(x0, mesh.vertices[i].x);
                x1 = std::max(x1, mesh.vertices[i].x);
                y0 = std::min(y0, mesh.vertices[i].y);
                y1 = std::max(y1, mesh.vertices[i].y);
            }
        if (x1 - x0 > (*mesh.bound)[0] || y1 - y0 > (*mesh.bound)[1]) {
            std::ostringstream os;
            os << "extent " << um_to_mm(x1 - x0) << " x " << um_to_mm(y1 - y0) << " mm exceeds "
               << um_to_mm((*mesh.bound)[0]) << " x " << um_to_mm((*mesh.bound)[1]) << " mm";
            out.push_back({"bound violation", {}, {}, os.str()});
        }
    }
    return out;
}

MeshModel displace(const MeshModel& mesh, const VertexAction& a) {
    if (a.vertex >= mesh.vertices.size()) throw std::invalid_argument("vertex index out of range");
    if (!mesh.movable[a.vertex])
        throw std::invalid_argument("vertex " + std::to_string(a.vertex) + " is not movable");
    if (a.delta_um <= 0) throw std::invalid_argument("action magnitude must be positive");
    MeshModel out = mesh;
    const Point s = direction_step(a.direction, a.delta_um);
    out.vertices[a.vertex].x += s.x;
    out.vertices[a.vertex].y += s.y;
    return out;
}

MeshModel apply_action(const MeshModel& mesh, const VertexAction& a) {
    MeshModel out = displace(mesh, a);
    auto v = validate(out);
    if (!v.empty()) throw RejectedAction(std::move(v));
    return out;
}

std::vector<std::pair<std::size_t, Direction>> vertex_action_space(const MeshModel& mesh) {
    std::vector<std::pair<std::size_t, Direction>> out;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i)
        if (mesh.movable[i])
            for (auto d : kDirections) out.emplace_back(i, d);
    return out;
}

Frame default_frame(const MeshModel& mesh) {
    double x0 = INFINITY, y0 = INFINITY, x1 = -INFINITY, y1 = -INFINITY;
    for (const auto& p : mesh.polygons)
        for (auto i : p.indices) {
            x0 = std::min(x0, um_to_mm(mesh.vertices[i].x));
            x1 = std::max(x1, um_to_mm(mesh.vertices[i].x));
            y0 = std::min(y0, um_to_mm(mesh.vertices[i].y));
            y1 = std::max(y1, um_to_mm(mesh.vertices[i].y));
        }
    if (!(x1 > x0) || !(y1 > y0)) throw UserError("degenerate bounding box");
    const double mx = 0.1 * (x1 - x0), my = 0.1 * (y1 - y0);
    return {x0 - mx, y0 - my, x1 + mx, y1 + my};
}

int Grid::count() const {
    int n = 0;
    for (double c : cells) n += c > 0.5;
    return n;
}

bool point_in_polygon(const MeshModel& mesh, const Polygon& poly, double x, double y) {
    bool inside = false;
    const std::size_t n = poly.indices.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = um_to_mm(mesh.vertices[poly.indices[i]].x), yi = um_to_mm(mesh.vertices[poly.indices[i]].y);
        const double xj = um_to_mm(mesh.vertices[poly.indices[j]].x), yj = um_to_mm(mesh.vertices[poly.indices[j]].y);
        if ((yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

Grid rasterize(const MeshModel& mesh, int g) { return rasterize(mesh, default_frame(mesh), g); }

Grid rasterize(const MeshModel& mesh, const Frame& f, int g) {
    if (g < 8) throw UserError("raster grid must be at least 8");
    if (!(f.x1 > f.x0) || !(f.y1 > f.y0)) throw UserError("degenerate bounding box");
    Grid grid;
    grid.size = g;
    grid.cells.assign(static_cast<std::size_t>(g) * g, 0.0);
    const double dx = (f.x1 - f.x0) / g, dy = (f.y1 - f.y0) / g;
    for (int r = 0; r < g; ++r) {
        const double y = f.y0 + (r + 0.5) * dy;
        for (int c = 0; c < g; ++c) {
            const double x = f.x0 + (c + 0.5) * dx;
            for (const auto& p : mesh.polygons)
                if (point_in_polygon(mesh, p, x, y)) {
                    grid.cells[static_cast<std::size_t>(r * g + c)] = 1.0;
                    break;
                }
        }
    }
    return grid;
}

MeshModel mesh_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("mesh JSON: ") + e.what());
    }
    if (!j.is_object()) throw UserError("mesh JSON: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "vertices" && it.key() != "polygons" && it.key() != "movable" && it.key() != "bound")
            throw UserError("mesh JSON: unknown key '" + it.key() + "'");
    MeshModel m;
    try {
        for (const auto& v : j.at("vertices")) {
            if (v.size() != 2) throw UserError("mesh JSON: vertex must be [x, y]");
            const double x = v[0].get<double>(), y = v[1].get<double>();
            const auto xu = mm_to_um(x), yu = mm_to_um(y);
            if (std::abs(x * 1000.0 - xu) > 1e-6 || std::abs(y * 1000.0 - yu) > 1e-6)
                throw UserError("mesh JSON: coordinate off the micrometre grid");
            m.vertices.push_back({xu, yu});
        }
        for (const auto& p : j.at("polygons"))
            m.polygons.push_back({p.at("tag").get<std::string>(), p.at("indices").get<std::vector<std::size_t>>()});
        if (j.contains("movable")) {
            for (const auto& b : j.at("movable")) m.movable.push_back(b.get<bool>());
        } else {
            m.movable.assign(m.vertices.size(), false);
        }
        if (j.contains("bound") && !j.at("bound").is_null()) {
            const auto b = j.at("bound").get<std::vector<double>>();
            if (b.size() != 2) throw UserError("mesh JSON: bound must be [L, W]");
            m.bound = std::array<std::int64_t, 2>{mm_to_um(b[0]), mm_to_um(b[1])};
        }
    } catch (const nlohmann::json::exception& e) {
        throw UserError(std::string("mesh JSON: ") + e.what());
    }
    if (m.movable.size() != m.vertices.size()) throw UserError("mesh JSON: movable flag count differs from vertex count");
    for (const auto& p : m.polygons)
        for (auto i : p.indices)
            if (i >= m.vertices.size()) throw UserError("mesh JSON: vertex index out of range");
    return m;
}

std::string mesh_to_json_text(const MeshModel& m) {
    nlohmann::ordered_json j;
    j["vertices"] = nlohmann::ordered_json::array();
    for (const auto& v : m.vertices) j["vertices"].push_back({um_to_mm(v.x), um_to_mm(v.y)});
    j["polygons"] = nlohmann::ordered_json::array();
    for (const auto& p : m.polygons) j["polygons"].push_back({{"tag", p.tag}, {"indices", p.indices}});
    j["movable"] = nlohmann::ordered_json::array();
    for (bool b : m.movable) j["movable"].push_back(b);
    if (m.bound) j["bound"] = {um_to_mm((*m.bound)[0]), um_to_mm((*m.bound)[1])};
    else j["bound"] = nullptr;
    return j.dump(1) + "\n";
}

MeshModel load_mesh(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw UserError("cannot open mesh file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return mesh_from_json_text(ss.str());
}

void save_mesh(const MeshModel& mesh, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << mesh_to_json_text(mesh);
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace mwrl
