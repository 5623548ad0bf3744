#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mwrl {

// Coordinates are stored as integer micrometres so that a move followed by
// its inverse restores the mesh bit-for-bit.
struct Point {
    std::int64_t x = 0;
    std::int64_t y = 0;
    bool operator==(const Point&) const = default;
};

std::int64_t mm_to_um(double mm);
inline double um_to_mm(std::int64_t um) { return static_cast<double>(um) / 1000.0; }

struct Polygon {
    std::string tag;
    std::vector<std::size_t> indices;
    bool operator==(const Polygon&) const = default;
};

struct MeshModel {
    std::vector<Point> vertices;
    std::vector<Polygon> polygons;
    std::vector<bool> movable;
    std::optional<std::array<std::int64_t, 2>> bound;  // (L, W) extent limit in um

    std::size_t movable_count() const;
    bool operator==(const MeshModel&) const = default;
};

enum class Direction { Up = 0, Down = 1, Left = 2, Right = 3 };
constexpr std::array<Direction, 4> kDirections{Direction::Up, Direction::Down, Direction::Left,
                                               Direction::Right};
const char* direction_name(Direction d);
Direction parse_direction(const std::string& s);
Point direction_step(Direction d, std::int64_t delta_um);

struct VertexAction {
    std::size_t vertex = 0;
    Direction direction = Direction::Up;
    std::int64_t delta_um = 0;
};

struct Violation {
    std::string kind;  // "self-intersection", "geometry collision", "bound violation", "structure"
    std::vector<std::size_t> polygons;
    std::vector<std::size_t> items;  // edge indices or vertex indices depending on kind
    std::string detail;
};

std::string describe(const std::vector<Violation>& v);

class RejectedAction : public std::runtime_error {
public:
    RejectedAction(std::vector<Violation> v);
    const std::vector<Violation>& violations() const { return violations_; }

private:
    std::vector<Violation> violations_;
};

std::vector<Violation> validate(const MeshModel& mesh);

// Displaces one vertex without validating; throws std::invalid_argument for
// non-movable or out-of-range vertices.
MeshModel displace(const MeshModel& mesh, const VertexAction& a);
MeshModel apply_action(const MeshModel& mesh, const VertexAction& a);

std::vector<std::pair<std::size_t, Direction>> vertex_action_space(const MeshModel& mesh);

struct Frame {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // mm
};

// Bounding box of all polygon vertices grown by 10% of its extent on every side.
Frame default_frame(const MeshModel& mesh);

struct Grid {
    int size = 0;
    std::vector<double> cells;  // row-major, row 0 at the lowest y
    double at(int row, int col) const { return cells[static_cast<std::size_t>(row * size + col)]; }
    int count() const;
};

Grid rasterize(const MeshModel& mesh, int g = 32);
Grid rasterize(const MeshModel& mesh, const Frame& frame, int g = 32);

// Even-odd test on doubles; boundary points may fall either way.
bool point_in_polygon(const MeshModel& mesh, const Polygon& poly, double x_mm, double y_mm);

MeshModel load_mesh(const std::string& path);
MeshModel mesh_from_json_text(const std::string& text);
std::string mesh_to_json_text(const MeshModel& mesh);
void save_mesh(const MeshModel& mesh, const std::string& path);

}  // namespace mwrl
