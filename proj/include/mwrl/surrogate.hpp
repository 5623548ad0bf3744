#pragma once

#include <string>
#include <vector>

#include "mwrl/mesh.hpp"
#include "mwrl/sparams.hpp"

namespace mwrl {

constexpr double kSpeedOfLight = 299792458.0;
constexpr double kEta0 = 376.730313668;

struct Material {
    double er = 12.9;
    double h_mm = 0.5;
};

struct Microstrip {
    double z0 = 0.0;
    double eeff = 1.0;
};

Microstrip microstrip_params(double w_mm, double h_mm, double er);

struct MicrostripSegment {
    double w_mm = 0.0;
    double l_mm = 0.0;
    double h_mm = 0.5;
    double er = 12.9;
};

SParamSweep tl_sweep(const std::vector<MicrostripSegment>& segments, const std::vector<double>& freqs,
                     double z_ref = 50.0);

struct CoupledResonatorParams {
    double f1 = 0.0, f2 = 0.0;  // Hz
    double m0 = 0.0, m1 = 0.0, m2 = 0.0;
    double bw = 0.0, f0 = 0.0;  // Hz
};

SParamSweep filter_sweep(const CoupledResonatorParams& p, const std::vector<double>& freqs);

struct PatchParams {
    double l_mm = 0.0;
    double w_mm = 0.0;
    double h_mm = 0.5;
    double er = 12.9;
    double wf_mm = 0.0;
    double lf_mm = 0.0;
    // Feed position along the resonant length, measured from the effective
    // open end (so 0 is an edge feed).
    double feed_offset_mm = 0.0;
};

double patch_length_extension(double w_mm, double h_mm, double eeff);
double patch_resonance(const PatchParams& p);
double slot_conductance(double w_mm, double h_mm, double f_hz);
SParamSweep patch_sweep(const PatchParams& p, const std::vector<double>& freqs, double z_ref = 50.0);

// Geometric readings of the seed-style meshes; these are the ground truth the
// clustering semantics are checked against.
struct ResonatorGeometry {
    double length = 0.0;  // mm, y extent between the two topmost and two bottommost vertices
    double y_centre = 0.0;
    double x_left = 0.0;  // mean x of vertices left of the vertex-mean x
    double x_right = 0.0;
};

struct FilterGeometry {
    ResonatorGeometry r1, r2;
    double gap = 0.0;
    double tap1 = 0.0, tap2 = 0.0;  // normalized tap offsets
};

struct FilterMap {
    double k0 = 0.4;
    double g0_mm = 2.0;
    double tap_base = 0.18;
    double tap_slope = 0.08;
    double w_nominal_mm = 1.5;
    double bw_fraction = 0.1;
};

FilterGeometry filter_geometry(const MeshModel& mesh);
CoupledResonatorParams extract_filter_params(const MeshModel& mesh, const Material& mat, const FilterMap& map = {});

struct PatchGeometry {
    double l = 0.0, w = 0.0;
    double wf = 0.0, lf = 0.0;
    double inset = 0.0;  // feed joint centre minus patch left edge
};

PatchGeometry patch_geometry(const MeshModel& mesh);
PatchParams extract_patch_params(const MeshModel& mesh, const Material& mat);

std::vector<MicrostripSegment> extract_line_segments(const MeshModel& mesh, const Material& mat);

enum class CircuitKind { Filter, Line, Antenna };
CircuitKind parse_circuit_kind(const std::string& s);
const char* circuit_kind_name(CircuitKind k);

struct Solver {
    CircuitKind kind = CircuitKind::Filter;
    Material material;
    FilterMap filter_map;
    double z_ref = 50.0;

    SParamSweep sweep(const MeshModel& mesh, const std::vector<double>& freqs) const;
    bool one_port() const { return kind == CircuitKind::Antenna; }
};

// 101 points from 0.5 f0 to 1.5 f0; f0 itself is index 50.
std::vector<double> default_grid(double f0, int points = 101);

}  // namespace mwrl
