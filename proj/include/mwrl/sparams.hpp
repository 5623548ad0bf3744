#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

namespace mwrl {

using cplx = std::complex<double>;

struct Abcd {
    cplx a{1.0, 0.0};
    cplx b{0.0, 0.0};
    cplx c{0.0, 0.0};
    cplx d{1.0, 0.0};
};

Abcd operator*(const Abcd& l, const Abcd& r);

struct SParamPoint {
    double frequency = 0.0;
    cplx s11, s12, s21, s22;
};

struct SParamSweep {
    std::vector<double> frequencies;
    std::vector<SParamPoint> points;
    double z_ref = 50.0;

    std::size_t size() const { return points.size(); }
    // Throws UserError when frequencies are not strictly increasing or sizes disagree.
    void check() const;
};

struct SMatrix {
    cplx s11, s12, s21, s22;
};

Abcd abcd_cascade(const std::vector<Abcd>& blocks);
SMatrix abcd_to_s(const Abcd& m, double z_ref = 50.0);

constexpr double kDbFloor = -200.0;
double db_mag(cplx x, double floor_db = kDbFloor);

void write_touchstone(const SParamSweep& sweep, std::ostream& out);
SParamSweep read_touchstone(std::istream& in);
void write_touchstone_file(const SParamSweep& sweep, const std::string& path);
SParamSweep read_touchstone_file(const std::string& path);

void write_sweep_csv(const SParamSweep& sweep, std::ostream& out);

}  // namespace mwrl
