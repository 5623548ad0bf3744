#include "mwrl/sparams.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mwrl/errors.hpp"

namespace mwrl {

Abcd operator*(const Abcd& l, const Abcd& r) {
    return Abcd{l.a * r.a + l.b * r.c, l.a * r.b + l.b * r.d,
                l.c * r.a + l.d * r.c, l.c * r.b + l.d * r.d};
}

void SParamSweep::check() const {
    if (frequencies.size() != points.size())
        throw UserError("sweep has " + std::to_string(frequencies.size()) + " frequencies but " +
                        std::to_string(points.size()) + " points");
    if (points.size() < 2) throw UserError("sweep needs at least two points");
    for (std::size_t i = 1; i < frequencies.size(); ++i)
        if (!(frequencies[i] > frequencies[i - 1]))
            throw UserError("sweep frequencies not strictly increasing at index " + std::to_string(i));
}

Abcd abcd_cascade(const std::vector<Abcd>& blocks) {
    if (blocks.empty()) throw UserError("empty cascade");
    Abcd acc = blocks.front();
    for (std::size_t i = 1; i < blocks.size(); ++i) acc = acc * blocks[i];
    return acc;
}

SMatrix abcd_to_s(const Abcd& m, double z_ref) {
    if (!(z_ref > 0.0)) throw UserError("reference impedance must be positive");
    const cplx den = m.a + m.b / z_ref + m.c * z_ref + m.d;
    if (std::abs(den) < 1e-300) throw UserError("degenerate network");
    SMatrix s;
    s.s11 = (m.a + m.b / z_ref - m.c * z_ref - m.d) / den;
    s.s21 = 2.0 / den;
    s.s12 = 2.0 * (m.a * m.d - m.b * m.c) / den;
    s.s22 = (-m.a + m.b / z_ref - m.c * z_ref + m.d) / den;
    return s;
}

double db_mag(cplx x, double floor_db) {
    const double mag = std::abs(x);
    if (mag == 0.0) return floor_db;
    return std::max(20.0 * std::log10(mag), floor_db);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return s;
}

}  // namespace

void write_touchstone(const SParamSweep& sweep, std::ostream& out) {
    sweep.check();
    out << "! two-port S-parameters, real/imaginary\n";
    out << "# GHZ S RI R " << std::setprecision(17) << sweep.z_ref << "\n";
    out << std::setprecision(17);
    for (const auto& p : sweep.points) {
        out << p.frequency / 1e9 << ' ' << p.s11.real() << ' ' << p.s11.imag() << ' '
            << p.s21.real() << ' ' << p.s21.imag() << ' ' << p.s12.real() << ' '
            << p.s12.imag() << ' ' << p.s22.real() << ' ' << p.s22.imag() << '\n';
    }
}

SParamSweep read_touchstone(std::istream& in) {
    SParamSweep sweep;
    double scale = 0.0;
    bool have_header = false;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('!'));
        line = trim(line);
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (have_header) throw ParseError(line_no, "duplicate option line");
            std::istringstream hs(upper(line.substr(1)));
            std::vector<std::string> tok;
            for (std::string t; hs >> t;) tok.push_back(t);
            if (tok.size() != 5) throw ParseError(line_no, "malformed header, expected '# GHZ S RI R <z>'");
            if (tok[0] == "GHZ") scale = 1e9;
            else if (tok[0] == "MHZ") scale = 1e6;
            else if (tok[0] == "KHZ") scale = 1e3;
            else if (tok[0] == "HZ") scale = 1.0;
            else throw ParseError(line_no, "malformed header, unknown frequency unit " + tok[0]);
            if (tok[1] != "S") throw ParseError(line_no, "malformed header, only S parameters supported");
            if (tok[2] != "RI") throw ParseError(line_no, "malformed header, only RI format supported");
            if (tok[3] != "R") throw ParseError(line_no, "malformed header, missing R");
            try {
                sweep.z_ref = std::stod(tok[4]);
            } catch (const std::exception&) {
                throw ParseError(line_no, "malformed header, bad reference impedance");
            }
            if (!(sweep.z_ref > 0.0)) throw ParseError(line_no, "malformed header, bad reference impedance");
            have_header = true;
            continue;
        }
        if (!have_header) throw ParseError(line_no, "data before option line");
        std::istringstream ls(line);
        std::vector<double> v;
        for (std::string t; ls >> t;) {
            try {
                std::size_t used = 0;
                v.push_back(std::stod(t, &used));
                if (used != t.size()) throw std::invalid_argument(t);
            } catch (const std::exception&) {
                throw ParseError(line_no, "not a number: " + t);
            }
        }
        if (v.size() != 9)
            throw ParseError(line_no, "wrong column count " + std::to_string(v.size()) + ", expected 9");
        SParamPoint p;
        p.frequency = v[0] * scale;
        p.s11 = {v[1], v[2]};
        p.s21 = {v[3], v[4]};
        p.s12 = {v[5], v[6]};
        p.s22 = {v[7], v[8]};
        if (!sweep.frequencies.empty() && !(p.frequency > sweep.frequencies.back()))
            throw ParseError(line_no, "non-monotone frequency");
        sweep.frequencies.push_back(p.frequency);
        sweep.points.push_back(p);
    }
    if (!have_header) throw ParseError(line_no, "missing option line");
    if (sweep.points.size() < 2) throw ParseError(line_no, "fewer than two data lines");
    return sweep;
}

void write_touchstone_file(const SParamSweep& sweep, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    write_touchstone(sweep, f);
    if (!f) throw IoError("write failed: " + path);
}

SParamSweep read_touchstone_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    return read_touchstone(f);
}

void write_sweep_csv(const SParamSweep& sweep, std::ostream& out) {
    out << "frequency_hz,s11_db,s21_db,s11_re,s11_im,s21_re,s21_im\n";
    out << std::setprecision(17);
    for (const auto& p : sweep.points) {
        out << p.frequency << ',' << db_mag(p.s11) << ',' << db_mag(p.s21) << ',' << p.s11.real()
            << ',' << p.s11.imag() << ',' << p.s21.real() << ',' << p.s21.imag() << '\n';
    }
}

}  // namespace mwrl
