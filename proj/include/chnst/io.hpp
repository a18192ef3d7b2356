/// @file io.hpp
/// @brief Diagnostics CSV, legacy VTK snapshots and raw coefficient dumps.
#pragma once

#include "chnst/diagnostics.hpp"
#include "chnst/errors.hpp"
#include "chnst/scheme.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

namespace chnst::io {

inline constexpr const char* diagnostics_header =
    "step,time,mass,kinetic,internal,total_energy,entropy,tau_dissipation,d_num,newton_iters,min_theta";

/// One CSV row, reals with 17 significant digits.
inline void write_diagnostics_row(std::ostream& os, const diagnostics::DiagnosticsRecord& r) {
    os << std::setprecision(17) << r.step << "," << r.time << "," << r.mass << "," << r.kinetic << "," << r.internal
       << "," << r.total_energy << "," << r.entropy << "," << r.tau_dissipation << "," << r.d_num << ","
       << r.newton_iterations << "," << r.min_theta << "\n";
}

/// Appends rows as they arrive.
class DiagnosticsWriter {
public:
    explicit DiagnosticsWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw Error("cannot open '" + path + "' for writing");
        out_ << diagnostics_header << "\n";
    }
    void write(const diagnostics::DiagnosticsRecord& r) {
        write_diagnostics_row(out_, r);
        out_.flush();
    }

private:
    std::ofstream out_;
};

inline std::string snapshot_name(long step, const char* extension) {
    return "snapshot_" + std::to_string(step) + "." + extension;
}

/// Legacy ASCII VTK unstructured grid on the (n+1)^2 unwrapped vertices of the unit
/// square. Point data: phi, mu, theta, pressure and the velocity at the vertices.
inline void write_vtk(std::ostream& os, const scheme::Discretization& d, const scheme::State& s) {
    const int n = d.n();
    const int np = (n + 1) * (n + 1);
    const auto& m = d.mesh();
    auto point = [n](int i, int j) { return i * (n + 1) + j; };
    auto vertex = [&](int p) { return m.vertex_index((p / (n + 1)) % n, (p % (n + 1)) % n); };

    os << "# vtk DataFile Version 3.0\n";
    os << "snapshot t=" << std::setprecision(17) << s.time << "\n";
    os << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << np << " double\n";
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            os << static_cast<double>(i) / n << " " << static_cast<double>(j) / n << " 0\n";
    const std::size_t nt = m.num_triangles();
    os << "CELLS " << nt << " " << 4 * nt << "\n";
    for (std::size_t t = 0; t < nt; ++t) {
        const auto c = m.corners(t);
        os << 3;
        for (const auto& p : c)
            os << " " << point(static_cast<int>(std::lround(p.x() * n)), static_cast<int>(std::lround(p.y() * n)));
        os << "\n";
    }
    os << "CELL_TYPES " << nt << "\n";
    for (std::size_t t = 0; t < nt; ++t) os << "5\n";

    os << "POINT_DATA " << np << "\n";
    auto scalars = [&](const char* name, const Eigen::VectorXd& c) {
        os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
        for (int p = 0; p < np; ++p) os << c[vertex(p)] << "\n";
    };
    scalars("phi", s.phi.coefficients());
    scalars("mu", s.mu.coefficients());
    scalars("theta", s.theta.coefficients());
    scalars("pressure", s.pi.coefficients());
    const auto& u = s.u.coefficients();
    const int n2 = d.p2_scalar_dofs();
    os << "VECTORS velocity double\n";
    for (int p = 0; p < np; ++p) os << u[vertex(p)] << " " << u[n2 + vertex(p)] << " 0\n";
}

inline void write_vtk(const std::string& path, const scheme::Discretization& d, const scheme::State& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_vtk(out, d, s);
}

/// All coefficient vectors in full precision, one labelled block per field.
inline void write_raw(const std::string& path, const scheme::State& s) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << std::setprecision(17) << "time " << s.time << "\nmultiplier " << s.multiplier << "\n";
    auto block = [&](const char* name, const fe::FeFunction& f) {
        const auto& c = f.coefficients();
        out << name << " " << fe::to_string(f.space().family()) << " " << c.size() << "\n";
        for (int i = 0; i < c.size(); ++i) out << c[i] << "\n";
    };
    block("phi", s.phi);
    block("mu", s.mu);
    block("theta", s.theta);
    block("u", s.u);
    block("pi", s.pi);
}

}  // namespace chnst::io
