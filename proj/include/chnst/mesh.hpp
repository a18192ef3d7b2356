/// @file mesh.hpp
/// @brief Uniform periodic triangulations of the unit square (the 2-torus).
#pragma once

#include "chnst/errors.hpp"
#include "chnst/quadrature.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace chnst::mesh {

using Point = Eigen::Vector2d;

inline constexpr double snap_tolerance = 1e-12;

/// Maps a coordinate into [0, 1), snapping values within snap_tolerance of an
/// integer onto 0.
inline double normalize_periodic(double x) {
    double r = x - std::floor(x);
    if (r < snap_tolerance || r > 1.0 - snap_tolerance) r = 0.0;
    return r;
}

inline Point normalize_periodic(const Point& p) {
    return {normalize_periodic(p.x()), normalize_periodic(p.y())};
}

/// n x n cells, each split along its lower-left to upper-right diagonal.
///
/// Vertex (i, j) sits at (i/n, j/n) and has index i*n + j, which is lexicographic
/// in (x, y). Cell (i, j) owns triangles 2c (below the diagonal) and 2c+1 (above),
/// c = i*n + j. Triangles reference periodic vertex indices; corners() holds the
/// unwrapped coordinates used for geometry.
class PeriodicTriMesh {
public:
    int n() const noexcept { return n_; }
    double h() const noexcept { return 1.0 / n_; }
    std::size_t num_vertices() const noexcept { return vertices_.size(); }
    std::size_t num_triangles() const noexcept { return triangles_.size(); }

    const std::vector<Point>& vertices() const noexcept { return vertices_; }
    const std::vector<std::array<int, 3>>& triangles() const noexcept { return triangles_; }
    const std::array<Point, 3>& corners(std::size_t t) const { return corners_.at(t); }

    int vertex_index(int i, int j) const noexcept {
        const auto wrap = [this](int k) { return ((k % n_) + n_) % n_; };
        return wrap(i) * n_ + wrap(j);
    }

    friend PeriodicTriMesh build_uniform(int n);

private:
    PeriodicTriMesh() = default;

    int n_ = 0;
    std::vector<Point> vertices_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<std::array<Point, 3>> corners_;
};

inline PeriodicTriMesh build_uniform(int n) {
    if (n < 1) throw InvalidArgument("build_uniform: n must be >= 1, got " + std::to_string(n));
    PeriodicTriMesh m;
    m.n_ = n;
    const double h = 1.0 / n;
    m.vertices_.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m.vertices_.emplace_back(i * h, j * h);

    m.triangles_.reserve(2 * static_cast<std::size_t>(n) * n);
    m.corners_.reserve(2 * static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const Point p00(i * h, j * h), p10((i + 1) * h, j * h);
            const Point p11((i + 1) * h, (j + 1) * h), p01(i * h, (j + 1) * h);
            m.triangles_.push_back({m.vertex_index(i, j), m.vertex_index(i + 1, j), m.vertex_index(i + 1, j + 1)});
            m.corners_.push_back({p00, p10, p11});
            m.triangles_.push_back({m.vertex_index(i, j), m.vertex_index(i + 1, j + 1), m.vertex_index(i, j + 1)});
            m.corners_.push_back({p00, p11, p01});
        }
    }
    return m;
}

/// Uniform refinement: the mesh with 2n subdivisions. Vertex sets are nested.
inline PeriodicTriMesh refine(const PeriodicTriMesh& mesh) { return build_uniform(2 * mesh.n()); }

/// Affine geometry of one triangle: x = corners[0] + jacobian * (xi, eta).
struct ElementGeometry {
    std::array<Point, 3> corners;
    Eigen::Matrix2d jacobian;
    double area = 0.0;
    /// Constant physical gradients of the three barycentric functions.
    std::array<Point, 3> grad_lambda;

    Point map(const Point& ref) const { return corners[0] + jacobian * ref; }
    Point map_barycentric(const std::array<double, 3>& l) const {
        return l[0] * corners[0] + l[1] * corners[1] + l[2] * corners[2];
    }
};

inline ElementGeometry element_geometry(const PeriodicTriMesh& mesh, std::size_t t) {
    if (t >= mesh.num_triangles())
        throw InvalidArgument("element_geometry: triangle index " + std::to_string(t) + " out of range");
    ElementGeometry g;
    g.corners = mesh.corners(t);
    g.jacobian.col(0) = g.corners[1] - g.corners[0];
    g.jacobian.col(1) = g.corners[2] - g.corners[0];
    const double det = g.jacobian.determinant();
    g.area = 0.5 * det;
    // Rows of J^{-1} are the gradients of the reference coordinates (l1, l2).
    const Eigen::Matrix2d inv = g.jacobian.inverse();
    g.grad_lambda[1] = inv.row(0).transpose();
    g.grad_lambda[2] = inv.row(1).transpose();
    g.grad_lambda[0] = -(g.grad_lambda[1] + g.grad_lambda[2]);
    return g;
}

/// Triangle containing a (periodically normalized) point, with barycentrics.
struct Location {
    std::size_t triangle = 0;
    std::array<double, 3> barycentric{};
};

inline Location locate(const PeriodicTriMesh& mesh, const Point& p) {
    const Point q = normalize_periodic(p);
    const int n = mesh.n();
    const int i = std::min(static_cast<int>(std::floor(q.x() * n)), n - 1);
    const int j = std::min(static_cast<int>(std::floor(q.y() * n)), n - 1);
    const double fx = q.x() * n - i;
    const double fy = q.y() * n - j;
    const std::size_t cell = static_cast<std::size_t>(i) * n + j;
    Location loc;
    if (fy <= fx) {
        loc.triangle = 2 * cell;
        loc.barycentric = {1.0 - fx, fx - fy, fy};
    } else {
        loc.triangle = 2 * cell + 1;
        loc.barycentric = {1.0 - fy, fx, fy - fx};
    }
    return loc;
}

}  // namespace chnst::mesh
