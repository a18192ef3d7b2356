/// @file fespace.hpp
/// @brief Periodic P1 / P2 Lagrange spaces, finite element functions and the
/// integral forms evaluated on them.
#pragma once

#include "chnst/errors.hpp"
#include "chnst/mesh.hpp"
#include "chnst/quadrature.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chnst::fe {

using mesh::ElementGeometry;
using mesh::PeriodicTriMesh;
using mesh::Point;
using mesh::QuadRule;

enum class Family { p1, p1_meanfree, p2, p2_vector };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::p1: return "P1";
        case Family::p1_meanfree: return "P1-meanfree";
        case Family::p2: return "P2";
        case Family::p2_vector: return "P2-vector";
    }
    return "?";
}

inline constexpr int polynomial_order(Family f) { return (f == Family::p2 || f == Family::p2_vector) ? 2 : 1; }
inline constexpr int local_size(Family f) { return polynomial_order(f) == 2 ? 6 : 3; }
inline constexpr int components(Family f) { return f == Family::p2_vector ? 2 : 1; }

/// Local edge m joins local vertices edge_vertices[m][0] and edge_vertices[m][1].
inline constexpr std::array<std::array<int, 2>, 3> edge_vertices{{{0, 1}, {1, 2}, {2, 0}}};

/// Local shape function values at barycentric point @p l. P2 ordering: the three
/// vertex functions, then the edge functions of edges (0,1), (1,2), (2,0).
inline void shape_values(int order, const std::array<double, 3>& l, std::span<double> out) {
    if (order == 1) {
        for (int k = 0; k < 3; ++k) out[k] = l[k];
        return;
    }
    for (int k = 0; k < 3; ++k) out[k] = l[k] * (2.0 * l[k] - 1.0);
    for (int m = 0; m < 3; ++m) out[3 + m] = 4.0 * l[edge_vertices[m][0]] * l[edge_vertices[m][1]];
}

inline void shape_gradients(int order, const std::array<double, 3>& l, const std::array<Point, 3>& gl,
                            std::span<Point> out) {
    if (order == 1) {
        for (int k = 0; k < 3; ++k) out[k] = gl[k];
        return;
    }
    for (int k = 0; k < 3; ++k) out[k] = (4.0 * l[k] - 1.0) * gl[k];
    for (int m = 0; m < 3; ++m) {
        const int a = edge_vertices[m][0], b = edge_vertices[m][1];
        out[3 + m] = 4.0 * (l[a] * gl[b] + l[b] * gl[a]);
    }
}

/// Scalar DOFs of a P1 or P2 space, shared by all components of a vector space.
///
/// DOF numbering: periodic vertices first, in mesh vertex order (lexicographic in
/// (x, y)), then edge midpoints sorted lexicographically by normalized coordinate.
/// Component c of a vector space owns the block [c*scalar_dofs, (c+1)*scalar_dofs).
class FunctionSpace {
public:
    FunctionSpace(std::shared_ptr<const PeriodicTriMesh> mesh, Family family)
        : mesh_(std::move(mesh)), family_(family) {
        if (!mesh_) throw InvalidArgument("FunctionSpace: null mesh");
        build();
    }

    const PeriodicTriMesh& mesh() const noexcept { return *mesh_; }
    const std::shared_ptr<const PeriodicTriMesh>& mesh_ptr() const noexcept { return mesh_; }
    Family family() const noexcept { return family_; }
    int order() const noexcept { return polynomial_order(family_); }
    int components() const noexcept { return fe::components(family_); }
    int local_size() const noexcept { return fe::local_size(family_); }
    int scalar_dofs() const noexcept { return static_cast<int>(nodes_.size()); }
    int dof_count() const noexcept { return components() * scalar_dofs(); }

    /// Scalar DOF indices of triangle t, in local shape function order.
    std::span<const int> element_dofs(std::size_t t) const {
        return {element_dofs_.data() + t * static_cast<std::size_t>(local_size()),
                static_cast<std::size_t>(local_size())};
    }
    /// Coordinates in [0,1)^2 of each scalar DOF node.
    const std::vector<Point>& nodes() const noexcept { return nodes_; }

    bool same_discretization(const FunctionSpace& other) const noexcept {
        return mesh_->n() == other.mesh_->n() && family_ == other.family_;
    }

private:
    void build() {
        const auto& m = *mesh_;
        const int n = m.n();
        const std::size_t ls = static_cast<std::size_t>(local_size());
        nodes_ = m.vertices();
        element_dofs_.assign(m.num_triangles() * ls, -1);
        for (std::size_t t = 0; t < m.num_triangles(); ++t)
            for (int k = 0; k < 3; ++k) element_dofs_[t * ls + k] = m.triangles()[t][static_cast<std::size_t>(k)];
        if (order() == 1) return;

        // Edge midpoints on the doubled integer lattice, wrapped mod 2n.
        const int two_n = 2 * n;
        auto key_of = [&](const Point& p) {
            const auto wrap = [two_n](long v) { return static_cast<int>(((v % two_n) + two_n) % two_n); };
            return std::pair<int, int>{wrap(std::lround(p.x() * two_n)), wrap(std::lround(p.y() * two_n))};
        };
        std::vector<std::pair<int, int>> keys;
        keys.reserve(3 * m.num_triangles());
        std::vector<std::pair<int, int>> elem_keys(3 * m.num_triangles());
        for (std::size_t t = 0; t < m.num_triangles(); ++t) {
            const auto& c = m.corners(t);
            for (int e = 0; e < 3; ++e) {
                const Point mid = 0.5 * (c[static_cast<std::size_t>(edge_vertices[static_cast<std::size_t>(e)][0])] +
                                         c[static_cast<std::size_t>(edge_vertices[static_cast<std::size_t>(e)][1])]);
                elem_keys[3 * t + static_cast<std::size_t>(e)] = key_of(mid);
                keys.push_back(key_of(mid));
            }
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        const int nv = static_cast<int>(nodes_.size());
        for (const auto& [X, Y] : keys) nodes_.emplace_back(static_cast<double>(X) / two_n, static_cast<double>(Y) / two_n);
        for (std::size_t t = 0; t < m.num_triangles(); ++t) {
            for (std::size_t e = 0; e < 3; ++e) {
                const auto it = std::lower_bound(keys.begin(), keys.end(), elem_keys[3 * t + e]);
                element_dofs_[t * ls + 3 + e] = nv + static_cast<int>(it - keys.begin());
            }
        }
    }

    std::shared_ptr<const PeriodicTriMesh> mesh_;
    Family family_;
    std::vector<Point> nodes_;
    std::vector<int> element_dofs_;
};

using SpacePtr = std::shared_ptr<const FunctionSpace>;

inline SpacePtr build_space(std::shared_ptr<const PeriodicTriMesh> mesh, Family family) {
    return std::make_shared<const FunctionSpace>(std::move(mesh), family);
}

/// Basis values and physical gradients at every quadrature point of every triangle.
/// Affine elements share reference values; gradients and weights are per element.
class Tabulation {
public:
    Tabulation(const FunctionSpace& space, const QuadRule& rule)
        : nq_(static_cast<int>(rule.size())), ls_(space.local_size()) {
        const auto& m = space.mesh();
        values_.resize(static_cast<std::size_t>(nq_ * ls_));
        for (int q = 0; q < nq_; ++q)
            shape_values(space.order(), rule.points[static_cast<std::size_t>(q)],
                         std::span<double>(values_.data() + q * ls_, static_cast<std::size_t>(ls_)));
        const std::size_t ne = m.num_triangles();
        grads_.resize(ne * static_cast<std::size_t>(nq_ * ls_));
        weights_.resize(ne * static_cast<std::size_t>(nq_));
        points_.resize(ne * static_cast<std::size_t>(nq_));
        for (std::size_t t = 0; t < ne; ++t) {
            const ElementGeometry g = mesh::element_geometry(m, t);
            for (int q = 0; q < nq_; ++q) {
                const auto& l = rule.points[static_cast<std::size_t>(q)];
                const std::size_t tq = t * static_cast<std::size_t>(nq_) + static_cast<std::size_t>(q);
                weights_[tq] = 2.0 * g.area * rule.weights[static_cast<std::size_t>(q)];
                points_[tq] = g.map_barycentric(l);
                shape_gradients(space.order(), l, g.grad_lambda,
                                std::span<Point>(grads_.data() + tq * static_cast<std::size_t>(ls_),
                                                 static_cast<std::size_t>(ls_)));
            }
        }
    }

    int num_points() const noexcept { return nq_; }
    int local_size() const noexcept { return ls_; }
    std::size_t num_elements() const noexcept { return weights_.size() / static_cast<std::size_t>(nq_); }

    double value(int q, int k) const { return values_[static_cast<std::size_t>(q * ls_ + k)]; }
    std::span<const double> values(int q) const {
        return {values_.data() + q * ls_, static_cast<std::size_t>(ls_)};
    }
    const Point& grad(std::size_t t, int q, int k) const {
        return grads_[(t * static_cast<std::size_t>(nq_) + static_cast<std::size_t>(q)) * static_cast<std::size_t>(ls_) +
                      static_cast<std::size_t>(k)];
    }
    double weight(std::size_t t, int q) const { return weights_[t * static_cast<std::size_t>(nq_) + static_cast<std::size_t>(q)]; }
    /// Physical (unwrapped) coordinates of quadrature point q of triangle t.
    const Point& point(std::size_t t, int q) const { return points_[t * static_cast<std::size_t>(nq_) + static_cast<std::size_t>(q)]; }

private:
    int nq_;
    int ls_;
    std::vector<double> values_;
    std::vector<Point> grads_;
    std::vector<double> weights_;
    std::vector<Point> points_;
};

inline Tabulation tabulate(const FunctionSpace& space, const QuadRule& rule) { return Tabulation(space, rule); }

/// Coefficient vector tagged with its space.
class FeFunction {
public:
    explicit FeFunction(SpacePtr space) : space_(std::move(space)) {
        if (!space_) throw InvalidArgument("FeFunction: null space");
        coeffs_ = Eigen::VectorXd::Zero(space_->dof_count());
    }
    FeFunction(SpacePtr space, Eigen::VectorXd coeffs) : space_(std::move(space)), coeffs_(std::move(coeffs)) {
        if (!space_) throw InvalidArgument("FeFunction: null space");
        if (coeffs_.size() != space_->dof_count())
            throw InvalidArgument("FeFunction: " + std::to_string(coeffs_.size()) + " coefficients for a space with " +
                                  std::to_string(space_->dof_count()) + " DOFs");
    }

    const FunctionSpace& space() const noexcept { return *space_; }
    const SpacePtr& space_ptr() const noexcept { return space_; }
    const Eigen::VectorXd& coefficients() const noexcept { return coeffs_; }
    Eigen::VectorXd& coefficients() noexcept { return coeffs_; }

    FeFunction& operator+=(const FeFunction& o) {
        check_same(o);
        coeffs_ += o.coeffs_;
        return *this;
    }
    FeFunction& operator-=(const FeFunction& o) {
        check_same(o);
        coeffs_ -= o.coeffs_;
        return *this;
    }
    FeFunction& operator*=(double a) {
        coeffs_ *= a;
        return *this;
    }
    friend FeFunction operator+(FeFunction a, const FeFunction& b) { return a += b; }
    friend FeFunction operator-(FeFunction a, const FeFunction& b) { return a -= b; }
    friend FeFunction operator*(double s, FeFunction a) { return a *= s; }

    void check_same(const FeFunction& o) const {
        if (!space_->same_discretization(*o.space_))
            throw InvalidArgument(std::string("FeFunction: space mismatch (") + to_string(space_->family()) + " n=" +
                                  std::to_string(space_->mesh().n()) + " vs " + to_string(o.space_->family()) +
                                  " n=" + std::to_string(o.space_->mesh().n()) + ")");
    }

private:
    SpacePtr space_;
    Eigen::VectorXd coeffs_;
};

using ScalarField = std::function<double(const Point&)>;
using VectorField = std::function<Point(const Point&)>;

/// Point evaluation (periodic). Scalar families return (value, 0).
inline Point evaluate(const FeFunction& f, const Point& p) {
    const auto& sp = f.space();
    const auto loc = mesh::locate(sp.mesh(), p);
    std::array<double, 6> phi{};
    shape_values(sp.order(), loc.barycentric, std::span<double>(phi.data(), static_cast<std::size_t>(sp.local_size())));
    const auto dofs = sp.element_dofs(loc.triangle);
    Point out = Point::Zero();
    for (int c = 0; c < sp.components(); ++c)
        for (int k = 0; k < sp.local_size(); ++k)
            out[c] += phi[static_cast<std::size_t>(k)] * f.coefficients()[c * sp.scalar_dofs() + dofs[static_cast<std::size_t>(k)]];
    return out;
}

inline double evaluate_scalar(const FeFunction& f, const Point& p) { return evaluate(f, p).x(); }

/// ⟨f, 1⟩ for a scalar function.
inline double integral(const FeFunction& f, int quad_degree = 6);

/// Nodal interpolation of a periodic scalar field. For the mean-free family the
/// discrete mean is removed afterwards.
inline FeFunction interpolate(const SpacePtr& space, const ScalarField& f) {
    if (space->components() != 1) throw InvalidArgument("interpolate: scalar field into a vector space");
    Eigen::VectorXd c(space->dof_count());
    const auto& nodes = space->nodes();
    for (int i = 0; i < space->scalar_dofs(); ++i) c[i] = f(nodes[static_cast<std::size_t>(i)]);
    FeFunction out(space, std::move(c));
    if (space->family() == Family::p1_meanfree) out.coefficients().array() -= integral(out);
    return out;
}

inline FeFunction interpolate(const SpacePtr& space, const VectorField& f) {
    if (space->components() != 2) throw InvalidArgument("interpolate: vector field into a scalar space");
    const int nd = space->scalar_dofs();
    Eigen::VectorXd c(space->dof_count());
    const auto& nodes = space->nodes();
    for (int i = 0; i < nd; ++i) {
        const Point v = f(nodes[static_cast<std::size_t>(i)]);
        c[i] = v.x();
        c[nd + i] = v.y();
    }
    return FeFunction(space, std::move(c));
}

/// Exact transfer of a coarse function onto the uniformly refined mesh.
inline FeFunction prolong(const FeFunction& f, const SpacePtr& fine) {
    const auto& cs = f.space();
    if (fine->mesh().n() != 2 * cs.mesh().n() || fine->family() != cs.family())
        throw InvalidArgument("prolong: fine space must be the same family on the once-refined mesh");
    const int nd = fine->scalar_dofs();
    Eigen::VectorXd c(fine->dof_count());
    const auto& nodes = fine->nodes();
    for (int i = 0; i < nd; ++i) {
        const Point v = evaluate(f, nodes[static_cast<std::size_t>(i)]);
        for (int k = 0; k < cs.components(); ++k) c[k * nd + i] = v[k];
    }
    return FeFunction(fine, std::move(c));
}

namespace detail {

/// Calls visit(weight, value, gradient) at every quadrature point; value and
/// gradient have one row per component.
template <typename Visit>
void for_each_qp(const FeFunction& f, const QuadRule& rule, Visit&& visit) {
    const auto& sp = f.space();
    const auto& m = sp.mesh();
    const int ls = sp.local_size(), nc = sp.components(), nd = sp.scalar_dofs();
    std::array<double, 6> phi{};
    std::array<Point, 6> dphi{};
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto g = mesh::element_geometry(m, t);
        const auto dofs = sp.element_dofs(t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            shape_values(sp.order(), rule.points[q], std::span<double>(phi.data(), static_cast<std::size_t>(ls)));
            shape_gradients(sp.order(), rule.points[q], g.grad_lambda, std::span<Point>(dphi.data(), static_cast<std::size_t>(ls)));
            Eigen::Vector2d val = Eigen::Vector2d::Zero();
            Eigen::Matrix2d grad = Eigen::Matrix2d::Zero();
            for (int c = 0; c < nc; ++c) {
                for (int k = 0; k < ls; ++k) {
                    const double ck = f.coefficients()[c * nd + dofs[static_cast<std::size_t>(k)]];
                    val[c] += ck * phi[static_cast<std::size_t>(k)];
                    grad.row(c) += ck * dphi[static_cast<std::size_t>(k)].transpose();
                }
            }
            visit(2.0 * g.area * rule.weights[q], val, grad);
        }
    }
}

}  // namespace detail

inline double integral(const FeFunction& f, int quad_degree) {
    double s = 0.0;
    detail::for_each_qp(f, mesh::quad_rule(quad_degree),
                        [&](double w, const Eigen::Vector2d& v, const Eigen::Matrix2d&) { s += w * v[0]; });
    return s;
}

struct Norms {
    double l2 = 0.0;
    double h1_semi = 0.0;
    double h1() const { return std::sqrt(l2 * l2 + h1_semi * h1_semi); }
};

/// L2 norm and H1 seminorm, summed over components for vector functions.
inline Norms norms(const FeFunction& f, int quad_degree = 6) {
    double l2 = 0.0, semi = 0.0;
    const int nc = f.space().components();
    detail::for_each_qp(f, mesh::quad_rule(quad_degree), [&](double w, const Eigen::Vector2d& v, const Eigen::Matrix2d& g) {
        l2 += w * v.head(nc).squaredNorm();
        semi += w * g.topRows(nc).squaredNorm();
    });
    return {std::sqrt(l2), std::sqrt(semi)};
}

/// c_skw(u, v, w) = ½⟨(u·∇)v, w⟩ − ½⟨(u·∇)w, v⟩ on P2 vector functions.
inline double c_skw(const FeFunction& u, const FeFunction& v, const FeFunction& w, int quad_degree = 6) {
    if (u.space().family() != Family::p2_vector) throw InvalidArgument("c_skw: arguments must be P2 vector functions");
    u.check_same(v);
    u.check_same(w);
    const auto& sp = u.space();
    const auto& m = sp.mesh();
    const auto rule = mesh::quad_rule(quad_degree);
    const int nd = sp.scalar_dofs();
    std::array<double, 6> phi{};
    std::array<Point, 6> dphi{};
    double sum = 0.0;
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto g = mesh::element_geometry(m, t);
        const auto dofs = sp.element_dofs(t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            shape_values(2, rule.points[q], phi);
            shape_gradients(2, rule.points[q], g.grad_lambda, dphi);
            Eigen::Vector2d uq = Eigen::Vector2d::Zero(), vq = Eigen::Vector2d::Zero(), wq = Eigen::Vector2d::Zero();
            Eigen::Matrix2d gv = Eigen::Matrix2d::Zero(), gw = Eigen::Matrix2d::Zero();
            for (int c = 0; c < 2; ++c) {
                for (std::size_t k = 0; k < 6; ++k) {
                    const int i = c * nd + dofs[k];
                    uq[c] += u.coefficients()[i] * phi[k];
                    vq[c] += v.coefficients()[i] * phi[k];
                    wq[c] += w.coefficients()[i] * phi[k];
                    gv.row(c) += v.coefficients()[i] * dphi[k].transpose();
                    gw.row(c) += w.coefficients()[i] * dphi[k].transpose();
                }
            }
            sum += 2.0 * g.area * rule.weights[q] * 0.5 * ((gv * uq).dot(wq) - (gw * uq).dot(vq));
        }
    }
    return sum;
}

/// ⟨div u, q_i⟩ for every basis function q_i of the P1 space @p pressure.
inline Eigen::VectorXd divergence_moments(const FeFunction& u, const FunctionSpace& pressure, int quad_degree = 6) {
    if (u.space().family() != Family::p2_vector || pressure.order() != 1 ||
        pressure.mesh().n() != u.space().mesh().n())
        throw InvalidArgument("divergence_moments: needs P2 vector velocity and P1 pressure on one mesh");
    const auto& sp = u.space();
    const auto& m = sp.mesh();
    const auto rule = mesh::quad_rule(quad_degree);
    const int nd = sp.scalar_dofs();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(pressure.dof_count());
    std::array<Point, 6> dphi{};
    for (std::size_t t = 0; t < m.num_triangles(); ++t) {
        const auto g = mesh::element_geometry(m, t);
        const auto dofs = sp.element_dofs(t);
        const auto pdofs = pressure.element_dofs(t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
            shape_gradients(2, rule.points[q], g.grad_lambda, dphi);
            double div = 0.0;
            for (std::size_t k = 0; k < 6; ++k)
                div += u.coefficients()[dofs[k]] * dphi[k].x() + u.coefficients()[nd + dofs[k]] * dphi[k].y();
            const double w = 2.0 * g.area * rule.weights[q];
            for (std::size_t k = 0; k < 3; ++k) out[pdofs[k]] += w * div * rule.points[q][k];
        }
    }
    return out;
}

}  // namespace chnst::fe
