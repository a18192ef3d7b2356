/// @file diagnostics.hpp
/// @brief Conserved and produced quantities of the discrete scheme: mass, energy,
/// entropy, physical dissipation and numerical dissipation.
///
/// Every integral uses the quadrature rule of the discretization so the discrete
/// balance laws close to round-off.
#pragma once

#include "chnst/errors.hpp"
#include "chnst/physics.hpp"
#include "chnst/scheme.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <sstream>
#include <string>

namespace chnst::diagnostics {

using scheme::Discretization;
using scheme::State;
using scheme::StarRule;
using physics::MaterialModel;
using mesh::Point;

/// Tolerance below which a negative numerical dissipation is a structure violation.
inline constexpr double d_num_tolerance = 1e-10;

/// Field values of one state at one quadrature point.
struct PointValues {
    double phi = 0.0, mu = 0.0, theta = 0.0, pi = 0.0;
    Point grad_phi = Point::Zero(), grad_mu = Point::Zero(), grad_theta = Point::Zero();
    Point u = Point::Zero();
    Eigen::Matrix2d grad_u = Eigen::Matrix2d::Zero();  // row c = grad u_c
};

inline PointValues sample(const Discretization& d, const State& s, std::size_t t, int q) {
    PointValues v;
    const auto& tab1 = d.tab_p1();
    const auto& tab2 = d.tab_p2();
    const auto d1 = d.p1()->element_dofs(t);
    const auto d2 = d.p2_vector()->element_dofs(t);
    const auto& phi = s.phi.coefficients();
    const auto& mu = s.mu.coefficients();
    const auto& th = s.theta.coefficients();
    const auto& pi = s.pi.coefficients();
    for (int k = 0; k < 3; ++k) {
        const double n = tab1.value(q, k);
        const Point& g = tab1.grad(t, q, k);
        v.phi += n * phi[d1[k]];
        v.mu += n * mu[d1[k]];
        v.theta += n * th[d1[k]];
        v.pi += n * pi[d1[k]];
        v.grad_phi += phi[d1[k]] * g;
        v.grad_mu += mu[d1[k]] * g;
        v.grad_theta += th[d1[k]] * g;
    }
    const auto& u = s.u.coefficients();
    const int n2 = d.p2_scalar_dofs();
    for (int k = 0; k < 6; ++k) {
        const double p = tab2.value(q, k);
        const Point& g = tab2.grad(t, q, k);
        const double ax = u[d2[k]], ay = u[n2 + d2[k]];
        v.u += p * Point(ax, ay);
        v.grad_u.row(0) += ax * g.transpose();
        v.grad_u.row(1) += ay * g.transpose();
    }
    return v;
}

/// Sum over all quadrature points of weight * f(t, q).
template <typename F>
double integrate(const Discretization& d, F&& f) {
    double sum = 0.0;
    for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t)
        for (int q = 0; q < d.tab_p1().num_points(); ++q) sum += d.tab_p1().weight(t, q) * f(t, q);
    return sum;
}

struct Functionals {
    double mass = 0.0;
    double kinetic = 0.0;
    double internal = 0.0;
    double entropy = 0.0;
    double total_energy() const { return kinetic + internal; }
};

inline Functionals functionals(const Discretization& d, const MaterialModel& m, const State& s) {
    Functionals f;
    for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
        for (int q = 0; q < d.tab_p1().num_points(); ++q) {
            const double w = d.tab_p1().weight(t, q);
            const PointValues v = sample(d, s, t, q);
            f.mass += w * v.phi;
            f.kinetic += w * 0.5 * v.u.squaredNorm();
            f.internal += w * m.internal_energy(v.phi, v.theta);
            f.entropy += w * m.entropy(v.phi, v.theta, v.grad_phi.squaredNorm());
        }
    }
    return f;
}

/// <eta* |D u'|^2, theta> + <L11* grad mu, grad mu> - 2 <L12* grad mu, grad theta> + <L22* grad theta, grad theta>
/// at the new level, with u' the midpoint velocity.
inline double physical_dissipation(const Discretization& d, const MaterialModel& m, StarRule star, const State& old,
                                   const State& next) {
    return integrate(d, [&](std::size_t t, int q) {
        const PointValues a = sample(d, old, t, q);
        const PointValues b = sample(d, next, t, q);
        const PointValues& s = star == StarRule::old_level ? a : b;
        const Eigen::Matrix2d gu = 0.5 * (a.grad_u + b.grad_u);
        const Eigen::Matrix2d Du = 0.5 * (gu + gu.transpose());
        const physics::Mobility L = m.mobility(s.phi, s.theta);
        return m.viscosity(s.phi, s.theta) * Du.squaredNorm() * b.theta + L.l11 * b.grad_mu.squaredNorm() -
               2.0 * L.l12 * b.grad_mu.dot(b.grad_theta) + L.l22 * b.grad_theta.squaredNorm();
    });
}

/// <e(new) - e(old), theta(new)> - <mu(new), phi(new) - phi(old)>, which the scheme
/// makes equal to tau times the physical dissipation.
inline double entropy_pairing(const Discretization& d, const MaterialModel& m, const State& old, const State& next) {
    return integrate(d, [&](std::size_t t, int q) {
        const PointValues a = sample(d, old, t, q);
        const PointValues b = sample(d, next, t, q);
        return (m.internal_energy(b.phi, b.theta) - m.internal_energy(a.phi, a.theta)) * b.theta -
               b.mu * (b.phi - a.phi);
    });
}

/// <s(new) - s(old), 1> - tau D. Throws StructureViolation below -1e-10.
inline double numerical_dissipation(const Discretization& d, const MaterialModel& m, StarRule star, double tau,
                                    const State& old, const State& next, long step = 0) {
    const double ds = functionals(d, m, next).entropy - functionals(d, m, old).entropy;
    const double value = ds - tau * physical_dissipation(d, m, star, old, next);
    if (value < -d_num_tolerance) {
        std::ostringstream os;
        os << "numerical dissipation " << value << " below " << -d_num_tolerance << " at step " << step;
        throw StructureViolation(os.str(), step);
    }
    return value;
}

/// Pointwise nonnegative form of the numerical dissipation:
/// (gamma/2)|grad(phi1 - phi0)|^2 + [psi(phi0, theta0) + e0 (theta1 - theta0) - psi(phi0, theta1)]
///   + [psi(phi0, theta1) - psi(phi1, theta1) + d_phi psi_split (phi1 - phi0)].
/// Equals numerical_dissipation() whenever the step satisfies the discrete equations.
inline double numerical_dissipation_closed_form(const Discretization& d, const MaterialModel& m, const State& old,
                                                const State& next) {
    return integrate(d, [&](std::size_t t, int q) {
        const PointValues a = sample(d, old, t, q);
        const PointValues b = sample(d, next, t, q);
        const double dphi = b.phi - a.phi;
        const double theta_part = m.psi(a.phi, a.theta) + m.internal_energy(a.phi, a.theta) * (b.theta - a.theta) -
                                  m.psi(a.phi, b.theta);
        const double phi_part =
            m.psi(a.phi, b.theta) - m.psi(b.phi, b.theta) + m.split_derivative(b.phi, a.phi, b.theta) * dphi;
        return 0.5 * m.gamma() * (b.grad_phi - a.grad_phi).squaredNorm() + theta_part + phi_part;
    });
}

/// (gamma/2) ||grad(phi1 - phi0)||^2, a lower bound of the numerical dissipation.
inline double numerical_dissipation_gradient_part(const Discretization& d, const MaterialModel& m, const State& old,
                                                  const State& next) {
    return integrate(d, [&](std::size_t t, int q) {
        return 0.5 * m.gamma() * (sample(d, next, t, q).grad_phi - sample(d, old, t, q).grad_phi).squaredNorm();
    });
}

struct DiagnosticsRecord {
    long step = 0;
    double time = 0.0;
    double mass = 0.0;
    double kinetic = 0.0;
    double internal = 0.0;
    double total_energy = 0.0;
    double entropy = 0.0;
    /// tau times the physical dissipation of the step ending here (0 at step 0).
    double tau_dissipation = 0.0;
    double d_num = 0.0;
    int newton_iterations = 0;
    double min_theta = 0.0;
};

/// Record of the initial level.
inline DiagnosticsRecord record_initial(const Discretization& d, const MaterialModel& m, const State& s) {
    const Functionals f = functionals(d, m, s);
    return {0, s.time, f.mass, f.kinetic, f.internal, f.total_energy(), f.entropy, 0.0, 0.0, 0,
            s.theta.coefficients().minCoeff()};
}

/// Record of the step old -> next. Propagates StructureViolation from numerical_dissipation().
inline DiagnosticsRecord record(const Discretization& d, const MaterialModel& m, StarRule star, double tau,
                                const State& old, const State& next, long step, int newton_iterations) {
    const Functionals f0 = functionals(d, m, old);
    const Functionals f1 = functionals(d, m, next);
    const double tau_d = tau * physical_dissipation(d, m, star, old, next);
    const double d_num = f1.entropy - f0.entropy - tau_d;
    if (d_num < -d_num_tolerance) {
        std::ostringstream os;
        os << "numerical dissipation " << d_num << " below " << -d_num_tolerance << " at step " << step;
        throw StructureViolation(os.str(), step);
    }
    return {step,     next.time,     f1.mass, f1.kinetic, f1.internal, f1.total_energy(), f1.entropy,
            tau_d,    d_num,         newton_iterations,    next.theta.coefficients().minCoeff()};
}

}  // namespace chnst::diagnostics
