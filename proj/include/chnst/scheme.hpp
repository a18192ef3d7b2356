/// @file scheme.hpp
/// @brief Fully discrete structure-preserving time stepper for the non-isothermal
/// Cahn-Hilliard-Navier-Stokes system.
///
/// Unknowns at the new time level are (phi, mu, theta, u, pi) in P1 x P1 x P1 x
/// P2^2 x P1 plus one scalar multiplier lambda enforcing <pi, 1> = 0. Unknowns and
/// residual rows are ordered [phi | mu | theta | u_x | u_y | pi | lambda]. Rows are
///   phase       <d_t phi, psi> - <phi* u', grad psi> + <L11* grad mu - L12* grad theta, grad psi>
///   potential   <mu, xi> - gamma <grad phi, grad xi> - <d_phi psi_split(phi, phi_old, theta), xi>
///   energy      <d_t e, w> - <eta* |D u'|^2, w> + <L12* grad mu - L22* grad theta, grad w>
///               - <sigma* u', grad w> - <(phi*/theta) grad mu - sigma* grad theta / theta, u' w>
///               - <(s* + phi* mu*) u', (theta grad w - w grad theta) / theta*^2>
///   momentum    <d_t u, v> + c_skw(u*, u', v) + <eta* D u', D v> - <pi, div v>
///               + <(phi*/theta) grad mu - sigma* grad theta / theta - (s* + phi* mu*) grad theta / theta*^2, v>
///   divergence  <div u', q> + lambda <1, q>
///   constraint  <pi, 1>
/// where u' = (u + u_old)/2, unstarred quantities are new-level unknowns, starred
/// ones are evaluated at the level chosen by StarRule, sigma = (gamma/theta) grad phi
/// (x) grad phi and D u = (grad u + grad u^T)/2. Every integral uses one quadrature rule.
#pragma once

#include "chnst/dual.hpp"
#include "chnst/errors.hpp"
#include "chnst/fespace.hpp"
#include "chnst/la.hpp"
#include "chnst/mesh.hpp"
#include "chnst/physics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace chnst::scheme {

using fe::FeFunction;
using fe::SpacePtr;
using la::Vector;
using mesh::Point;
using physics::MaterialModel;

/// Time level at which every starred quantity is evaluated.
enum class StarRule { old_level, new_level };

struct StepperConfig {
    double tau = 1e-3;
    StarRule star_rule = StarRule::old_level;
    la::NewtonSettings newton{};
    /// Residual evaluation rejects states with theta at or below this value.
    double theta_floor = 1e-8;

    void validate() const {
        if (!(tau > 0.0)) throw InvalidArgument("StepperConfig: tau must be > 0");
        if (!(theta_floor >= 0.0)) throw InvalidArgument("StepperConfig: theta_floor must be >= 0");
        newton.validate();
    }
};

/// Number of element unknowns: 3 phi, 3 mu, 3 theta, 6 u_x, 6 u_y, 3 pi.
inline constexpr int local_unknowns = 24;
using LocalIndex = std::array<int, local_unknowns>;

namespace slot {
inline constexpr int phi = 0, mu = 3, theta = 6, ux = 9, uy = 15, pi = 21;
}

/// Mesh, spaces, quadrature, tabulations and the Jacobian sparsity pattern for one
/// mesh resolution.
class Discretization {
public:
    explicit Discretization(int n, int quad_degree = 6)
        : mesh_(std::make_shared<const mesh::PeriodicTriMesh>(mesh::build_uniform(n))),
          p1_(fe::build_space(mesh_, fe::Family::p1)),
          p1_meanfree_(fe::build_space(mesh_, fe::Family::p1_meanfree)),
          p2v_(fe::build_space(mesh_, fe::Family::p2_vector)),
          quad_degree_(quad_degree),
          rule_(mesh::quad_rule(quad_degree)),
          tab1_(*p1_, rule_),
          tab2_(*p2v_, rule_) {
        n1_ = p1_->dof_count();
        n2_ = p2v_->scalar_dofs();
        const std::size_t ne = mesh_->num_triangles();
        index_.resize(ne);
        for (std::size_t t = 0; t < ne; ++t) {
            const auto d1 = p1_->element_dofs(t);
            const auto d2 = p2v_->element_dofs(t);
            auto& ix = index_[t];
            for (int k = 0; k < 3; ++k) {
                ix[slot::phi + k] = phi_offset() + d1[k];
                ix[slot::mu + k] = mu_offset() + d1[k];
                ix[slot::theta + k] = theta_offset() + d1[k];
                ix[slot::pi + k] = pi_offset() + d1[k];
            }
            for (int m = 0; m < 6; ++m) {
                ix[slot::ux + m] = u_offset() + d2[m];
                ix[slot::uy + m] = u_offset() + n2_ + d2[m];
            }
        }
        p1_integrals_ = Vector::Zero(n1_);
        for (std::size_t t = 0; t < ne; ++t)
            for (int q = 0; q < tab1_.num_points(); ++q)
                for (int k = 0; k < 3; ++k) p1_integrals_[p1_->element_dofs(t)[k]] += tab1_.weight(t, q) * tab1_.value(q, k);
        build_pattern();
    }

    const mesh::PeriodicTriMesh& mesh() const noexcept { return *mesh_; }
    int n() const noexcept { return mesh_->n(); }
    const SpacePtr& p1() const noexcept { return p1_; }
    const SpacePtr& p1_meanfree() const noexcept { return p1_meanfree_; }
    const SpacePtr& p2_vector() const noexcept { return p2v_; }
    int quad_degree() const noexcept { return quad_degree_; }
    const mesh::QuadRule& rule() const noexcept { return rule_; }
    const fe::Tabulation& tab_p1() const noexcept { return tab1_; }
    const fe::Tabulation& tab_p2() const noexcept { return tab2_; }

    int p1_dofs() const noexcept { return n1_; }
    int p2_scalar_dofs() const noexcept { return n2_; }
    int phi_offset() const noexcept { return 0; }
    int mu_offset() const noexcept { return n1_; }
    int theta_offset() const noexcept { return 2 * n1_; }
    int u_offset() const noexcept { return 3 * n1_; }
    int pi_offset() const noexcept { return 3 * n1_ + 2 * n2_; }
    int lambda_index() const noexcept { return 4 * n1_ + 2 * n2_; }
    int num_unknowns() const noexcept { return lambda_index() + 1; }

    const LocalIndex& element_index(std::size_t t) const { return index_[t]; }
    /// <1, q_i> for every P1 basis function.
    const Vector& p1_integrals() const noexcept { return p1_integrals_; }

    const la::SparseMatrix& jacobian_pattern() const noexcept { return pattern_; }
    /// Positions in the pattern's value array of element t's local entries (row-major 24x24).
    const int* element_slots(std::size_t t) const { return slots_.data() + t * local_unknowns * local_unknowns; }
    const std::vector<int>& lambda_column_slots() const noexcept { return lambda_col_slots_; }
    const std::vector<int>& lambda_row_slots() const noexcept { return lambda_row_slots_; }

private:
    void build_pattern() {
        const int N = num_unknowns();
        std::vector<la::Triplet> trip;
        trip.reserve(index_.size() * local_unknowns * local_unknowns + 2 * static_cast<std::size_t>(n1_));
        for (const auto& ix : index_)
            for (int r = 0; r < local_unknowns; ++r)
                for (int c = 0; c < local_unknowns; ++c) trip.emplace_back(ix[r], ix[c], 0.0);
        for (int i = 0; i < n1_; ++i) {
            trip.emplace_back(pi_offset() + i, lambda_index(), 0.0);
            trip.emplace_back(lambda_index(), pi_offset() + i, 0.0);
        }
        pattern_ = la::from_triplets(N, N, trip);

        auto find = [this](int r, int c) {
            const int* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c];
            const int* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c + 1];
            const int* it = std::lower_bound(begin, end, r);
            return static_cast<int>(it - pattern_.innerIndexPtr());
        };
        slots_.resize(index_.size() * local_unknowns * local_unknowns);
        for (std::size_t t = 0; t < index_.size(); ++t)
            for (int r = 0; r < local_unknowns; ++r)
                for (int c = 0; c < local_unknowns; ++c)
                    slots_[(t * local_unknowns + r) * local_unknowns + c] = find(index_[t][r], index_[t][c]);
        lambda_col_slots_.resize(n1_);
        lambda_row_slots_.resize(n1_);
        for (int i = 0; i < n1_; ++i) {
            lambda_col_slots_[i] = find(pi_offset() + i, lambda_index());
            lambda_row_slots_[i] = find(lambda_index(), pi_offset() + i);
        }
    }

    std::shared_ptr<const mesh::PeriodicTriMesh> mesh_;
    SpacePtr p1_, p1_meanfree_, p2v_;
    int quad_degree_;
    mesh::QuadRule rule_;
    fe::Tabulation tab1_, tab2_;
    int n1_ = 0, n2_ = 0;
    std::vector<LocalIndex> index_;
    Vector p1_integrals_;
    la::SparseMatrix pattern_;
    std::vector<int> slots_;
    std::vector<int> lambda_col_slots_, lambda_row_slots_;
};

using DiscretizationPtr = std::shared_ptr<const Discretization>;

/// One time level. multiplier is the mean-constraint multiplier of the step that
/// produced this level (0 for initial data).
struct State {
    double time = 0.0;
    FeFunction phi, mu, theta, u, pi;
    double multiplier = 0.0;
};

/// Closures for the initial phase field, inverse temperature and velocity.
struct InitialData {
    fe::ScalarField phi;
    fe::ScalarField theta;
    fe::VectorField u;
};

/// Smooth periodic benchmark data: a perturbed mixture at rest temperature with a
/// divergence-free vortex velocity.
inline InitialData benchmark_initial_data() {
    using std::numbers::pi;
    return {
        [](const Point& p) { return 0.4 + 0.2 * std::sin(2 * pi * p.x()) * std::sin(2 * pi * p.y()); },
        [](const Point& p) { return 1.0 + 0.2 * std::sin(2 * pi * p.x()) * std::sin(2 * pi * p.y()); },
        [](const Point& p) {
            const double sx = std::sin(pi * p.x()), sy = std::sin(pi * p.y());
            return Point(-1e-2 * sx * sx * std::sin(2 * pi * p.y()), 1e-2 * std::sin(2 * pi * p.x()) * sy * sy);
        },
    };
}

/// Spatially uniform data (phi = c, theta = theta0, u = 0).
inline InitialData uniform_initial_data(double phi, double theta) {
    return {[phi](const Point&) { return phi; }, [theta](const Point&) { return theta; },
            [](const Point&) { return Point(0.0, 0.0); }};
}

/// Interpolates the data, sets pi = 0 and obtains mu from the L2 projection
/// <mu, xi> = gamma <grad phi, grad xi> + <d_phi psi(phi, theta), xi>.
inline State initial_state(const DiscretizationPtr& disc, const MaterialModel& model, const InitialData& data) {
    const auto& d = *disc;
    State s{0.0,
            fe::interpolate(d.p1(), data.phi),
            FeFunction(d.p1()),
            fe::interpolate(d.p1(), data.theta),
            fe::interpolate(d.p2_vector(), data.u),
            FeFunction(d.p1_meanfree()),
            0.0};
    const auto& th = s.theta.coefficients();
    for (int i = 0; i < th.size(); ++i) {
        if (!(th[i] > 0.0)) {
            std::ostringstream os;
            os << "initial_state: nonpositive inverse temperature " << th[i] << " at node " << i;
            throw DomainError(os.str());
        }
    }
    const auto& tab = d.tab_p1();
    std::vector<la::Triplet> mass;
    Vector rhs = Vector::Zero(d.p1_dofs());
    const auto& phi = s.phi.coefficients();
    for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
        const auto dofs = d.p1()->element_dofs(t);
        for (int q = 0; q < tab.num_points(); ++q) {
            const double w = tab.weight(t, q);
            double pv = 0.0, tv = 0.0;
            Point gp = Point::Zero();
            for (int k = 0; k < 3; ++k) {
                pv += tab.value(q, k) * phi[dofs[k]];
                tv += tab.value(q, k) * th[dofs[k]];
                gp += phi[dofs[k]] * tab.grad(t, q, k);
            }
            const double dpsi = model.dphi_psi(pv, tv);
            for (int a = 0; a < 3; ++a) {
                rhs[dofs[a]] += w * (model.gamma() * gp.dot(tab.grad(t, q, a)) + dpsi * tab.value(q, a));
                for (int b = 0; b < 3; ++b) mass.emplace_back(dofs[a], dofs[b], w * tab.value(q, a) * tab.value(q, b));
            }
        }
    }
    const auto M = la::from_triplets(d.p1_dofs(), d.p1_dofs(), mass);
    s.mu.coefficients() = la::lu_solve(M, rhs);
    return s;
}

namespace detail {

template <typename T>
struct V2 {
    T x{}, y{};
};

template <typename A, typename B>
auto dot(const V2<A>& a, const V2<B>& b) {
    return a.x * b.x + a.y * b.y;
}

/// Element residual of all 24 local rows. T is the unknown scalar type, S the type
/// of starred quantities (double suffices when they come from the old level).
template <typename T, typename S>
void element_residual(const Discretization& d, const MaterialModel& m, const StepperConfig& cfg, std::size_t t,
                      const std::array<T, local_unknowns>& x, const std::array<double, local_unknowns>& xo,
                      std::array<T, local_unknowns>& R) {
    const bool star_old = cfg.star_rule == StarRule::old_level;
    const auto& tab1 = d.tab_p1();
    const auto& tab2 = d.tab_p2();
    const double inv_tau = 1.0 / cfg.tau;
    const double gamma = m.gamma();
    for (auto& r : R) r = T(0.0);

    for (int q = 0; q < tab1.num_points(); ++q) {
        const double w = tab1.weight(t, q);
        std::array<double, 3> N;
        std::array<Point, 3> G;
        std::array<double, 6> P;
        std::array<Point, 6> D;
        for (int k = 0; k < 3; ++k) {
            N[k] = tab1.value(q, k);
            G[k] = tab1.grad(t, q, k);
        }
        for (int k = 0; k < 6; ++k) {
            P[k] = tab2.value(q, k);
            D[k] = tab2.grad(t, q, k);
        }

        // New level.
        T phi1(0.0), mu1(0.0), th1(0.0), pi1(0.0);
        V2<T> gphi1, gmu1, gth1;
        double phi0 = 0.0, mu0 = 0.0, th0 = 0.0;
        V2<double> gphi0;
        for (int k = 0; k < 3; ++k) {
            phi1 += N[k] * x[slot::phi + k];
            mu1 += N[k] * x[slot::mu + k];
            th1 += N[k] * x[slot::theta + k];
            pi1 += N[k] * x[slot::pi + k];
            gphi1.x += G[k].x() * x[slot::phi + k];
            gphi1.y += G[k].y() * x[slot::phi + k];
            gmu1.x += G[k].x() * x[slot::mu + k];
            gmu1.y += G[k].y() * x[slot::mu + k];
            gth1.x += G[k].x() * x[slot::theta + k];
            gth1.y += G[k].y() * x[slot::theta + k];
            phi0 += N[k] * xo[slot::phi + k];
            mu0 += N[k] * xo[slot::mu + k];
            th0 += N[k] * xo[slot::theta + k];
            gphi0.x += G[k].x() * xo[slot::phi + k];
            gphi0.y += G[k].y() * xo[slot::phi + k];
        }
        if (!(ad::value_of(th1) > cfg.theta_floor)) {
            std::ostringstream os;
            os << "inverse temperature " << ad::value_of(th1) << " at or below floor " << cfg.theta_floor
               << " in triangle " << t;
            throw PositivityViolation(os.str(), ad::value_of(th1));
        }
        V2<T> u1, gux1, guy1;  // gux1 = grad of u_x
        V2<double> u0, gux0, guy0;
        for (int k = 0; k < 6; ++k) {
            const T& ax = x[slot::ux + k];
            const T& ay = x[slot::uy + k];
            u1.x += P[k] * ax;
            u1.y += P[k] * ay;
            gux1.x += D[k].x() * ax;
            gux1.y += D[k].y() * ax;
            guy1.x += D[k].x() * ay;
            guy1.y += D[k].y() * ay;
            const double bx = xo[slot::ux + k], by = xo[slot::uy + k];
            u0.x += P[k] * bx;
            u0.y += P[k] * by;
            gux0.x += D[k].x() * bx;
            gux0.y += D[k].y() * bx;
            guy0.x += D[k].x() * by;
            guy0.y += D[k].y() * by;
        }

        // Starred quantities.
        S phis, mus, ths;
        V2<S> gphis, us;
        if (star_old) {
            phis = phi0;
            mus = mu0;
            ths = th0;
            gphis = {S(gphi0.x), S(gphi0.y)};
            us = {S(u0.x), S(u0.y)};
        } else if constexpr (std::is_same_v<S, T>) {
            phis = phi1;
            mus = mu1;
            ths = th1;
            gphis = gphi1;
            us = u1;
        } else {
            throw InvalidArgument("element_residual: new-level starring needs S = T");
        }

        // Midpoint velocity and its symmetric gradient.
        const V2<T> uh{0.5 * (u1.x + u0.x), 0.5 * (u1.y + u0.y)};
        const V2<T> guxh{0.5 * (gux1.x + gux0.x), 0.5 * (gux1.y + gux0.y)};
        const V2<T> guyh{0.5 * (guy1.x + guy0.x), 0.5 * (guy1.y + guy0.y)};
        const T d00 = guxh.x, d11 = guyh.y, d01 = 0.5 * (guxh.y + guyh.x);
        const T dsq = d00 * d00 + d11 * d11 + 2.0 * d01 * d01;
        const T div_uh = guxh.x + guyh.y;

        const S eta_s = m.viscosity(phis, ths);
        const physics::Mobility L = m.mobility(phis, ths);
        const S grad2_s = gphis.x * gphis.x + gphis.y * gphis.y;
        const S s_s = m.entropy(phis, ths, grad2_s);
        const S kor = gamma / ths;  // sigma* = kor grad phi* (x) grad phi*
        const S c_s = (s_s + phis * mus) / (ths * ths);

        const T inv_th1 = 1.0 / th1;
        const T gphis_gth1 = gphis.x * gth1.x + gphis.y * gth1.y;
        const T gphis_uh = gphis.x * uh.x + gphis.y * uh.y;
        // (phi*/theta) grad mu - sigma* grad theta / theta
        const V2<T> A{(phis * gmu1.x - kor * gphis.x * gphis_gth1) * inv_th1,
                      (phis * gmu1.y - kor * gphis.y * gphis_gth1) * inv_th1};
        const V2<T> F{A.x - c_s * gth1.x, A.y - c_s * gth1.y};
        const V2<T> sig_u{kor * gphis.x * gphis_uh, kor * gphis.y * gphis_uh};

        const T dphi = (phi1 - phi0) * inv_tau;
        const T de = (m.internal_energy(phi1, th1) - T(m.internal_energy(phi0, th0))) * inv_tau;
        const T dpsi = m.split_derivative(phi1, phi0, th1);

        // Coefficients of (test value, test gradient) for each scalar row block.
        const T phase_n = dphi;
        const V2<T> phase_g{-phis * uh.x + L.l11 * gmu1.x - L.l12 * gth1.x,
                            -phis * uh.y + L.l11 * gmu1.y - L.l12 * gth1.y};
        const T pot_n = mu1 - dpsi;
        const V2<T> pot_g{-gamma * gphi1.x, -gamma * gphi1.y};
        const T en_n = de - eta_s * dsq - (A.x * uh.x + A.y * uh.y) + c_s * (uh.x * gth1.x + uh.y * gth1.y);
        const V2<T> en_g{L.l12 * gmu1.x - L.l22 * gth1.x - sig_u.x - c_s * th1 * uh.x,
                         L.l12 * gmu1.y - L.l22 * gth1.y - sig_u.y - c_s * th1 * uh.y};

        for (int k = 0; k < 3; ++k) {
            const double n = w * N[k], gx = w * G[k].x(), gy = w * G[k].y();
            R[slot::phi + k] += n * phase_n + gx * phase_g.x + gy * phase_g.y;
            R[slot::mu + k] += n * pot_n + gx * pot_g.x + gy * pot_g.y;
            R[slot::theta + k] += n * en_n + gx * en_g.x + gy * en_g.y;
            R[slot::pi + k] += n * div_uh;
        }

        // Momentum: component c tested with P_m e_c.
        const T conv_x = 0.5 * (us.x * guxh.x + us.y * guxh.y);
        const T conv_y = 0.5 * (us.x * guyh.x + us.y * guyh.y);
        const T mom_px = (u1.x - u0.x) * inv_tau + conv_x + F.x;
        const T mom_py = (u1.y - u0.y) * inv_tau + conv_y + F.y;
        const V2<T> mom_gx{eta_s * d00 - pi1 - 0.5 * us.x * uh.x, eta_s * d01 - 0.5 * us.y * uh.x};
        const V2<T> mom_gy{eta_s * d01 - 0.5 * us.x * uh.y, eta_s * d11 - pi1 - 0.5 * us.y * uh.y};
        for (int k = 0; k < 6; ++k) {
            const double p = w * P[k], gx = w * D[k].x(), gy = w * D[k].y();
            R[slot::ux + k] += p * mom_px + gx * mom_gx.x + gy * mom_gx.y;
            R[slot::uy + k] += p * mom_py + gx * mom_gy.x + gy * mom_gy.y;
        }
    }
}

}  // namespace detail

/// Newton solve statistics of one step.
struct NewtonStats {
    int iterations = 0;
    double residual_norm = 0.0;
};

struct StepResult {
    State state;
    NewtonStats newton;
    /// Minimum nodal theta of the new level fell to 1/2 + 1e-6 or below, where the
    /// default convex-concave split loses convexity.
    bool split_warning = false;
};

class Stepper {
public:
    Stepper(DiscretizationPtr disc, MaterialModel model, StepperConfig cfg)
        : disc_(std::move(disc)), model_(std::move(model)), cfg_(cfg) {
        if (!disc_) throw InvalidArgument("Stepper: null discretization");
        cfg_.validate();
    }

    const Discretization& discretization() const noexcept { return *disc_; }
    const DiscretizationPtr& discretization_ptr() const noexcept { return disc_; }
    const MaterialModel& model() const noexcept { return model_; }
    const StepperConfig& config() const noexcept { return cfg_; }

    Vector pack(const State& s) const {
        const auto& d = *disc_;
        Vector x(d.num_unknowns());
        x.segment(d.phi_offset(), d.p1_dofs()) = s.phi.coefficients();
        x.segment(d.mu_offset(), d.p1_dofs()) = s.mu.coefficients();
        x.segment(d.theta_offset(), d.p1_dofs()) = s.theta.coefficients();
        x.segment(d.u_offset(), 2 * d.p2_scalar_dofs()) = s.u.coefficients();
        x.segment(d.pi_offset(), d.p1_dofs()) = s.pi.coefficients();
        x[d.lambda_index()] = s.multiplier;
        return x;
    }

    State unpack(const Vector& x, double time) const {
        const auto& d = *disc_;
        if (x.size() != d.num_unknowns()) throw InvalidArgument("unpack: wrong vector length");
        return State{time,
                     FeFunction(d.p1(), x.segment(d.phi_offset(), d.p1_dofs())),
                     FeFunction(d.p1(), x.segment(d.mu_offset(), d.p1_dofs())),
                     FeFunction(d.p1(), x.segment(d.theta_offset(), d.p1_dofs())),
                     FeFunction(d.p2_vector(), x.segment(d.u_offset(), 2 * d.p2_scalar_dofs())),
                     FeFunction(d.p1_meanfree(), x.segment(d.pi_offset(), d.p1_dofs())),
                     x[d.lambda_index()]};
    }

    /// Residual of all rows at the packed new-level guess @p x given packed old level @p xo.
    Vector residual(const Vector& xo, const Vector& x) const {
        const auto& d = *disc_;
        check_sizes(xo, x);
        Vector R = Vector::Zero(d.num_unknowns());
        std::array<double, local_unknowns> xl{}, xol{}, rl{};
        for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
            const auto& ix = d.element_index(t);
            for (int i = 0; i < local_unknowns; ++i) {
                xl[i] = x[ix[i]];
                xol[i] = xo[ix[i]];
            }
            detail::element_residual<double, double>(d, model_, cfg_, t, xl, xol, rl);
            for (int i = 0; i < local_unknowns; ++i) R[ix[i]] += rl[i];
        }
        const double lambda = x[d.lambda_index()];
        const auto& mi = d.p1_integrals();
        R.segment(d.pi_offset(), d.p1_dofs()) += lambda * mi;
        R[d.lambda_index()] = mi.dot(x.segment(d.pi_offset(), d.p1_dofs()));
        return R;
    }

    /// Exact derivative of residual() with respect to @p x.
    la::SparseMatrix jacobian(const Vector& xo, const Vector& x) const {
        if (cfg_.star_rule == StarRule::old_level) return jacobian_impl<false>(xo, x);
        return jacobian_impl<true>(xo, x);
    }

    Vector assemble_residual(const State& old, const State& guess) const { return residual(pack(old), pack(guess)); }
    la::SparseMatrix assemble_jacobian(const State& old, const State& guess) const {
        return jacobian(pack(old), pack(guess));
    }

    /// Advances one time step by Newton's method started from the old level.
    StepResult step(const State& old, long step_index = 0) const {
        const Vector xo = pack(old);
        double last = std::numeric_limits<double>::quiet_NaN();
        la::NewtonResult nr;
        try {
            nr = la::newton(
                [&](const Vector& x) {
                    Vector r = residual(xo, x);
                    last = r.norm();
                    return r;
                },
                [&](const Vector& x) { return jacobian(xo, x); }, xo, cfg_.newton);
        } catch (const NonConvergence& e) {
            throw StepFailure(step_message(step_index, e.what()), StepFailure::Kind::nonconvergence, step_index,
                              e.last_residual());
        } catch (const PositivityViolation& e) {
            throw StepFailure(step_message(step_index, e.what()), StepFailure::Kind::positivity, step_index, last);
        } catch (const FactorizationError& e) {
            throw StepFailure(step_message(step_index, e.what()), StepFailure::Kind::factorization, step_index, last);
        }
        StepResult out{unpack(nr.x, old.time + cfg_.tau), {nr.iterations, nr.residual_norm}, false};
        const double min_theta = out.state.theta.coefficients().minCoeff();
        if (!(min_theta > cfg_.theta_floor)) {
            std::ostringstream os;
            os << "nodal inverse temperature " << min_theta << " at or below floor " << cfg_.theta_floor;
            throw StepFailure(step_message(step_index, os.str()), StepFailure::Kind::positivity, step_index,
                              nr.residual_norm);
        }
        out.split_warning = min_theta <= 0.5 + 1e-6;
        return out;
    }

    /// <div u^{n+1/2}, q_i> + lambda <1, q_i> for every P1 basis function q_i.
    Vector incompressibility_residual(const State& old, const State& next) const {
        const auto& d = *disc_;
        const FeFunction mid = 0.5 * (old.u + next.u);
        return fe::divergence_moments(mid, *d.p1(), d.quad_degree()) + next.multiplier * d.p1_integrals();
    }

private:
    static std::string step_message(long step, const std::string& what) {
        return "step " + std::to_string(step) + ": " + what;
    }

    void check_sizes(const Vector& xo, const Vector& x) const {
        if (xo.size() != disc_->num_unknowns() || x.size() != disc_->num_unknowns())
            throw InvalidArgument("Stepper: unknown vector has the wrong length");
    }

    template <bool StarNew>
    la::SparseMatrix jacobian_impl(const Vector& xo, const Vector& x) const {
        using Dual = ad::Dual<local_unknowns>;
        using Star = std::conditional_t<StarNew, Dual, double>;
        const auto& d = *disc_;
        check_sizes(xo, x);
        la::SparseMatrix J = d.jacobian_pattern();
        double* val = J.valuePtr();
        std::fill(val, val + J.nonZeros(), 0.0);
        std::array<Dual, local_unknowns> xl, rl;
        std::array<double, local_unknowns> xol{};
        for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
            const auto& ix = d.element_index(t);
            for (int i = 0; i < local_unknowns; ++i) {
                xl[i] = Dual::variable(x[ix[i]], i);
                xol[i] = xo[ix[i]];
            }
            detail::element_residual<Dual, Star>(d, model_, cfg_, t, xl, xol, rl);
            const int* slots = d.element_slots(t);
            for (int r = 0; r < local_unknowns; ++r)
                for (int c = 0; c < local_unknowns; ++c) val[slots[r * local_unknowns + c]] += rl[r].d[c];
        }
        const auto& mi = d.p1_integrals();
        for (int i = 0; i < d.p1_dofs(); ++i) {
            val[d.lambda_column_slots()[i]] += mi[i];
            val[d.lambda_row_slots()[i]] += mi[i];
        }
        return J;
    }

    DiscretizationPtr disc_;
    MaterialModel model_;
    StepperConfig cfg_;
};

}  // namespace chnst::scheme
