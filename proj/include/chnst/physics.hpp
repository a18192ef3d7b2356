/// @file physics.hpp
/// @brief Material model of the non-isothermal Cahn-Hilliard-Navier-Stokes system.
///
/// The gradient-free free energy is
///     psi(phi, theta) = log(theta) + (2 theta - 1) W(phi),   W(phi) = phi^2 (1 - phi)^2,
/// the full free energy adds (gamma/2) |grad phi|^2, and
///     e = 1/theta + 2 W(phi),   s = 1 - log(theta) + W(phi) - (gamma/2) |grad phi|^2.
/// theta is the inverse temperature. The convex-concave split of psi in phi is
///     psi_vex = (2 theta - 1)(phi^4 - 2 phi^3 + 3/2 phi^2),   psi_cav = -(2 theta - 1) phi^2 / 2,
/// which is a valid split whenever theta > 1/2.
///
/// Member templates are generic in the scalar type so the element kernels can
/// differentiate through them; the free eval_* functions are the checked double API.
#pragma once

#include "chnst/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace chnst::physics {

/// Scalar multiples of the 2x2 identity for the blocks L11, L12, L22.
struct Mobility {
    double l11 = 1e-2;
    double l12 = 0.0;
    double l22 = 1e-2;
};

struct ModelParameters {
    double gamma = 1e-3;
    double viscosity_base = 1e-3;
    double viscosity_slope = 1.0 / 40.0;
    Mobility mobility{};
};

class MaterialModel {
public:
    MaterialModel() = default;
    explicit MaterialModel(const ModelParameters& p) : p_(p) {}

    const ModelParameters& parameters() const noexcept { return p_; }
    double gamma() const noexcept { return p_.gamma; }

    template <typename T>
    static T double_well(const T& phi) {
        const T a = phi * (1.0 - phi);
        return a * a;
    }
    template <typename T>
    static T double_well_derivative(const T& phi) {
        return 2.0 * phi * (1.0 - phi) * (1.0 - 2.0 * phi);
    }

    template <typename T>
    T psi(const T& phi, const T& theta) const {
        using std::log;
        return log(theta) + (2.0 * theta - 1.0) * double_well(phi);
    }
    /// Carries the phi-independent log(theta) so that psi_vex + psi_cav = psi.
    template <typename T>
    T psi_vex(const T& phi, const T& theta) const {
        using std::log;
        const T phi2 = phi * phi;
        return log(theta) + (2.0 * theta - 1.0) * (phi2 * phi2 - 2.0 * phi2 * phi + 1.5 * phi2);
    }
    template <typename T>
    T psi_cav(const T& phi, const T& theta) const {
        return -0.5 * (2.0 * theta - 1.0) * phi * phi;
    }
    template <typename T>
    T dphi_psi_vex(const T& phi, const T& theta) const {
        return (2.0 * theta - 1.0) * phi * (4.0 * phi * phi - 6.0 * phi + 3.0);
    }
    template <typename T>
    T dphi_psi_cav(const T& phi, const T& theta) const {
        return -(2.0 * theta - 1.0) * phi;
    }
    template <typename T>
    T dphi_psi(const T& phi, const T& theta) const {
        return (2.0 * theta - 1.0) * double_well_derivative(phi);
    }
    template <typename T>
    T dtheta_psi(const T& phi, const T& theta) const {
        return 1.0 / theta + 2.0 * double_well(phi);
    }

    /// Split derivative: d/dphi psi_vex at the new level plus d/dphi psi_cav at the old level.
    template <typename T, typename U>
    auto split_derivative(const T& phi_new, const U& phi_old, const T& theta_new) const {
        return dphi_psi_vex(phi_new, theta_new) + dphi_psi_cav(T(phi_old), theta_new);
    }

    template <typename T>
    T internal_energy(const T& phi, const T& theta) const {
        return 1.0 / theta + 2.0 * double_well(phi);
    }
    /// @p grad2 is |grad phi|^2.
    template <typename T>
    T entropy(const T& phi, const T& theta, const T& grad2) const {
        using std::log;
        return 1.0 - log(theta) + double_well(phi) - 0.5 * p_.gamma * grad2;
    }
    template <typename T>
    T viscosity(const T& phi, const T& /*theta*/) const {
        const T a = phi + 1.0;
        return p_.viscosity_base + p_.viscosity_slope * a * a;
    }
    template <typename T>
    Mobility mobility(const T& /*phi*/, const T& /*theta*/) const {
        return p_.mobility;
    }

private:
    ModelParameters p_{};
};

inline void require_positive_theta(double theta, const char* who) {
    if (!(theta > 0.0)) {
        std::ostringstream os;
        os << who << ": inverse temperature must be positive, got " << theta;
        throw DomainError(os.str());
    }
}

inline double eval_internal_energy(const MaterialModel& m, double phi, double theta) {
    require_positive_theta(theta, "eval_internal_energy");
    return m.internal_energy(phi, theta);
}

inline double eval_entropy(const MaterialModel& m, double phi, double theta, double grad2) {
    require_positive_theta(theta, "eval_entropy");
    if (grad2 < 0.0) throw InvalidArgument("eval_entropy: |grad phi|^2 must be nonnegative");
    return m.entropy(phi, theta, grad2);
}

struct SplitDerivative {
    double value = 0.0;
    /// Set when 2 theta - 1 <= 0: the split is no longer convex-concave there.
    bool convexity_warning = false;
};

inline SplitDerivative eval_split_derivative(const MaterialModel& m, double phi_new, double phi_old, double theta_new) {
    require_positive_theta(theta_new, "eval_split_derivative");
    return {m.split_derivative(phi_new, phi_old, theta_new), 2.0 * theta_new - 1.0 <= 0.0};
}

inline double eval_viscosity(const MaterialModel& m, double phi, double theta) {
    require_positive_theta(theta, "eval_viscosity");
    return m.viscosity(phi, theta);
}

inline Mobility eval_mobility(const MaterialModel& m, double phi, double theta) {
    require_positive_theta(theta, "eval_mobility");
    return m.mobility(phi, theta);
}

/// Smallest eigenvalue of [[L11, -L12], [-L12, L22]] (each block a multiple of I,
/// so the 4x4 matrix has the same spectrum with doubled multiplicity).
inline double min_mobility_eigenvalue(const Mobility& L) {
    const double mean = 0.5 * (L.l11 + L.l22);
    const double rad = std::hypot(0.5 * (L.l11 - L.l22), L.l12);
    return mean - rad;
}

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double at(int i, int samples) const { return samples <= 1 ? lo : lo + (hi - lo) * i / (samples - 1); }
};

struct Check {
    std::string name;
    bool passed = false;
    /// Worst observed violation (0 when nothing was violated) or the offending value.
    double worst = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<Check> checks;

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
    const Check* find(const std::string& prefix) const {
        for (const auto& c : checks)
            if (c.name.rfind(prefix, 0) == 0) return &c;
        return nullptr;
    }
    std::string to_string() const {
        std::ostringstream os;
        os.precision(3);
        for (const auto& c : checks) {
            std::string label = c.name;
            if (!c.passed) {
                const auto close = label.find(')');
                if (label.front() == '(' && close != std::string::npos)
                    label.insert(close + 1, " violated:");
                else
                    label += " violated";
            }
            os << (c.passed ? "  pass  " : "  FAIL  ") << label << "  worst=" << std::scientific << c.worst
               << (c.detail.empty() ? "" : "  " + c.detail) << "\n";
        }
        os << (all_passed() ? "all checks passed" : "some checks violated") << "\n";
        return os.str();
    }
};

struct ValidationTolerances {
    double fd_step = 1e-5;
    double fd_second_step = 1e-4;
    double energy_identity = 1e-7;
    double entropy_identity = 1e-12;
    double split_identity = 1e-13;
    /// Slack on the sign of finite-difference second derivatives.
    double convexity_slack = 1e-6;
};

/// Sweeps a samples x samples grid of (phi, theta) and checks the structural
/// assumptions on gamma, eta, L and psi together with the identities e = d_theta psi~
/// and s = theta e - psi~.
inline ValidationReport validate_model(const MaterialModel& m, Range phi_range, Range theta_range, int samples,
                                       const ValidationTolerances& tol = {}) {
    if (samples < 1) throw InvalidArgument("validate_model: samples must be >= 1");
    if (!(theta_range.lo > 0.0) || theta_range.hi < theta_range.lo || phi_range.hi < phi_range.lo)
        throw InvalidArgument("validate_model: ranges must be nonempty with positive theta");

    ValidationReport rep;
    const double gamma = m.gamma();
    rep.checks.push_back({"(A1) gamma > 0", gamma > 0.0, gamma > 0.0 ? 0.0 : gamma, ""});

    double eta_min = std::numeric_limits<double>::infinity();
    double eig_min = std::numeric_limits<double>::infinity();
    double vex_worst = 0.0, cav_worst = 0.0, conc_worst = 0.0;
    double e_worst = 0.0, s_worst = 0.0, split_worst = 0.0;
    const double hs = tol.fd_second_step;
    for (int i = 0; i < samples; ++i) {
        const double phi = phi_range.at(i, samples);
        for (int j = 0; j < samples; ++j) {
            const double th = theta_range.at(j, samples);
            eta_min = std::min(eta_min, m.viscosity(phi, th));
            const Mobility L = m.mobility(phi, th);
            eig_min = std::min(eig_min, min_mobility_eigenvalue(L));

            const double d2_vex =
                (m.psi_vex(phi + hs, th) - 2.0 * m.psi_vex(phi, th) + m.psi_vex(phi - hs, th)) / (hs * hs);
            const double d2_cav =
                (m.psi_cav(phi + hs, th) - 2.0 * m.psi_cav(phi, th) + m.psi_cav(phi - hs, th)) / (hs * hs);
            const double ht = std::min(hs, 0.5 * th);
            const double d2_theta = (m.psi(phi, th + ht) - 2.0 * m.psi(phi, th) + m.psi(phi, th - ht)) / (ht * ht);
            vex_worst = std::max(vex_worst, -d2_vex);
            cav_worst = std::max(cav_worst, d2_cav);
            conc_worst = std::max(conc_worst, d2_theta);

            const double h1 = std::min(tol.fd_step, 0.5 * th);
            const double fd_e = (m.psi(phi, th + h1) - m.psi(phi, th - h1)) / (2.0 * h1);
            e_worst = std::max(e_worst, std::abs(fd_e - m.internal_energy(phi, th)));

            const double g2 = 10.0 * j / std::max(1, samples - 1);
            const double s_alt = th * m.internal_energy(phi, th) - (m.psi(phi, th) + 0.5 * gamma * g2);
            s_worst = std::max(s_worst, std::abs(m.entropy(phi, th, g2) - s_alt));
            split_worst = std::max(split_worst, std::abs(m.psi_vex(phi, th) + m.psi_cav(phi, th) - m.psi(phi, th)));
        }
    }
    rep.checks.push_back({"(A2) viscosity > 0", eta_min > 0.0, eta_min > 0.0 ? 0.0 : -eta_min,
                          "min eta = " + std::to_string(eta_min)});
    rep.checks.push_back({"(A3) mobility matrix symmetric positive definite", eig_min > 0.0,
                          eig_min > 0.0 ? 0.0 : -eig_min, "min eigenvalue = " + std::to_string(eig_min)});
    rep.checks.push_back({"(A4) psi_vex convex in phi", vex_worst <= tol.convexity_slack, vex_worst, ""});
    rep.checks.push_back({"(A4) psi_cav concave in phi", cav_worst <= tol.convexity_slack, cav_worst, ""});
    rep.checks.push_back({"(A4) psi concave in theta", conc_worst <= tol.convexity_slack, conc_worst, ""});
    rep.checks.push_back({"identity e = d_theta psi", e_worst <= tol.energy_identity, e_worst, ""});
    rep.checks.push_back({"identity s = theta e - psi", s_worst <= tol.entropy_identity, s_worst, ""});
    rep.checks.push_back({"identity psi_vex + psi_cav = psi", split_worst <= tol.split_identity, split_worst, ""});
    return rep;
}

/// Sampling box on which the default model is validated.
inline constexpr Range default_phi_range{-0.5, 1.5};
inline constexpr Range default_theta_range{0.55, 2.0};

}  // namespace chnst::physics
