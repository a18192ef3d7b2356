/// @file quadrature.hpp
/// @brief Quadrature rules on the reference triangle {(0,0), (1,0), (0,1)}.
///
/// Points are stored in barycentric coordinates (l0, l1, l2) with respect to the
/// reference vertices, so the reference coordinates are (x, y) = (l1, l2). Weights
/// are normalized to the reference area: they sum to 1/2.
#pragma once

#include "chnst/errors.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

namespace chnst::mesh {

struct QuadRule {
    std::vector<std::array<double, 3>> points;
    std::vector<double> weights;
    int degree = 0;

    std::size_t size() const noexcept { return weights.size(); }
};

inline constexpr int max_quad_degree = 20;

namespace detail {

inline void add_s3(QuadRule& r, double w) {
    r.points.push_back({1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    r.weights.push_back(w);
}

// Orbit of (a, b, b).
inline void add_s21(QuadRule& r, double a, double w) {
    const double b = 0.5 * (1.0 - a);
    r.points.push_back({a, b, b});
    r.points.push_back({b, a, b});
    r.points.push_back({b, b, a});
    for (int k = 0; k < 3; ++k) r.weights.push_back(w);
}

// Orbit of (a, b, c), all distinct.
inline void add_s111(QuadRule& r, double a, double b, double w) {
    const double c = 1.0 - a - b;
    const std::array<std::array<double, 3>, 6> perms{{
        {a, b, c}, {a, c, b}, {b, a, c}, {b, c, a}, {c, a, b}, {c, b, a}}};
    for (const auto& p : perms) {
        r.points.push_back(p);
        r.weights.push_back(w);
    }
}

/// Gauss-Legendre nodes and weights on [0, 1] (weights sum to 1).
inline void gauss_legendre_01(int m, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(m), 0.0);
    weights.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = z;
            for (int k = 2; k <= m; ++k) {
                const double pk = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            if (m == 1) p0 = 1.0;
            dp = m * (z * p1 - p0) / (z * z - 1.0);
            const double dz = p1 / dp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        nodes[static_cast<std::size_t>(i)] = 0.5 * (1.0 - z);
        weights[static_cast<std::size_t>(i)] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
}

// Collapsed (Duffy) tensor Gauss rule: x = s, y = t(1-s), dA = (1-s) ds dt.
inline QuadRule conical_product(int degree) {
    const int m = (degree + 3) / 2;
    std::vector<double> gx, gw;
    gauss_legendre_01(m, gx, gw);
    QuadRule r;
    r.degree = 2 * m - 2;
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const double s = gx[static_cast<std::size_t>(i)];
            const double t = gx[static_cast<std::size_t>(j)];
            const double x = s;
            const double y = t * (1.0 - s);
            r.points.push_back({1.0 - x - y, x, y});
            r.weights.push_back(gw[static_cast<std::size_t>(i)] * gw[static_cast<std::size_t>(j)] * (1.0 - s));
        }
    }
    return r;
}

}  // namespace detail

/// Returns a rule with strictly positive weights that integrates every bivariate
/// polynomial of total degree <= @p degree exactly.
inline QuadRule quad_rule(int degree) {
    if (degree < 1 || degree > max_quad_degree) throw UnsupportedDegree(degree);
    QuadRule r;
    switch (degree) {
        case 1:
            detail::add_s3(r, 0.5);
            r.degree = 1;
            return r;
        case 2:
            detail::add_s21(r, 2.0 / 3.0, 1.0 / 6.0);
            r.degree = 2;
            return r;
        case 3:
        case 4:
        case 5: {
            // Radon's seven-point rule.
            const double sq = std::sqrt(15.0);
            detail::add_s3(r, 9.0 / 80.0);
            detail::add_s21(r, (9.0 + 2.0 * sq) / 21.0, (155.0 - sq) / 2400.0);
            detail::add_s21(r, (9.0 - 2.0 * sq) / 21.0, (155.0 + sq) / 2400.0);
            r.degree = 5;
            return r;
        }
        case 6:
            // Dunavant's twelve-point rule, parameters re-solved to full double precision.
            detail::add_s21(r, 0.5014265096581795732, 0.05839313786318985365);
            detail::add_s21(r, 0.8738219710169954503, 0.02542245318510344174);
            detail::add_s111(r, 0.05314504984481680547, 0.3103524510337845735, 0.04142553780918668564);
            r.degree = 6;
            return r;
        default:
            return detail::conical_product(degree);
    }
}

}  // namespace chnst::mesh
