/// @file dual.hpp
/// @brief Forward-mode dual numbers with a fixed number of derivative directions.
///
/// The element kernels are templates on their scalar type; instantiating them with
/// Dual<N> yields the exact element Jacobian alongside the residual.
#pragma once

#include <Eigen/Core>

#include <cmath>

namespace chnst::ad {

template <int N>
struct Dual {
    using Grad = Eigen::Matrix<double, N, 1>;

    double v = 0.0;
    Grad d = Grad::Zero();

    Dual() = default;
    Dual(double value) : v(value) {}  // NOLINT: implicit promotion of constants
    Dual(double value, const Grad& grad) : v(value), d(grad) {}

    /// Independent variable number @p i with value @p value.
    static Dual variable(double value, int i) {
        Dual x(value);
        x.d[i] = 1.0;
        return x;
    }

    Dual& operator+=(const Dual& o) {
        v += o.v;
        d += o.d;
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        d -= o.d;
        return *this;
    }
    Dual& operator*=(const Dual& o) {
        d = d * o.v + o.d * v;
        v *= o.v;
        return *this;
    }
    Dual& operator/=(const Dual& o) {
        const double inv = 1.0 / o.v;
        d = (d - (v * inv) * o.d) * inv;
        v *= inv;
        return *this;
    }
    Dual& operator+=(double a) {
        v += a;
        return *this;
    }
    Dual& operator-=(double a) {
        v -= a;
        return *this;
    }
    Dual& operator*=(double a) {
        v *= a;
        d *= a;
        return *this;
    }
    Dual& operator/=(double a) { return *this *= (1.0 / a); }

    friend Dual operator-(const Dual& a) { return Dual(-a.v, -a.d); }

    friend Dual operator+(Dual a, const Dual& b) { return a += b; }
    friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
    friend Dual operator*(Dual a, const Dual& b) { return a *= b; }
    friend Dual operator/(Dual a, const Dual& b) { return a /= b; }

    friend Dual operator+(Dual a, double b) { return a += b; }
    friend Dual operator+(double a, Dual b) { return b += a; }
    friend Dual operator-(Dual a, double b) { return a -= b; }
    friend Dual operator-(double a, const Dual& b) { return Dual(a - b.v, -b.d); }
    friend Dual operator*(Dual a, double b) { return a *= b; }
    friend Dual operator*(double a, Dual b) { return b *= a; }
    friend Dual operator/(Dual a, double b) { return a /= b; }
    friend Dual operator/(double a, const Dual& b) {
        const double inv = 1.0 / b.v;
        return Dual(a * inv, (-a * inv * inv) * b.d);
    }

    friend bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
    friend bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
};

template <int N>
Dual<N> log(const Dual<N>& x) {
    return Dual<N>(std::log(x.v), x.d / x.v);
}

template <int N>
Dual<N> sqrt(const Dual<N>& x) {
    const double s = std::sqrt(x.v);
    return Dual<N>(s, x.d * (0.5 / s));
}

inline double value_of(double x) { return x; }
template <int N>
double value_of(const Dual<N>& x) {
    return x.v;
}

}  // namespace chnst::ad
