/// @file la.hpp
/// @brief Sparse matrices, a direct sparse LU solve and a damped Newton driver.
///
/// Factorizations use UMFPACK through Eigen's wrapper. A failed factorization is
/// repeated with Eigen's SparseLU to locate the zero pivot for the error report.
#pragma once

#include "chnst/errors.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <Eigen/UmfPackSupport>

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace chnst::la {

using Vector = Eigen::VectorXd;
/// Compressed column storage; duplicates are summed when built from triplets.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Triplet = Eigen::Triplet<double, int>;

inline SparseMatrix from_triplets(int rows, int cols, const std::vector<Triplet>& entries) {
    for (const auto& t : entries)
        if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols)
            throw InvalidArgument("from_triplets: entry (" + std::to_string(t.row()) + "," + std::to_string(t.col()) +
                                  ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
    SparseMatrix A(rows, cols);
    A.setFromTriplets(entries.begin(), entries.end());
    A.makeCompressed();
    return A;
}

inline constexpr double lu_residual_bound = 1e-10;

/// Unsymmetric multifrontal sparse LU. The symbolic analysis is kept and reused
/// by factorize() as long as the sparsity pattern does not change.
class SparseLu {
public:
    void factorize(const SparseMatrix& A) {
        if (A.rows() != A.cols()) throw InvalidArgument("lu: matrix must be square");
        if (!same_pattern(A)) {
            lu_.analyzePattern(A);
            outer_.assign(A.outerIndexPtr(), A.outerIndexPtr() + A.outerSize() + 1);
            inner_.assign(A.innerIndexPtr(), A.innerIndexPtr() + A.nonZeros());
        }
        lu_.factorize(A);
        if (lu_.info() != Eigen::Success) {
            outer_.clear();
            A_ = nullptr;
            const long pivot = zero_pivot(A);
            throw FactorizationError("lu: singular matrix (zero pivot in column " + std::to_string(pivot) + ")", pivot);
        }
        A_ = &A;
    }

    /// Solves, refining iteratively (at most twice) if the residual misses the bound.
    Vector solve(const Vector& b) const {
        if (!A_) throw InvalidArgument("lu: solve before factorize");
        Vector x = lu_.solve(b);
        const double scale = std::max(1.0, b.norm());
        Vector r = b - (*A_) * x;
        for (int it = 0; it < 2 && !(r.norm() / scale <= lu_residual_bound); ++it) {
            x += lu_.solve(r);
            r = b - (*A_) * x;
        }
        const double rel = r.norm() / scale;
        if (!x.allFinite() || !(rel <= lu_residual_bound)) {
            std::ostringstream os;
            os << "lu: matrix numerically singular (relative residual " << rel << ")";
            throw FactorizationError(os.str(), -1);
        }
        return x;
    }

private:
    bool same_pattern(const SparseMatrix& A) const {
        return !outer_.empty() && static_cast<long>(outer_.size()) == A.outerSize() + 1 &&
               static_cast<long>(inner_.size()) == A.nonZeros() &&
               std::equal(outer_.begin(), outer_.end(), A.outerIndexPtr()) &&
               std::equal(inner_.begin(), inner_.end(), A.innerIndexPtr());
    }

    /// Column of the first zero pivot, or -1 if it cannot be identified.
    static long zero_pivot(const SparseMatrix& A) {
        Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(A);
        if (lu.info() == Eigen::Success) return -1;
        const std::string msg = lu.lastErrorMessage();
        const auto pos = msg.rfind("AT ");
        return pos == std::string::npos ? -1 : std::stol(msg.substr(pos + 3)) - 1;
    }

    Eigen::UmfPackLU<SparseMatrix> lu_;
    std::vector<int> outer_, inner_;
    const SparseMatrix* A_ = nullptr;
};

/// Returns x with ||Ax - b|| / max(1, ||b||) <= 1e-10.
inline Vector lu_solve(const SparseMatrix& A, const Vector& b) {
    if (A.rows() != b.size()) throw InvalidArgument("lu_solve: dimension mismatch");
    SparseMatrix Ac = A;
    Ac.makeCompressed();
    SparseLu lu;
    lu.factorize(Ac);
    return lu.solve(b);
}

struct NewtonSettings {
    /// Absolute tolerance on the Euclidean norm of the residual vector.
    double tolerance = 1e-12;
    int max_iterations = 25;
    /// Halve the step while the residual norm grows, at most max_halvings times.
    bool damping = true;
    int max_halvings = 8;

    void validate() const {
        if (!(tolerance > 0.0)) throw InvalidArgument("NewtonSettings: tolerance must be > 0");
        if (max_iterations < 1) throw InvalidArgument("NewtonSettings: max_iterations must be >= 1");
        if (max_halvings < 0) throw InvalidArgument("NewtonSettings: max_halvings must be >= 0");
    }
};

struct NewtonResult {
    Vector x;
    int iterations = 0;
    double residual_norm = 0.0;
};

using ResidualFn = std::function<Vector(const Vector&)>;
using JacobianFn = std::function<SparseMatrix(const Vector&)>;

/// Newton's method with a halving line search. A residual callback may throw
/// InadmissibleState to reject a trial point; the line search then halves.
inline NewtonResult newton(const ResidualFn& residual, const JacobianFn& jacobian, Vector x0,
                           const NewtonSettings& settings = {}) {
    settings.validate();
    NewtonResult res;
    res.x = std::move(x0);
    Vector r = residual(res.x);
    double rn = r.norm();
    SparseLu lu;
    while (!(rn <= settings.tolerance)) {
        if (res.iterations >= settings.max_iterations) {
            std::ostringstream os;
            os << "newton: no convergence after " << res.iterations << " iterations, residual " << rn;
            throw NonConvergence(os.str(), res.iterations, rn);
        }
        const SparseMatrix J = jacobian(res.x);
        lu.factorize(J);
        const Vector dx = lu.solve(-r);
        ++res.iterations;

        double alpha = 1.0;
        bool accepted = false;
        Vector best_x, best_r;
        double best_n = std::numeric_limits<double>::infinity();
        const int trials = settings.damping ? settings.max_halvings + 1 : 1;
        std::exception_ptr rejection;
        for (int k = 0; k < trials; ++k, alpha *= 0.5) {
            Vector xt = res.x + alpha * dx;
            Vector rt;
            try {
                rt = residual(xt);
            } catch (const InadmissibleState&) {
                if (!settings.damping) throw;
                rejection = std::current_exception();
                continue;
            }
            const double nt = rt.norm();
            if (nt < best_n) {
                best_n = nt;
                best_x = std::move(xt);
                best_r = std::move(rt);
            }
            if (nt <= rn || !settings.damping) {
                accepted = true;
                break;
            }
        }
        if (!accepted && !std::isfinite(best_n)) {
            if (rejection) std::rethrow_exception(rejection);
            throw NonConvergence("newton: no finite residual along the search direction", res.iterations, rn);
        }
        res.x = std::move(best_x);
        r = std::move(best_r);
        rn = best_n;
    }
    res.residual_norm = rn;
    return res;
}

}  // namespace chnst::la
