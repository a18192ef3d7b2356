/// @file acceptance.cpp
/// @brief Acceptance suite: prints one PASS or FAIL line per criterion and exits
/// nonzero if any criterion fails. Criterion numbers given as arguments restrict the run.

#include "chnst/diagnostics.hpp"
#include "chnst/harness.hpp"
#include "chnst/quadrature.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

using namespace chnst;

namespace {

const physics::MaterialModel model;

struct Outcome {
    bool passed = false;
    std::string detail;
};

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", v);
    return buf;
}

/// The benchmark run shared by criteria 1, 2 and 7: n = 8, tau = 1e-3 / 8, 100 steps.
struct BenchmarkRun {
    harness::RunConfig config;
    std::optional<harness::Trajectory> trajectory;
    std::string failure;
};

BenchmarkRun& benchmark_run() {
    static BenchmarkRun run = [] {
        BenchmarkRun r;
        r.config.base = 8;
        r.config.c_tau = 1e-3;
        r.config.steps = 100;
        r.config.newton.tolerance = 1e-12;
        try {
            r.trajectory = harness::run(r.config);
        } catch (const std::exception& e) {
            r.failure = e.what();
        }
        return r;
    }();
    return run;
}

/// Entropy <s(phi, theta, |grad phi|^2), 1> evaluated from nodal values and element
/// geometry, without the shared tabulations.
double entropy_direct(const scheme::Discretization& d, const scheme::State& s) {
    const auto rule = mesh::quad_rule(d.quad_degree());
    double total = 0.0;
    for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
        const auto& c = d.mesh().corners(t);
        const double area = oracle::signed_area(c[0], c[1], c[2]);
        const auto& tri = d.mesh().triangles()[t];
        double phi[3], th[3];
        for (int k = 0; k < 3; ++k) {
            phi[k] = s.phi.coefficients()[tri[k]];
            th[k] = s.theta.coefficients()[tri[k]];
        }
        // Gradient of the linear interpolant from the 2x2 system on the edge vectors.
        const double x1 = c[1].x() - c[0].x(), y1 = c[1].y() - c[0].y();
        const double x2 = c[2].x() - c[0].x(), y2 = c[2].y() - c[0].y();
        const double det = x1 * y2 - x2 * y1;
        const double d1 = phi[1] - phi[0], d2 = phi[2] - phi[0];
        const double gx = (d1 * y2 - d2 * y1) / det, gy = (x1 * d2 - x2 * d1) / det;
        for (std::size_t q = 0; q < rule.points.size(); ++q) {
            const auto& l = rule.points[q];
            const double p = l[0] * phi[0] + l[1] * phi[1] + l[2] * phi[2];
            const double T = l[0] * th[0] + l[1] * th[1] + l[2] * th[2];
            const double w = p * p * (1 - p) * (1 - p);
            total += 2 * area * rule.weights[q] * (1 - std::log(T) + w - 0.5e-3 * (gx * gx + gy * gy));
        }
    }
    return total;
}

Outcome structure_preservation() {
    auto& run = benchmark_run();
    if (!run.trajectory) return {false, "run failed: " + run.failure};
    const auto& rec = run.trajectory->records;
    const double mass = std::abs(rec.back().mass - rec.front().mass);
    const double energy = std::abs(rec.back().total_energy - rec.front().total_energy);
    double min_d_num = std::numeric_limits<double>::infinity();
    double min_ds = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < rec.size(); ++k) {
        min_d_num = std::min(min_d_num, rec[k].d_num);
        min_ds = std::min(min_ds, rec[k].entropy - rec[k - 1].entropy);
    }
    const bool ok = mass <= 1e-10 && energy <= 1e-9 && min_d_num >= -1e-10 && min_ds >= 0.0;
    return {ok, "steps " + std::to_string(rec.size() - 1) + ", mass drift " + sci(mass) + " (<= 1e-10), energy drift " +
                    sci(energy) + " (<= 1e-9), min d_num " + sci(min_d_num) + " (>= -1e-10), min entropy increment " +
                    sci(min_ds) + " (>= 0)"};
}

Outcome entropy_telescoping() {
    auto& run = benchmark_run();
    if (!run.trajectory) return {false, "run failed: " + run.failure};
    const auto& tr = *run.trajectory;
    const auto& d = *tr.discretization;
    double sum = 0.0;
    for (std::size_t k = 1; k < tr.states.size(); ++k) {
        const auto& a = tr.states[k - 1];
        const auto& b = tr.states[k];
        sum += tr.tau * diagnostics::physical_dissipation(d, model, run.config.star_rule, a, b) +
               diagnostics::numerical_dissipation_closed_form(d, model, a, b);
    }
    const double ds = entropy_direct(d, tr.states.back()) - entropy_direct(d, tr.states.front());
    const double gap = std::abs(ds - sum);
    return {gap <= 1e-9, "entropy change " + sci(ds) + ", sum of tau D + D_num " + sci(sum) + ", gap " + sci(gap) +
                             " (<= 1e-9)"};
}

Outcome convergence() {
    harness::RunConfig cfg;
    cfg.base = 8;
    cfg.c_tau = 1e-3;
    std::ostringstream levels;
    harness::ConvergenceStudy study;
    try {
        study = harness::converge(cfg, 3, scheme::benchmark_initial_data(), [&](const auto& s) {
            levels << " n=" << s.n << "/" << s.steps << " steps";
        });
    } catch (const std::exception& e) {
        return {false, std::string("study failed: ") + e.what()};
    }
    std::cout << study.table.to_text();
    using harness::Column;
    const auto& t = study.table;
    const bool decreasing = t.strictly_decreasing(Column::combined);
    const auto eoc_e = t.last_order(Column::combined);
    const auto eoc_phi = t.last_order(Column::phi);
    const bool ok = decreasing && eoc_e && *eoc_e >= 1.5 && eoc_phi && *eoc_phi >= 1.5;
    std::ostringstream os;
    os << "levels" << levels.str() << "; e";
    for (const auto& r : t.rows) os << " " << sci(r.combined());
    os << (decreasing ? " (decreasing)" : " (NOT decreasing)");
    os << ", last eoc e " << (eoc_e ? sci(*eoc_e) : "n/a") << " (>= 1.5), last eoc e^phi "
       << (eoc_phi ? sci(*eoc_phi) : "n/a") << " (>= 1.5)";
    return {ok, os.str()};
}

Outcome thermodynamic_identities() {
    constexpr int samples = 10000;
    constexpr double h = 1e-5;
    const double gamma = model.gamma();
    auto psi_tilde = [&](double phi, double th, double g2) {
        return std::log(th) + (2 * th - 1) * phi * phi * (1 - phi) * (1 - phi) + 0.5 * gamma * g2;
    };
    double e_err = 0.0, s_err = 0.0, split_err = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double phi = oracle::uniform(-0.5, 1.5), th = oracle::uniform(0.55, 2.0), g2 = oracle::uniform(0.0, 10.0);
        const double fd = (psi_tilde(phi, th + h, g2) - psi_tilde(phi, th - h, g2)) / (2 * h);
        const double e = physics::eval_internal_energy(model, phi, th);
        e_err = std::max(e_err, std::abs(e - fd));
        s_err = std::max(s_err, std::abs(physics::eval_entropy(model, phi, th, g2) - (th * e - psi_tilde(phi, th, g2))));
        split_err = std::max(split_err,
                             std::abs(model.psi_vex(phi, th) + model.psi_cav(phi, th) - psi_tilde(phi, th, 0.0)));
    }
    const bool ok = e_err <= 1e-7 && s_err <= 1e-7 && split_err <= 1e-13;
    return {ok, std::to_string(samples) + " samples: |e - FD d_theta psi~| " + sci(e_err) + " (<= 1e-7), |s - (theta e - psi~)| " +
                    sci(s_err) + " (<= 1e-7), |psi_vex + psi_cav - psi| " + sci(split_err) + " (<= 1e-13)"};
}

Outcome jacobian() {
    const auto d = std::make_shared<const scheme::Discretization>(4);
    scheme::StepperConfig cfg;
    cfg.tau = 1e-3 / 4;
    const scheme::Stepper st(d, model, cfg);
    const auto s0 = scheme::initial_state(d, model, scheme::benchmark_initial_data());
    const auto s1 = st.step(s0).state;
    const la::Vector xo = st.pack(s0);
    const double eps = 1e-6;
    double worst = 0.0;
    for (const la::Vector& x : {st.pack(s0), st.pack(s1)}) {
        const auto J = st.jacobian(xo, x);
        for (int k = 0; k < 20; ++k) {
            la::Vector dir(x.size());
            for (int i = 0; i < dir.size(); ++i) dir[i] = oracle::uniform(-1.0, 1.0);
            const la::Vector jd = J * dir;
            const la::Vector fd = (st.residual(xo, x + eps * dir) - st.residual(xo, x - eps * dir)) / (2 * eps);
            worst = std::max(worst, (jd - fd).norm() / jd.norm());
        }
    }
    return {worst <= 1e-6, "n = 4, 20 directions at the initial guess and at the converged step, max relative error " +
                               sci(worst) + " (<= 1e-6)"};
}

Outcome fixed_point() {
    const auto d = std::make_shared<const scheme::Discretization>(8);
    scheme::StepperConfig cfg;
    cfg.tau = 1e-3 / 8;
    const scheme::Stepper st(d, model, cfg);
    const auto s0 = scheme::initial_state(d, model, scheme::uniform_initial_data(0.4, 1.0));
    const la::Vector x0 = st.pack(s0);
    scheme::State s = s0;
    double drift = 0.0;
    for (int k = 1; k <= 50; ++k) {
        s = st.step(s, k).state;
        drift = std::max(drift, (st.pack(s) - x0).cwiseAbs().maxCoeff());
    }
    return {drift <= 1e-11, "uniform state (phi 0.4, theta 1) on n = 8, 50 steps, max coefficient drift " + sci(drift) +
                                " (<= 1e-11)"};
}

Outcome incompressibility() {
    auto& run = benchmark_run();
    if (!run.trajectory) return {false, "run failed: " + run.failure};
    const auto& tr = *run.trajectory;
    const scheme::Stepper st(tr.discretization, model, run.config.stepper_config());
    double rows = 0.0, lambda = 0.0;
    for (std::size_t k = 1; k < tr.states.size(); ++k) {
        rows = std::max(rows, st.incompressibility_residual(tr.states[k - 1], tr.states[k]).cwiseAbs().maxCoeff());
        lambda = std::max(lambda, std::abs(tr.states[k].multiplier));
    }
    return {rows <= 1e-11 && lambda <= 1e-10,
            "every step of the benchmark run: max divergence row " + sci(rows) + " (<= 1e-11), max |lambda| " +
                sci(lambda) + " (<= 1e-10)"};
}

Outcome quadrature_and_skew_form() {
    double quad_err = 0.0;
    for (int deg = 1; deg <= mesh::max_quad_degree; ++deg) {
        const auto r = mesh::quad_rule(deg);
        for (int a = 0; a <= deg; ++a)
            for (int b = 0; a + b <= deg; ++b) {
                const double exact = oracle::reference_monomial_integral(a, b);
                const double got = oracle::apply_rule(r, [&](double x, double y) { return std::pow(x, a) * std::pow(y, b); });
                quad_err = std::max(quad_err, std::abs(got - exact) / exact);
            }
    }
    const auto m = std::make_shared<const mesh::PeriodicTriMesh>(mesh::build_uniform(4));
    const auto space = fe::build_space(m, fe::Family::p2_vector);
    auto random_field = [&] {
        Eigen::VectorXd c(space->dof_count());
        for (int i = 0; i < c.size(); ++i) c[i] = oracle::uniform(-1.0, 1.0);
        return fe::FeFunction(space, c);
    };
    double skew = 0.0;
    for (int k = 0; k < 20; ++k) {
        const auto u = random_field(), v = random_field();
        skew = std::max(skew, std::abs(fe::c_skw(u, v, v)));
    }
    return {quad_err <= 1e-13 && skew <= 1e-13,
            "degrees 1-" + std::to_string(mesh::max_quad_degree) + ": max relative monomial error " + sci(quad_err) +
                " (<= 1e-13); n = 4, 20 random pairs: max |c_skw(u,v,v)| " + sci(skew) + " (<= 1e-13)"};
}

struct Criterion {
    int number;
    const char* name;
    std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const Criterion criteria[] = {
        {1, "structure preservation", structure_preservation},
        {2, "entropy telescoping", entropy_telescoping},
        {3, "convergence study", convergence},
        {4, "thermodynamic identities", thermodynamic_identities},
        {5, "jacobian correctness", jacobian},
        {6, "fixed-point preservation", fixed_point},
        {7, "incompressibility", incompressibility},
        {8, "quadrature exactness and skew form", quadrature_and_skew_form},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.number)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        char time_buf[32];
        std::snprintf(time_buf, sizeof time_buf, "%.1f s", secs);
        std::cout << (o.passed ? "PASS" : "FAIL") << " [" << c.number << "] " << c.name << ": " << o.detail << " ("
                  << time_buf << ")" << std::endl;
        failed += !o.passed;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
