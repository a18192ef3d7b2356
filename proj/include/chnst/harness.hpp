/// @file harness.hpp
/// @brief Simulation driver, inter-level errors and experimental orders of convergence.
///
/// Level k runs on n = base 2^k cells per axis with tau_k = c_tau h_k, adjusted down
/// so that the final time is reached in a whole number of steps. Errors between level
/// k and k+1 compare the prolonged coarse solution with the fine one at coarse time
/// nodes:
///   e = |phi|^2_{Linf(H1)} + |theta|^2_{Linf(L2)} + |u|^2_{Linf(L2)}
///       + |mu|^2_{L2(H1)} + |theta|^2_{L2(H1)} + |u|^2_{L2(H1)}.
/// L2-in-time norms use the left-endpoint rule. mu is constant on each interval; its
/// coarse value is compared with both fine half-interval values, weighted 1/2 each.
#pragma once

#include "chnst/diagnostics.hpp"
#include "chnst/errors.hpp"
#include "chnst/fespace.hpp"
#include "chnst/physics.hpp"
#include "chnst/scheme.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace chnst::harness {

using scheme::State;
using scheme::StarRule;

struct RunConfig {
    int base = 8;
    int level = 0;
    /// tau = c_tau h unless an explicit tau is given.
    double c_tau = 1e-3;
    std::optional<double> tau;
    /// Final time; defaults to 16 steps of the level-0 step size.
    std::optional<double> final_time;
    /// Fixed step count; overrides final_time (then T = steps * tau).
    std::optional<long> steps;
    physics::ModelParameters model{};
    StarRule star_rule = StarRule::old_level;
    la::NewtonSettings newton{};
    int quad_degree = 6;
    double theta_floor = 1e-8;

    int n() const { return base << level; }
    double h() const { return 1.0 / n(); }
    double nominal_tau() const { return tau ? *tau : c_tau * h(); }
    /// Step size of level 0, used for the default final time.
    double base_tau() const { return tau ? *tau : c_tau / base; }
    double end_time() const {
        if (steps) return static_cast<double>(*steps) * nominal_tau();
        return final_time ? *final_time : 16.0 * base_tau();
    }
    long num_steps() const {
        if (steps) return *steps;
        const double ratio = end_time() / nominal_tau();
        return std::max(1L, static_cast<long>(std::ceil(ratio - 1e-9 * ratio)));
    }
    /// The step size actually used: end_time() / num_steps().
    double step_size() const { return steps ? nominal_tau() : end_time() / static_cast<double>(num_steps()); }

    /// Level k with the same final time and step size step_size() * 2^(level - k), so
    /// that the time grids of all levels are nested.
    RunConfig at_level(int k) const {
        RunConfig c = *this;
        c.level = k;
        if (k == level) return c;
        if (steps) {
            c.tau = std::ldexp(nominal_tau(), level - k);
            c.steps = k > level ? *steps << (k - level) : *steps >> (level - k);
        } else {
            c.final_time = end_time();
            c.tau = std::ldexp(step_size(), level - k);
        }
        return c;
    }

    void validate() const {
        if (base < 4) throw InvalidArgument("RunConfig: base must be >= 4");
        if (level < 0 || level > 10) throw InvalidArgument("RunConfig: level must lie in [0, 10]");
        if (!(c_tau > 0.0)) throw InvalidArgument("RunConfig: c_tau must be > 0");
        if (tau && !(*tau > 0.0)) throw InvalidArgument("RunConfig: tau must be > 0");
        if (final_time && !(*final_time > 0.0)) throw InvalidArgument("RunConfig: T must be > 0");
        if (steps && *steps < 1) throw InvalidArgument("RunConfig: steps must be >= 1");
        if (quad_degree < 1 || quad_degree > mesh::max_quad_degree)
            throw InvalidArgument("RunConfig: quad_degree out of range");
        newton.validate();
    }

    scheme::StepperConfig stepper_config() const {
        scheme::StepperConfig s;
        s.tau = step_size();
        s.star_rule = star_rule;
        s.newton = newton;
        s.theta_floor = theta_floor;
        return s;
    }
};

struct Trajectory {
    RunConfig config;
    scheme::DiscretizationPtr discretization;
    double tau = 0.0;
    /// All time levels 0..N (empty when states were not kept).
    std::vector<State> states;
    std::vector<diagnostics::DiagnosticsRecord> records;
    /// Number of steps whose new level had min theta <= 1/2 + 1e-6.
    long split_warnings = 0;
};

/// Called after every completed level (including level 0).
using Observer = std::function<void(const State&, const diagnostics::DiagnosticsRecord&)>;

/// Runs a simulation from the given initial data.
inline Trajectory run(const RunConfig& cfg, const scheme::InitialData& data = scheme::benchmark_initial_data(),
                      const Observer& observe = {}, bool keep_states = true) {
    cfg.validate();
    const physics::MaterialModel model(cfg.model);
    Trajectory tr;
    tr.config = cfg;
    tr.discretization = std::make_shared<const scheme::Discretization>(cfg.n(), cfg.quad_degree);
    tr.tau = cfg.step_size();
    const auto& disc = *tr.discretization;
    const scheme::Stepper stepper(tr.discretization, model, cfg.stepper_config());

    State current = scheme::initial_state(tr.discretization, model, data);
    tr.records.push_back(diagnostics::record_initial(disc, model, current));
    if (observe) observe(current, tr.records.back());
    if (keep_states) tr.states.push_back(current);
    const long steps = cfg.num_steps();
    for (long k = 1; k <= steps; ++k) {
        scheme::StepResult r = stepper.step(current, k);
        r.state.time = static_cast<double>(k) * tr.tau;
        tr.records.push_back(diagnostics::record(disc, model, cfg.star_rule, tr.tau, current, r.state, k,
                                                 r.newton.iterations));
        if (r.split_warning) ++tr.split_warnings;
        current = std::move(r.state);
        if (observe) observe(current, tr.records.back());
        if (keep_states) tr.states.push_back(current);
    }
    return tr;
}

/// Inter-level error constituents (squared norms).
struct ErrorRow {
    int level = 0;
    double phi_linf_h1 = 0.0;
    double theta_linf_l2 = 0.0;
    double u_linf_l2 = 0.0;
    double mu_l2_h1 = 0.0;
    double theta_l2_h1 = 0.0;
    double u_l2_h1 = 0.0;

    double combined() const { return phi_linf_h1 + theta_linf_l2 + u_linf_l2 + mu_l2_h1 + theta_l2_h1 + u_l2_h1; }
};

/// Error between a level and its refinement in space and time over the same interval.
inline ErrorRow inter_level_error(const Trajectory& coarse, const Trajectory& fine) {
    const auto& cd = *coarse.discretization;
    const auto& fd = *fine.discretization;
    if (fd.n() != 2 * cd.n()) throw InvalidArgument("inter_level_error: fine mesh is not one refinement of coarse");
    const std::size_t nc = coarse.states.size();
    if (nc < 2 || fine.states.size() != 2 * nc - 1)
        throw InvalidArgument("inter_level_error: fine run must have twice the steps of the coarse run");
    if (std::abs(2.0 * fine.tau - coarse.tau) > 1e-12 * coarse.tau)
        throw InvalidArgument("inter_level_error: fine step size must be half the coarse one");
    const int deg = fd.quad_degree();

    auto diff = [&](const fe::FeFunction& c, const fe::FeFunction& f, const fe::SpacePtr& space) {
        return fe::norms(fe::prolong(c, space) - f, deg);
    };

    ErrorRow row;
    row.level = coarse.config.level;
    for (std::size_t i = 0; i < nc; ++i) {
        const State& c = coarse.states[i];
        const State& f = fine.states[2 * i];
        const fe::Norms dphi = diff(c.phi, f.phi, fd.p1());
        const fe::Norms dth = diff(c.theta, f.theta, fd.p1());
        const fe::Norms du = diff(c.u, f.u, fd.p2_vector());
        row.phi_linf_h1 = std::max(row.phi_linf_h1, dphi.h1() * dphi.h1());
        row.theta_linf_l2 = std::max(row.theta_linf_l2, dth.l2 * dth.l2);
        row.u_linf_l2 = std::max(row.u_linf_l2, du.l2 * du.l2);
        if (i + 1 < nc) {
            row.theta_l2_h1 += coarse.tau * dth.h1() * dth.h1();
            row.u_l2_h1 += coarse.tau * du.h1() * du.h1();
            const State& cn = coarse.states[i + 1];
            const fe::Norms m1 = diff(cn.mu, fine.states[2 * i + 1].mu, fd.p1());
            const fe::Norms m2 = diff(cn.mu, fine.states[2 * i + 2].mu, fd.p1());
            row.mu_l2_h1 += coarse.tau * 0.5 * (m1.h1() * m1.h1() + m2.h1() * m2.h1());
        }
    }
    return row;
}

/// log2(coarse / fine); empty when either error is not positive.
inline std::optional<double> eoc(double coarse, double fine) {
    if (!(coarse > 0.0) || !(fine > 0.0)) return std::nullopt;
    return std::log2(coarse / fine);
}

/// Orders of consecutive pairs; entry k is the order between errors k and k+1.
inline std::vector<std::optional<double>> eoc(const std::vector<double>& errors) {
    if (errors.size() < 2) throw InvalidArgument("eoc: at least two errors are required");
    std::vector<std::optional<double>> out;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) out.push_back(eoc(errors[k], errors[k + 1]));
    return out;
}

enum class Column { combined, phi, mu, grad_theta, grad_u, theta_linf_l2, u_linf_l2 };

inline double value(const ErrorRow& r, Column c) {
    switch (c) {
    case Column::combined: return r.combined();
    case Column::phi: return r.phi_linf_h1;
    case Column::mu: return r.mu_l2_h1;
    case Column::grad_theta: return r.theta_l2_h1;
    case Column::grad_u: return r.u_l2_h1;
    case Column::theta_linf_l2: return r.theta_linf_l2;
    case Column::u_linf_l2: return r.u_linf_l2;
    }
    return 0.0;
}

struct ColumnInfo {
    Column column;
    const char* csv_name;
    const char* text_name;
    /// Whether the column is one of the five tabulated error columns.
    bool tabulated;
};

inline constexpr ColumnInfo columns[] = {
    {Column::combined, "e", "e", true},
    {Column::phi, "e_phi", "e^phi", true},
    {Column::mu, "e_mu", "e^mu", true},
    {Column::grad_theta, "e_grad_theta", "e^grad(theta)", true},
    {Column::grad_u, "e_grad_u", "e^grad(u)", true},
    {Column::theta_linf_l2, "e_theta_linf_l2", "theta Linf(L2)", false},
    {Column::u_linf_l2, "e_u_linf_l2", "u Linf(L2)", false},
};

struct ErrorTable {
    std::vector<ErrorRow> rows;

    std::vector<double> column(Column c) const {
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(value(r, c));
        return v;
    }
    /// Order of row k relative to row k-1 (empty for k = 0).
    std::optional<double> order(std::size_t k, Column c) const {
        if (k == 0 || k >= rows.size()) return std::nullopt;
        return eoc(value(rows[k - 1], c), value(rows[k], c));
    }
    bool strictly_decreasing(Column c) const {
        for (std::size_t k = 1; k < rows.size(); ++k)
            if (!(value(rows[k], c) < value(rows[k - 1], c))) return false;
        return true;
    }
    std::optional<double> last_order(Column c) const {
        return rows.size() < 2 ? std::nullopt : order(rows.size() - 1, c);
    }

    /// CSV with 17 significant digits; undefined orders are empty fields.
    std::string to_csv() const {
        std::ostringstream os;
        os << "k";
        for (const auto& ci : columns) os << "," << ci.csv_name << ",eoc_" << ci.csv_name;
        os << "\n";
        os << std::setprecision(17);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            os << rows[k].level;
            for (const auto& ci : columns) {
                os << "," << value(rows[k], ci.column) << ",";
                if (const auto o = order(k, ci.column)) os << *o;
            }
            os << "\n";
        }
        return os.str();
    }

    /// Aligned text table; the tabulated columns come first, then the remaining constituents.
    std::string to_text() const {
        std::ostringstream os;
        char buf[64];
        os << std::left << std::setw(3) << "k";
        for (const auto& ci : columns) {
            os << (&ci == &columns[5] ? " || " : " | ") << std::setw(14) << ci.text_name << " " << std::setw(5) << "eoc";
        }
        os << "\n";
        for (std::size_t k = 0; k < rows.size(); ++k) {
            os << std::setw(3) << rows[k].level;
            for (const auto& ci : columns) {
                std::snprintf(buf, sizeof buf, "%.2e", value(rows[k], ci.column));
                os << (&ci == &columns[5] ? " || " : " | ") << std::setw(14) << buf << " ";
                if (const auto o = order(k, ci.column)) {
                    std::snprintf(buf, sizeof buf, "%.2f", *o);
                    os << std::setw(5) << buf;
                } else {
                    os << std::setw(5) << "---";
                }
            }
            os << "\n";
        }
        os << "columns after || are the remaining constituents of e\n";
        return os.str();
    }
};

struct ConvergenceStudy {
    ErrorTable table;
    /// Per level: steps, step size and the largest mass and energy drifts.
    struct LevelSummary {
        int level = 0;
        int n = 0;
        long steps = 0;
        double tau = 0.0;
        double mass_drift = 0.0;
        double energy_drift = 0.0;
        double min_d_num = 0.0;
    };
    std::vector<LevelSummary> levels;
};

inline ConvergenceStudy::LevelSummary summarize(const Trajectory& tr) {
    ConvergenceStudy::LevelSummary s;
    s.level = tr.config.level;
    s.n = tr.config.n();
    s.steps = static_cast<long>(tr.records.size()) - 1;
    s.tau = tr.tau;
    const auto& r0 = tr.records.front();
    s.min_d_num = tr.records.size() > 1 ? tr.records[1].d_num : 0.0;
    for (const auto& r : tr.records) {
        s.mass_drift = std::max(s.mass_drift, std::abs(r.mass - r0.mass));
        s.energy_drift = std::max(s.energy_drift, std::abs(r.total_energy - r0.total_energy));
        if (r.step > 0) s.min_d_num = std::min(s.min_d_num, r.d_num);
    }
    return s;
}

/// Called when a level finishes.
using LevelObserver = std::function<void(const ConvergenceStudy::LevelSummary&)>;

/// Runs levels cfg.level .. cfg.level + num_levels - 1 on a common final time and
/// tabulates the errors of each consecutive pair.
inline ConvergenceStudy converge(const RunConfig& cfg, int num_levels,
                                 const scheme::InitialData& data = scheme::benchmark_initial_data(),
                                 const LevelObserver& observe = {}) {
    if (num_levels < 2) throw InvalidArgument("converge: at least two levels are required");
    RunConfig base = cfg;
    if (!base.steps && !base.final_time) base.final_time = base.end_time();
    ConvergenceStudy study;
    std::optional<Trajectory> previous;
    for (int i = 0; i < num_levels; ++i) {
        const RunConfig c = base.at_level(cfg.level + i);
        Trajectory tr;
        try {
            tr = run(c, data);
        } catch (const Error& e) {
            throw Error("level " + std::to_string(c.level) + " (n = " + std::to_string(c.n()) + "): " + e.what());
        }
        study.levels.push_back(summarize(tr));
        if (observe) observe(study.levels.back());
        if (previous) study.table.rows.push_back(inter_level_error(*previous, tr));
        previous = std::move(tr);
    }
    return study;
}

}  // namespace chnst::harness
