#include "chnst/diagnostics.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace chnst;
using scheme::State;

namespace {

const physics::MaterialModel model;
constexpr double tau = 1e-3;
constexpr int num_steps = 100;

/// One benchmark trajectory on n = 8, shared by the tests in this file.
class BenchmarkRun : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        disc = std::make_shared<const scheme::Discretization>(8);
        scheme::StepperConfig cfg;
        cfg.tau = tau;
        const scheme::Stepper st(disc, model, cfg);
        states.push_back(scheme::initial_state(disc, model, scheme::benchmark_initial_data()));
        records.push_back(diagnostics::record_initial(*disc, model, states[0]));
        for (int k = 1; k <= num_steps; ++k) {
            const auto r = st.step(states.back(), k);
            records.push_back(diagnostics::record(*disc, model, cfg.star_rule, tau, states.back(), r.state, k,
                                                  r.newton.iterations));
            states.push_back(r.state);
        }
    }
    static void TearDownTestSuite() {
        states.clear();
        records.clear();
        disc.reset();
    }

    static inline std::shared_ptr<const scheme::Discretization> disc;
    static inline std::vector<State> states;
    static inline std::vector<diagnostics::DiagnosticsRecord> records;
};

/// Entropy of a state by direct evaluation at the quadrature points, independent of functionals().
double entropy_direct(const scheme::Discretization& d, const State& s) {
    double total = 0.0;
    for (std::size_t t = 0; t < d.mesh().num_triangles(); ++t) {
        const auto g = mesh::element_geometry(d.mesh(), t);
        const auto dofs = d.p1()->element_dofs(t);
        double phi_n[3], th_n[3];
        mesh::Point grad = mesh::Point::Zero();
        for (int k = 0; k < 3; ++k) {
            phi_n[k] = s.phi.coefficients()[dofs[k]];
            th_n[k] = s.theta.coefficients()[dofs[k]];
            grad += phi_n[k] * g.grad_lambda[k];
        }
        for (std::size_t q = 0; q < d.rule().points.size(); ++q) {
            const auto& l = d.rule().points[q];
            const double phi = l[0] * phi_n[0] + l[1] * phi_n[1] + l[2] * phi_n[2];
            const double th = l[0] * th_n[0] + l[1] * th_n[1] + l[2] * th_n[2];
            const double w = phi * phi * (1 - phi) * (1 - phi);
            total += 2 * g.area * d.rule().weights[q] * (1 - std::log(th) + w - 0.5 * model.gamma() * grad.squaredNorm());
        }
    }
    return total;
}

}  // namespace

TEST(Diagnostics, UniformStepHasNoDissipation) {
    const auto d = std::make_shared<const scheme::Discretization>(4);
    const auto s = scheme::initial_state(d, model, scheme::uniform_initial_data(0.4, 1.2));
    const scheme::Stepper st(d, model, {});
    const auto next = st.step(s).state;
    EXPECT_NEAR(diagnostics::physical_dissipation(*d, model, scheme::StarRule::old_level, s, next), 0.0, 1e-12);
    EXPECT_NEAR(diagnostics::numerical_dissipation(*d, model, scheme::StarRule::old_level, 1e-3, s, next), 0.0, 1e-12);
    const auto f = diagnostics::functionals(*d, model, s);
    EXPECT_NEAR(f.mass, 0.4, 1e-14);
    EXPECT_EQ(f.kinetic, 0.0);
    EXPECT_NEAR(f.internal, model.internal_energy(0.4, 1.2), 1e-14);
    EXPECT_NEAR(f.entropy, model.entropy(0.4, 1.2, 0.0), 1e-14);
}

TEST(Diagnostics, NegativeNumericalDissipationIsAStructureViolation) {
    const auto d = std::make_shared<const scheme::Discretization>(4);
    const auto s = scheme::initial_state(d, model, scheme::uniform_initial_data(0.4, 1.2));
    // Lowering the entropy without any dissipation: theta up at every node.
    const auto hot = scheme::initial_state(d, model, scheme::uniform_initial_data(0.4, 1.5));
    EXPECT_THROW(diagnostics::numerical_dissipation(*d, model, scheme::StarRule::old_level, 1e-3, s, hot, 4),
                 StructureViolation);
    try {
        diagnostics::record(*d, model, scheme::StarRule::old_level, 1e-3, s, hot, 4, 1);
        FAIL() << "expected StructureViolation";
    } catch (const StructureViolation& e) {
        EXPECT_EQ(e.step(), 4);
    }
}

TEST(Diagnostics, PhysicalDissipationTermsAreNonnegative) {
    const auto d = std::make_shared<const scheme::Discretization>(4);
    for (int k = 0; k < 5; ++k) {
        const auto s = scheme::initial_state(d, model, scheme::benchmark_initial_data());
        auto next = s;
        Eigen::VectorXd c = next.mu.coefficients();
        for (int i = 0; i < c.size(); ++i) c[i] += oracle::uniform(-1, 1);
        next.mu = fe::FeFunction(d->p1(), c);
        EXPECT_GE(diagnostics::physical_dissipation(*d, model, scheme::StarRule::old_level, s, next), 0.0);
    }
}

TEST_F(BenchmarkRun, MassIsConserved) {
    for (const auto& r : records) EXPECT_NEAR(r.mass, records[0].mass, 1e-10) << "step " << r.step;
}

TEST_F(BenchmarkRun, TotalEnergyIsConserved) {
    for (const auto& r : records) EXPECT_NEAR(r.total_energy, records[0].total_energy, 1e-9) << "step " << r.step;
    for (std::size_t k = 1; k < records.size(); ++k)
        EXPECT_LE(std::abs(records[k].total_energy - records[k - 1].total_energy), 1e2 * 1e-12);
    EXPECT_LE(std::abs(records[1].total_energy - records[0].total_energy), 1e-10);
}

TEST_F(BenchmarkRun, EntropyIsNondecreasing) {
    for (std::size_t k = 1; k < records.size(); ++k) {
        EXPECT_GE(records[k].entropy, records[k - 1].entropy) << "step " << k;
        EXPECT_GE(records[k].d_num, -diagnostics::d_num_tolerance);
        EXPECT_GE(records[k].tau_dissipation, -1e-12);
        EXPECT_LE(records[k].newton_iterations, 6);
    }
}

TEST_F(BenchmarkRun, EntropyBalanceTelescopes) {
    double sum = 0.0;
    for (std::size_t k = 1; k < records.size(); ++k) sum += records[k].tau_dissipation + records[k].d_num;
    const double ds = entropy_direct(*disc, states.back()) - entropy_direct(*disc, states.front());
    EXPECT_NEAR(sum, ds, 1e-9);
    EXPECT_NEAR(entropy_direct(*disc, states.back()), records.back().entropy, 1e-12);
}

TEST_F(BenchmarkRun, DissipationMatchesEntropyPairing) {
    for (int k : {1, 10, 50, num_steps}) {
        const auto& a = states[k - 1];
        const auto& b = states[k];
        const double D = diagnostics::physical_dissipation(*disc, model, scheme::StarRule::old_level, a, b);
        EXPECT_GT(D, 0.0);
        EXPECT_NEAR(tau * D, diagnostics::entropy_pairing(*disc, model, a, b), 1e-10) << "step " << k;
    }
}

TEST_F(BenchmarkRun, NumericalDissipationClosedFormAndLowerBound) {
    for (int k = 1; k <= num_steps; ++k) {
        const auto& a = states[k - 1];
        const auto& b = states[k];
        const double closed = diagnostics::numerical_dissipation_closed_form(*disc, model, a, b);
        EXPECT_NEAR(closed, records[k].d_num, 1e-10) << "step " << k;
        EXPECT_LE(diagnostics::numerical_dissipation_gradient_part(*disc, model, a, b), records[k].d_num + 1e-10);
    }
}

TEST_F(BenchmarkRun, RecordFields) {
    EXPECT_EQ(records[0].step, 0);
    EXPECT_EQ(records[0].tau_dissipation, 0.0);
    EXPECT_EQ(records.back().step, num_steps);
    EXPECT_NEAR(records.back().time, num_steps * tau, 1e-12);
    EXPECT_NEAR(records[0].min_theta, states[0].theta.coefficients().minCoeff(), 0.0);
    EXPECT_NEAR(records[0].total_energy, records[0].kinetic + records[0].internal, 0.0);
}

TEST(Diagnostics, NewLevelStarringConservesMassAndEnergy) {
    const auto d = std::make_shared<const scheme::Discretization>(4);
    scheme::StepperConfig cfg;
    cfg.tau = tau;
    cfg.star_rule = scheme::StarRule::new_level;
    const scheme::Stepper st(d, model, cfg);
    State s = scheme::initial_state(d, model, scheme::benchmark_initial_data());
    const auto r0 = diagnostics::record_initial(*d, model, s);
    for (int k = 1; k <= 10; ++k) {
        const State next = st.step(s, k).state;
        const auto r = diagnostics::record(*d, model, cfg.star_rule, tau, s, next, k, 0);
        EXPECT_NEAR(r.mass, r0.mass, 1e-11);
        EXPECT_NEAR(r.total_energy, r0.total_energy, 1e-10);
        const double D = diagnostics::physical_dissipation(*d, model, cfg.star_rule, s, next);
        EXPECT_NEAR(tau * D, diagnostics::entropy_pairing(*d, model, s, next), 1e-10);
        s = next;
    }
}
