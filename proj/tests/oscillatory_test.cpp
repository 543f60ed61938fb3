#include "geoctrl/errors.hpp"
#include "geoctrl/geometry.hpp"
#include "geoctrl/models.hpp"
#include "geoctrl/oscillatory.hpp"

#include "test_systems.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace geoctrl;
using namespace geoctrl::oscillatory;

namespace {

constexpr double kMass = 1.5;
constexpr double kInertia = 0.7;
constexpr double kArm = 0.4;

MechanicalSystem test_pvtol() { return models::pvtol(kMass, kInertia, kArm); }

TimeFunction sinusoid(double amp, double omega, double phase) {
    return [=](double t) { return amp * std::sin(omega * t + phase); };
}

TimeFunction constant(double c) {
    return [c](double) { return c; };
}

AveragedGains two_input_gains() {
    AveragedGains g;
    g.z = {sinusoid(0.3, 1.0, 0.2), sinusoid(0.5, 0.7, 0.0)};
    g.z_pair[{0, 1}] = sinusoid(1.2, 0.9, 0.4);
    return g;
}

AveragedGains three_input_gains() {
    AveragedGains g;
    g.z = {constant(0.1), sinusoid(0.4, 1.3, 0.0), constant(-0.2)};
    g.z_pair[{0, 1}] = sinusoid(0.8, 0.5, 0.1);
    g.z_pair[{0, 2}] = constant(-1.1);
    g.z_pair[{1, 2}] = sinusoid(1.5, 2.0, -0.3);
    return g;
}

}  // namespace

TEST(AveragedIteratedIntegral, FirstOrderOfPsiVanishes) {
    EXPECT_LT(std::abs(averaged_iterated_integral({psi(1)}, {1})), 1e-10);
    EXPECT_LT(std::abs(averaged_iterated_integral({psi(3)}, {1})), 1e-10);
}

TEST(AveragedIteratedIntegral, SecondOrderOfPsiIsHalf) {
    // W = sqrt(2) sin(N s); mean of W^2 / 2! is 1/2.
    EXPECT_NEAR(averaged_iterated_integral({psi(1)}, {2}), 0.5, 1e-8);
    EXPECT_NEAR(averaged_iterated_integral({psi(2)}, {2}), 0.5, 1e-8);
}

TEST(AveragedIteratedIntegral, MixedTermsSeparateFrequencies) {
    EXPECT_NEAR(averaged_iterated_integral({psi(1), psi(2)}, {1, 1}), 0.0, 1e-10);
    EXPECT_NEAR(averaged_iterated_integral({psi(2), psi(2)}, {1, 1}), 1.0, 1e-8);
    EXPECT_NEAR(averaged_iterated_integral({psi(1), psi(2)}, {0, 2}), 0.5, 1e-8);
}

TEST(AveragedIteratedIntegral, RejectsBadArguments) {
    EXPECT_THROW(averaged_iterated_integral({psi(1)}, {1, 1}), PreconditionError);
    EXPECT_THROW(averaged_iterated_integral({psi(1)}, {-1}), PreconditionError);
    EXPECT_THROW(averaged_iterated_integral({psi(1)}, {1}, 0.0), PreconditionError);
    EXPECT_THROW(psi(0), PreconditionError);
}

TEST(Psi, ValueAndZeroMean) {
    EXPECT_NEAR(psi(1)(0.0), std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(psi(3)(0.0), 3.0 * std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(averaged_iterated_integral({[](double) { return 1.0; }}, {1}), M_PI, 1e-10);
}

TEST(PairEnumeration, LexicographicDefault) {
    const PairEnumeration e(3);
    EXPECT_EQ(e(0, 1), 1);
    EXPECT_EQ(e(0, 2), 2);
    EXPECT_EQ(e(1, 2), 3);
    EXPECT_EQ(e(2, 1), 3);
    EXPECT_THROW(e(1, 1), PreconditionError);
    ASSERT_EQ(e.pairs().size(), 3u);
}

TEST(PairEnumeration, CustomMustBeInjectiveAndComplete) {
    EXPECT_NO_THROW(PairEnumeration(3, {{{0, 1}, 2}, {{0, 2}, 5}, {{1, 2}, 1}}));
    EXPECT_THROW(PairEnumeration(3, {{{0, 1}, 2}, {{0, 2}, 2}, {{1, 2}, 1}}), PreconditionError);
    EXPECT_THROW(PairEnumeration(3, {{{0, 1}, 2}, {{0, 2}, 5}}), PreconditionError);
    EXPECT_THROW(PairEnumeration(2, {{{0, 1}, 0}}), PreconditionError);
}

TEST(SynthesizeControls, SingleInputHasNoFastPart) {
    const auto sys = models::pvtol(1.0, 1.0, 1.0, 0.0, {1});
    AveragedGains g;
    g.z = {sinusoid(0.7, 1.0, 0.0)};
    const auto control = synthesize_controls(sys, g, PairEnumeration(1), 0.1);
    const Vector q = Vector::Zero(3);
    for (double t : {0.0, 0.4, 1.7}) {
        EXPECT_NEAR(control.fast(t / 0.1, t)[0], 0.0, 1e-15);
        EXPECT_NEAR(control.input(t, q)[0], g.z[0](t), 1e-15);
    }
}

TEST(SynthesizeControls, TwoInputFastFormulas) {
    const auto g = two_input_gains();
    const auto control = synthesize_controls(test_pvtol(), g, PairEnumeration(2), 0.05);
    for (double t : {0.0, 0.3, 2.1}) {
        for (double tau : {0.0, 0.7, 4.4}) {
            const Vector w = control.fast(tau, t);
            EXPECT_NEAR(w[0], g.pair(0, 1, t) * std::sqrt(2.0) * std::cos(tau), 1e-14);
            EXPECT_NEAR(w[1], -std::sqrt(2.0) * std::cos(tau), 1e-14);
        }
    }
}

TEST(SynthesizeControls, FastPartsHaveZeroMean) {
    const auto g = three_input_gains();
    const auto fast = synthesized_fast_inputs(g, PairEnumeration(3));
    constexpr int samples = 997;
    for (int a = 0; a < 3; ++a) {
        // Periodic rectangle rule is exact for these trigonometric sums.
        double mean = 0.0;
        for (int i = 0; i < samples; ++i) {
            mean += fast(2.0 * M_PI * i / samples, 0.8)[a] / samples;
        }
        EXPECT_LT(std::abs(mean), 1e-12);
        const FastFunction wa = [&fast, a](double tau) { return fast(tau, 0.8)[a]; };
        EXPECT_LT(std::abs(averaged_iterated_integral({wa}, {1})), 1e-10);
    }
}

TEST(SynthesizeControls, RealizedInputCombinesSlowAndFast) {
    const auto g = two_input_gains();
    const double eps = 0.02;
    const auto control = synthesize_controls(test_pvtol(), g, PairEnumeration(2), eps);
    const Vector q = (Vector(3) << 0.3, -0.2, 0.9).finished();
    const double t = 1.3;
    const Vector expected = control.slow(t, q) + control.fast(t / eps, t) / eps;
    EXPECT_LT((control.input(t, q) - expected).norm(), 1e-12);
    EXPECT_LT((control.law()(t, q, Vector::Zero(3)) - expected).norm(), 1e-12);
}

TEST(SynthesizeControls, SlowInputsMatchHandValues) {
    // <Y2:Y2> = (2 h / J) Y1 and <Y1:Y1> = 0, so v1 = z1 + h / J
    // from #{c < 2} = 1, and v2 = z2.
    const auto g = two_input_gains();
    const auto control = synthesize_controls(test_pvtol(), g, PairEnumeration(2), 0.1);
    geoctrl::testing::Sampler sampler(5);
    for (int i = 0; i < 20; ++i) {
        const Vector q = sampler.uniform(3, -2.0, 2.0);
        const double t = sampler.scalar(0.0, 6.0);
        const Vector v = control.slow(t, q);
        EXPECT_NEAR(v[0], g.z[0](t) + kArm / kInertia, 1e-8);
        EXPECT_NEAR(v[1], g.z[1](t), 1e-8);
    }
}

TEST(SynthesizeControls, RejectsMismatchedGains) {
    AveragedGains g;
    g.z = {constant(1.0)};
    EXPECT_THROW(synthesize_controls(test_pvtol(), g, PairEnumeration(2), 0.1), PreconditionError);
    EXPECT_THROW(synthesize_controls(test_pvtol(), two_input_gains(), PairEnumeration(2), 0.0),
                 PreconditionError);
}

TEST(SpanCoefficients, PvtolSatisfiesTheSpanAssumption) {
    const auto sys = test_pvtol();
    geoctrl::testing::Sampler sampler(11);
    for (int i = 0; i < 50; ++i) {
        const Vector q = sampler.uniform(3, -3.0, 3.0);
        const SpanCoefficients span = span_coefficients(sys, q);
        EXPECT_LT(span.residual, 1e-8);
        EXPECT_NEAR(span.alpha(0, 0), 0.0, 1e-8);
        EXPECT_NEAR(span.alpha(0, 1), 0.0, 1e-8);
        EXPECT_NEAR(span.alpha(1, 0), 2.0 * kArm / kInertia, 1e-8);
        EXPECT_NEAR(span.alpha(1, 1), 0.0, 1e-8);
    }
}

TEST(SpanCoefficients, OffsetForceAloneViolatesTheAssumption) {
    // The offset force alone: <Y:Y> points along the body x axis, outside span{Y}.
    const auto sys = models::planar_body(1.0, 1.0, 1.0, 0.0, {2});
    const Vector q = (Vector(3) << 0.1, 0.2, 0.3).finished();
    try {
        span_coefficients(sys, q);
        FAIL() << "expected AssumptionViolationError";
    } catch (const AssumptionViolationError& e) {
        EXPECT_GT(e.residual(), 0.1);
        EXPECT_EQ(e.kind(), "assumption-violation");
    }
}

TEST(AveragedSystem, PvtolDistributionHasFullRank) {
    const AveragedSystem avg(test_pvtol(), two_input_gains());
    geoctrl::testing::Sampler sampler(3);
    for (int i = 0; i < 20; ++i) {
        EXPECT_EQ(avg.distribution_rank(sampler.uniform(3, -3.0, 3.0)), 3);
    }
    const AveragedSystem single(models::pvtol(1.0, 1.0, 1.0, 0.0, {1}), [] {
        AveragedGains g;
        g.z = {constant(1.0)};
        return g;
    }());
    EXPECT_EQ(single.distribution_rank(Vector::Zero(3)), 1);
}

TEST(AveragedSystem, PvtolRhsMatchesHandFormula) {
    // r'' = z1 Y1 + z2 Y2 - z12 (h / (m J)) (cos th, sin th, 0).
    const auto g = two_input_gains();
    const AveragedSystem avg(test_pvtol(), g);
    geoctrl::testing::Sampler sampler(17);
    for (int i = 0; i < 20; ++i) {
        const State s{sampler.uniform(3, -2.0, 2.0), sampler.uniform(3)};
        const double t = sampler.scalar(0.0, 5.0);
        const double c = std::cos(s.q[2]), sn = std::sin(s.q[2]);
        const Vector y1 = (Vector(3) << -sn, c, 0.0).finished() / kMass;
        const Vector y2 = (Vector(3) << c / kMass, sn / kMass, kArm / kInertia).finished();
        const Vector y12 = -(kArm / (kMass * kInertia)) * (Vector(3) << c, sn, 0.0).finished();
        const Vector expected = g.z[0](t) * y1 + g.z[1](t) * y2 + g.pair(0, 1, t) * y12;
        const Vector x = avg.rhs(t, s);
        EXPECT_LT((x.head(3) - s.qdot).norm(), 1e-15);
        EXPECT_LT((x.tail(3) - expected).norm(), 1e-9);
    }
}

TEST(AveragedSystem, MatchesGeneralAveragedEquation) {
    // Coefficients from quadrature of the synthesized inputs on a curved
    // configuration space: four-link chain with every joint actuated.
    models::ChainParameters p;
    p.masses = {1.0, 0.8, 1.2, 0.6};
    p.lengths = {1.0, 0.7, 0.9, 0.5};
    const auto sys = models::planar_chain(p, {1, 2, 3, 4});
    AveragedGains g;
    g.z = {constant(0.2), sinusoid(0.4, 1.0, 0.0), constant(-0.1), sinusoid(0.3, 0.6, 1.0)};
    g.z_pair[{0, 1}] = constant(0.7);
    g.z_pair[{1, 3}] = sinusoid(0.9, 1.1, 0.0);
    g.z_pair[{2, 3}] = constant(-0.4);
    const auto control = synthesize_controls(sys, g, PairEnumeration(4), 0.05);
    const AveragedSystem avg(sys, g);
    geoctrl::testing::Sampler sampler(23);
    for (int i = 0; i < 10; ++i) {
        const State s{sampler.uniform(4, -1.5, 1.5), sampler.uniform(4)};
        const double t = sampler.scalar(0.0, 4.0);
        const Vector general = general_averaged_acceleration(sys, control, t, s);
        const Vector reduced = avg.rhs(t, s).tail(4);
        EXPECT_LT((general - reduced).norm() / std::max(1.0, reduced.norm()), 1e-6);
    }
}

TEST(AveragedSystem, SimulateRecordsGains) {
    const auto g = two_input_gains();
    const AveragedSystem avg(test_pvtol(), g);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    const auto traj = avg.simulate({Vector::Zero(3), Vector::Zero(3)}, 0.0, 1.0, cfg);
    ASSERT_EQ(traj.size(), 101u);
    ASSERT_EQ(traj.m(), 3);
    EXPECT_NEAR(traj.inputs[50][2], g.pair(0, 1, 0.5), 1e-15);
    EXPECT_NEAR(traj.inputs[50][1], g.z[1](0.5), 1e-15);
}

TEST(Audit, TwoInputCoefficients) {
    geoctrl::testing::Sampler sampler(31);
    std::vector<double> times;
    for (int i = 0; i < 20; ++i) {
        times.push_back(sampler.scalar(0.0, 10.0));
    }
    const auto rows = audit_coefficients(two_input_gains(), PairEnumeration(2), times);
    ASSERT_EQ(rows.size(), 60u);
    for (const auto& r : rows) {
        EXPECT_LT(r.difference, 1e-6) << r.a << "," << r.b << " t = " << r.t;
    }
}

TEST(Audit, ThreeInputCoefficientsWithCustomFrequencies) {
    geoctrl::testing::Sampler sampler(37);
    std::vector<double> times;
    for (int i = 0; i < 20; ++i) {
        times.push_back(sampler.scalar(0.0, 10.0));
    }
    for (const auto& e : {PairEnumeration(3),
                          PairEnumeration(3, {{{0, 1}, 3}, {{0, 2}, 1}, {{1, 2}, 4}})}) {
        const auto rows = audit_coefficients(three_input_gains(), e, times);
        ASSERT_EQ(rows.size(), 120u);
        for (const auto& r : rows) {
            EXPECT_LT(r.difference, 1e-6) << r.a << "," << r.b << " t = " << r.t;
        }
    }
}

TEST(Audit, DetectsCollidingFrequencies) {
    // Building the fast inputs by hand with equal frequencies breaks the
    // off-diagonal identity, which the audit must expose.
    const auto g = three_input_gains();
    const auto fast = [&g](double tau, double t) {
        const double p = std::sqrt(2.0) * std::cos(tau);
        Vector w(3);
        w << g.pair(0, 1, t) * p + g.pair(0, 2, t) * p, -p + g.pair(1, 2, t) * p, -p - p;
        return w;
    };
    const double t = 0.3;
    std::vector<FastFunction> u;
    for (int a = 0; a < 3; ++a) {
        u.push_back([&fast, a, t](double tau) { return fast(tau, t)[a]; });
    }
    const double u01 = averaged_iterated_integral({u[0], u[1]}, {1, 1});
    EXPECT_GT(std::abs(-u01 - g.pair(0, 1, t)), 0.1);
}

TEST(Audit, JsonLayout) {
    const auto rows = audit_coefficients(two_input_gains(), PairEnumeration(2), {0.5});
    std::ostringstream os;
    write_audit_json(os, rows);
    const std::string s = os.str();
    EXPECT_EQ(s.front(), '[');
    EXPECT_NE(s.find("\"pair\": \"1,1\""), std::string::npos);
    EXPECT_NE(s.find("\"pair\": \"1,2\""), std::string::npos);
    EXPECT_NE(s.find("\"difference\": "), std::string::npos);
}

TEST(ConvergenceStudy, PvtolErrorIsFirstOrder) {
    AveragedGains g;
    g.z = {constant(0.0), sinusoid(0.5, 1.0, 0.0)};
    g.z_pair[{0, 1}] = constant(1.0);
    ConvergenceOptions opts;
    opts.threads = 2;
    const auto study = convergence_study(models::pvtol(), g, PairEnumeration(2),
                                         {Vector::Zero(3), Vector::Zero(3)}, 5.0,
                                         {0.1, 0.05, 0.025, 0.0125}, opts);
    ASSERT_EQ(study.rows.size(), 4u);
    EXPECT_GE(study.slope, 0.7);
    EXPECT_LE(study.slope, 1.3);
    for (std::size_t i = 1; i < study.rows.size(); ++i) {
        EXPECT_LT(study.rows[i].max_error, study.rows[i - 1].max_error);
        EXPECT_LE(study.rows[i].dt, study.rows[i].epsilon * 2.0 * M_PI / 50.0 + 1e-15);
    }
    EXPECT_TRUE(study.warnings.empty());
}

TEST(ConvergenceStudy, ThreadCountDoesNotChangeResults) {
    AveragedGains g;
    g.z = {constant(0.0), sinusoid(0.5, 1.0, 0.0)};
    g.z_pair[{0, 1}] = constant(1.0);
    ConvergenceOptions one, three;
    three.threads = 3;
    const State x0{Vector::Zero(3), Vector::Zero(3)};
    const auto a = convergence_study(models::pvtol(), g, PairEnumeration(2), x0, 1.0,
                                     {0.1, 0.05, 0.025}, one);
    const auto b = convergence_study(models::pvtol(), g, PairEnumeration(2), x0, 1.0,
                                     {0.1, 0.05, 0.025}, three);
    std::ostringstream sa, sb;
    write_convergence_csv(sa, a);
    write_convergence_csv(sb, b);
    EXPECT_EQ(sa.str(), sb.str());
    EXPECT_EQ(sa.str().substr(0, sa.str().find('\n')), "epsilon,max_err,slope_partial");
}

TEST(ConvergenceStudy, CoarseStepWarns) {
    AveragedGains g;
    g.z = {constant(0.0), constant(0.1)};
    ConvergenceOptions opts;
    opts.fixed_dt = 0.01;
    const auto study = convergence_study(models::pvtol(), g, PairEnumeration(2),
                                         {Vector::Zero(3), Vector::Zero(3)}, 0.5, {0.02}, opts);
    ASSERT_EQ(study.warnings.size(), 1u);
    EXPECT_NE(study.warnings[0].find("exceeds"), std::string::npos);
}

TEST(ConvergenceStudy, DampedPlanarBodyErrorIsFirstOrder) {
    AveragedGains g;
    g.z = {sinusoid(0.3, 1.0, 0.0), constant(0.0)};
    g.z_pair[{0, 1}] = constant(-0.8);
    const auto study = convergence_study(models::planar_body(1.0, 1.0, 1.0, 0.1), g,
                                         PairEnumeration(2), {Vector::Zero(3), Vector::Zero(3)},
                                         5.0, {0.1, 0.05, 0.025, 0.0125});
    EXPECT_GE(study.slope, 0.7);
    EXPECT_LE(study.slope, 1.3);
    for (std::size_t i = 1; i < study.rows.size(); ++i) {
        EXPECT_LT(study.rows[i].max_error, study.rows[i - 1].max_error);
    }
}

TEST(ConvergenceStudy, ZeroGainsGiveZeroError) {
    // m = 1 keeps the slow inputs free of the span correction.
    AveragedGains g;
    g.z = {constant(0.0)};
    const State x0{Vector::Zero(3), (Vector(3) << 0.2, -0.1, 0.3).finished()};
    const auto study = convergence_study(models::planar_body(1.0, 1.0, 1.0, 0.0, {1}), g,
                                         PairEnumeration(1), x0, 2.0, {0.1, 0.05});
    for (const auto& row : study.rows) {
        EXPECT_LT(row.max_error, 1e-10);
    }
}

TEST(AveragedSystem, ZeroGainsMatchUnforcedSimulation) {
    AveragedGains g;
    g.z = {constant(0.0), constant(0.0)};
    const auto sys = models::planar_body(1.0, 1.0, 1.0, 0.1);
    const AveragedSystem avg(sys, g);
    const State x0{(Vector(3) << 0.1, 0.2, -0.3).finished(), (Vector(3) << 0.5, -0.2, 0.7).finished()};
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    const auto a = avg.simulate(x0, 0.0, 2.0, cfg);
    const auto b = simulate(sys, zero_control(2), x0, 0.0, 2.0, cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.states[i].q, b.states[i].q);
        EXPECT_EQ(a.states[i].qdot, b.states[i].qdot);
    }
}
