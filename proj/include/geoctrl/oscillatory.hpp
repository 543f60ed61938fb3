#pragma once

#include "geoctrl/dynamics.hpp"
#include "geoctrl/mechanical_system.hpp"

#include <cmath>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace geoctrl::oscillatory {

inline constexpr double default_period = 2.0 * M_PI;
inline constexpr std::size_t default_nodes = 2001;

using TimeFunction = std::function<double(double)>;
/// Fast input tau -> w(tau) at frozen slow time.
using FastFunction = std::function<double(double)>;

/// (T^{-1} / prod k_a!) int_0^T prod_a (int_0^s u_a)^{k_a} ds, composite
/// Simpson on `nodes` points per period.
double averaged_iterated_integral(const std::vector<FastFunction>& u, const std::vector<int>& k,
                                  double period = default_period,
                                  std::size_t nodes = default_nodes);

/// sqrt(2) N cos(N tau).
FastFunction psi(int n);

/// Injective map from input pairs (a, b), a < b (0-based), to frequencies.
class PairEnumeration {
public:
    /// Lexicographic: (0,1) -> 1, (0,2) -> 2, ..., (1,2) -> m, ...
    explicit PairEnumeration(int m);
    PairEnumeration(int m, std::map<std::pair<int, int>, int> frequencies);

    int m() const { return m_; }
    int operator()(int a, int b) const;
    /// Pairs in lexicographic order.
    std::vector<std::pair<int, int>> pairs() const;

private:
    int m_;
    std::map<std::pair<int, int>, int> frequencies_;
};

/// z_a(t) and z_ab(t), a < b, 0-based. Missing pair gains are zero.
struct AveragedGains {
    std::vector<TimeFunction> z;
    std::map<std::pair<int, int>, TimeFunction> z_pair;

    int m() const { return static_cast<int>(z.size()); }
    double pair(int a, int b, double t) const;
};

/// <Y_a:Y_a>(q) = sum_b alpha(a, b) Y_b(q) in the least-squares sense.
struct SpanCoefficients {
    Matrix alpha;
    /// max_a |<Y_a:Y_a> - sum_b alpha(a, b) Y_b| / max(1, |<Y_a:Y_a>|)
    double residual = 0.0;
};

/// Throws AssumptionViolationError when the residual exceeds tol.
SpanCoefficients span_coefficients(const MechanicalSystem& sys, const Vector& q,
                                   double tol = 1e-8);

/// u_a(t, q) = v_a(t, q) + w_a(t / eps, t) / eps.
class OscillatoryControl {
public:
    using Slow = std::function<Vector(double, const Vector&)>;
    using Fast = std::function<Vector(double, double)>;

    OscillatoryControl(Slow slow, Fast fast, double epsilon, double period);

    Vector slow(double t, const Vector& q) const { return slow_(t, q); }
    Vector fast(double tau, double t) const { return fast_(tau, t); }
    double epsilon() const { return epsilon_; }
    double period() const { return period_; }

    Vector input(double t, const Vector& q) const;
    ControlLaw law() const;

    /// Fast component a as a tau-function at frozen slow time t.
    FastFunction fast_component(int a, double t) const;

private:
    Slow slow_;
    Fast fast_;
    double epsilon_;
    double period_;
};

/// w_a = -sum_{c<a} psi_N(c,a) + sum_{c>a} z_ac psi_N(a,c), and
/// v_a = z_a + 1/2 sum_b alpha_ba(q) (#{c < b} + sum_{c>b} z_bc^2).
OscillatoryControl synthesize_controls(const MechanicalSystem& sys, const AveragedGains& gains,
                                       const PairEnumeration& enumeration, double epsilon,
                                       double period = default_period, double span_tol = 1e-8);

/// Fast inputs alone (no system needed), as used by synthesize_controls.
OscillatoryControl::Fast synthesized_fast_inputs(const AveragedGains& gains,
                                                 const PairEnumeration& enumeration);

/// nabla_r' r' = Y_0 + k r' + sum_a z_a Y_a + sum_{b<c} z_bc <Y_b:Y_c>.
class AveragedSystem {
public:
    AveragedSystem(MechanicalSystem sys, AveragedGains gains);

    const MechanicalSystem& system() const { return sys_; }
    const AveragedGains& gains() const { return gains_; }
    std::vector<std::pair<int, int>> pairs() const;

    /// State derivative (r', r'').
    Vector rhs(double t, const State& state) const;

    /// Fixed-step RK4. Inputs in the trajectory are (z_a, z_bc) in pair order.
    Trajectory simulate(const State& x0, double t0, double t1, const IntegratorConfig& cfg) const;

    /// n x (m + #pairs) matrix with columns Y_a and <Y_b:Y_c>.
    Matrix distribution(const Vector& q) const;
    int distribution_rank(const Vector& q, double tol = 1e-8) const;

private:
    MechanicalSystem sys_;
    AveragedGains gains_;
    std::vector<VectorField> fields_;
};

/// Averaged acceleration for arbitrary fast inputs w and slow inputs v,
/// with coefficients (1/2 U_a^2 - U_aa) on <Y_a:Y_a> and (U_a U_b - U_ab)
/// on <Y_a:Y_b> computed by quadrature.
Vector general_averaged_acceleration(const MechanicalSystem& sys, const OscillatoryControl& control,
                                     double t, const State& state,
                                     std::size_t nodes = default_nodes);

struct AuditRow {
    int a = 0;  ///< 0-based
    int b = 0;
    double t = 0.0;
    double coefficient = 0.0;  ///< from the quadrature of the synthesized w
    double target = 0.0;
    double difference = 0.0;
};

/// For each time: diagonal rows compare 1/2 U_a^2 - U_aa against the value
/// the slow inputs cancel, -1/2 (#{c < a} + sum_{c>a} z_ac^2); off-diagonal
/// rows compare U_a U_b - U_ab against z_ab.
std::vector<AuditRow> audit_coefficients(const AveragedGains& gains,
                                         const PairEnumeration& enumeration,
                                         const std::vector<double>& times,
                                         double period = default_period,
                                         std::size_t nodes = default_nodes);

/// JSON array of {"pair": "a,b" (1-based), "t", "coefficient", "target", "difference"}.
void write_audit_json(std::ostream& os, const std::vector<AuditRow>& rows);

struct ConvergenceOptions {
    double period = default_period;
    /// Upper bound on the step; the step used for each epsilon is the
    /// largest divisor of the horizon not above min(max_dt, eps T / 50).
    double max_dt = 1e-2;
    /// Force this step for every member (0 = automatic). Steps above
    /// eps T / 50 add a warning.
    double fixed_dt = 0.0;
    int threads = 1;
    double span_tol = 1e-8;
};

struct ConvergenceRow {
    double epsilon;
    double max_error;
    double dt;
};

struct ConvergenceStudy {
    std::vector<ConvergenceRow> rows;
    double slope = 0.0;
    std::vector<std::string> warnings;
    Trajectory reference;
};

/// Simulates the true system under the synthesized controls for every
/// epsilon and the averaged system once; error is max_t |q_eps(t) - r(t)|.
ConvergenceStudy convergence_study(const MechanicalSystem& sys, const AveragedGains& gains,
                                   const PairEnumeration& enumeration, const State& x0,
                                   double horizon, const std::vector<double>& epsilons,
                                   const ConvergenceOptions& options = {});

/// Header `epsilon,max_err,slope_partial`; slope_partial is the slope from
/// the previous row (nan on the first).
void write_convergence_csv(std::ostream& os, const ConvergenceStudy& study);

}  // namespace geoctrl::oscillatory
