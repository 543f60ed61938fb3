#pragma once

#include "geoctrl/mechanical_system.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace geoctrl {

struct State {
    Vector q;
    Vector qdot;

    Vector stacked() const;
    static State from_stacked(const Vector& x);
};

/// (t, q, qdot) -> u in R^m.
using ControlLaw = std::function<Vector(double, const Vector&, const Vector&)>;

ControlLaw zero_control(int m);
ControlLaw constant_control(Vector u);

struct IntegratorConfig {
    enum class Method { rk4 };

    Method method = Method::rk4;
    double dt = 1e-3;
    /// Store accelerations so that `Trajectory::sample_at` interpolates
    /// velocities with cubic Hermite polynomials as well.
    bool dense_output = false;
};

/// Uniformly sampled states and the inputs applied at the sample times.
struct Trajectory {
    double t0 = 0.0;
    double t1 = 0.0;
    double dt = 0.0;
    std::vector<double> times;
    std::vector<State> states;
    std::vector<Vector> inputs;
    std::vector<Vector> accelerations;  ///< filled only with dense output

    std::size_t size() const { return states.size(); }
    int n() const { return states.empty() ? 0 : static_cast<int>(states.front().q.size()); }
    int m() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }

    /// Cubic Hermite interpolation of q (from q and qdot) at time t in [t0, t1].
    State sample_at(double t) const;
};

/// Number of RK4 steps covering [t0, t1]; throws PreconditionError when dt
/// does not divide the span to within 1e-12.
std::size_t step_count(double t0, double t1, double dt);

/// One classical RK4 step of x' = f(t, x).
Vector rk4_step(const std::function<Vector(double, const Vector&)>& f, double t, const Vector& x,
                double dt);

/// (qdot, -Gamma(q)(qdot, qdot) - M^{-1} dV/dq + k(q) qdot + sum_a Y_a(q) u_a).
Vector dynamics_rhs(const MechanicalSystem& sys, const State& state, const Vector& u);

/// Fixed-step RK4. The control law is evaluated at every stage time.
/// Throws NonFiniteStateError carrying the time of the first failure.
Trajectory simulate(const MechanicalSystem& sys, const ControlLaw& control, const State& x0,
                    double t0, double t1, const IntegratorConfig& cfg = {});

struct InputReconstruction {
    /// Sample indices into the trajectory (endpoints are dropped).
    std::vector<std::size_t> indices;
    std::vector<Vector> inputs;
    /// |f - sum_a u_a F_a| / max(1, |f|); +infinity at flagged samples.
    std::vector<double> residuals;
    std::vector<bool> flagged;

    double max_residual() const;
    /// Index into `indices` of the worst residual.
    std::size_t worst() const;
};

struct InputSolution {
    Vector inputs;
    double residual;  ///< same normalization as InputReconstruction
    bool flagged;     ///< input covectors rank deficient at q
};

/// Least-squares inputs producing acceleration qdd at the given state.
InputSolution solve_inputs(const MechanicalSystem& sys, const State& state, const Vector& qdd);

/// Least-squares inputs that reproduce the sampled motion. qdd comes from
/// second-order central differences of the sampled velocities.
InputReconstruction reconstruct_inputs(const MechanicalSystem& sys, const Trajectory& traj);

/// Header `t,q1..qn,qd1..qdn,u1..um`, 17 significant digits.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

/// Decimal text with 17 significant digits.
std::string format_number(double value);

}  // namespace geoctrl
