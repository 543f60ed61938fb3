#include "geoctrl/dynamics.hpp"

#include "geoctrl/errors.hpp"
#include "geoctrl/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

namespace geoctrl {

Vector State::stacked() const {
    Vector x(q.size() + qdot.size());
    x << q, qdot;
    return x;
}

State State::from_stacked(const Vector& x) {
    const auto n = x.size() / 2;
    return {x.head(n), x.tail(n)};
}

ControlLaw zero_control(int m) {
    return [m](double, const Vector&, const Vector&) { return Vector::Zero(m).eval(); };
}

ControlLaw constant_control(Vector u) {
    return [u = std::move(u)](double, const Vector&, const Vector&) { return u; };
}

State Trajectory::sample_at(double t) const {
    if (states.empty()) {
        throw PreconditionError("cannot sample an empty trajectory");
    }
    if (states.size() == 1 || t <= t0) {
        return states.front();
    }
    if (t >= t1) {
        return states.back();
    }
    const double pos = (t - t0) / dt;
    auto i = static_cast<std::size_t>(std::floor(pos));
    i = std::min(i, states.size() - 2);
    const double s = (t - times[i]) / dt;
    const State& a = states[i];
    const State& b = states[i + 1];

    const double h00 = 2 * s * s * s - 3 * s * s + 1;
    const double h10 = s * s * s - 2 * s * s + s;
    const double h01 = -2 * s * s * s + 3 * s * s;
    const double h11 = s * s * s - s * s;
    State out;
    out.q = h00 * a.q + h10 * dt * a.qdot + h01 * b.q + h11 * dt * b.qdot;
    if (accelerations.size() == states.size()) {
        out.qdot = h00 * a.qdot + h10 * dt * accelerations[i] + h01 * b.qdot +
                   h11 * dt * accelerations[i + 1];
    } else {
        out.qdot = (1 - s) * a.qdot + s * b.qdot;
    }
    return out;
}

std::size_t step_count(double t0, double t1, double dt) {
    if (!(dt > 0.0)) {
        throw PreconditionError("integrator step must be positive");
    }
    const double span = t1 - t0;
    if (span < 0.0) {
        throw PreconditionError("final time precedes initial time");
    }
    const double steps = std::round(span / dt);
    if (std::abs(steps * dt - span) > 1e-12 * std::max(1.0, std::abs(span))) {
        throw PreconditionError("integrator step does not divide the time span");
    }
    return static_cast<std::size_t>(steps);
}

Vector rk4_step(const std::function<Vector(double, const Vector&)>& f, double t, const Vector& x,
                double dt) {
    const Vector k1 = f(t, x);
    const Vector k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
    const Vector k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
    const Vector k4 = f(t + dt, x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Vector dynamics_rhs(const MechanicalSystem& sys, const State& state, const Vector& u) {
    const int n = sys.n();
    if (u.size() != sys.m()) {
        throw PreconditionError("input dimension does not match the number of inputs");
    }
    const InertiaFactor factor = sys.factor(state.q);
    Vector force = sys.input_covectors(state.q) * u;
    if (sys.has_potential()) {
        force -= sys.potential_gradient(state.q);
    }
    Vector acc = factor.solve(force) - christoffel(sys, state.q).contract(state.qdot, state.qdot);
    if (sys.has_damping()) {
        acc += sys.damping(state.q) * state.qdot;
    }
    Vector out(2 * n);
    out << state.qdot, acc;
    return out;
}

Trajectory simulate(const MechanicalSystem& sys, const ControlLaw& control, const State& x0,
                    double t0, double t1, const IntegratorConfig& cfg) {
    const std::size_t steps = step_count(t0, t1, cfg.dt);
    const int n = sys.n();
    if (x0.q.size() != n || x0.qdot.size() != n) {
        throw PreconditionError("initial state dimension does not match the system");
    }

    const auto rhs = [&](double t, const Vector& x) {
        const State s = State::from_stacked(x);
        return dynamics_rhs(sys, s, control(t, s.q, s.qdot));
    };

    Trajectory traj;
    traj.t0 = t0;
    traj.t1 = t1;
    traj.dt = cfg.dt;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.inputs.reserve(steps + 1);

    Vector x = x0.stacked();
    for (std::size_t i = 0;; ++i) {
        const double t = t0 + static_cast<double>(i) * cfg.dt;
        if (!x.allFinite()) {
            throw NonFiniteStateError(t, "state became non-finite at t = " + format_number(t));
        }
        const State s = State::from_stacked(x);
        const Vector u = control(t, s.q, s.qdot);
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.inputs.push_back(u);
        if (cfg.dense_output) {
            traj.accelerations.push_back(dynamics_rhs(sys, s, u).tail(n));
        }
        if (i == steps) {
            break;
        }
        x = rk4_step(rhs, t, x, cfg.dt);
    }
    return traj;
}

double InputReconstruction::max_residual() const {
    return residuals.empty() ? 0.0 : *std::max_element(residuals.begin(), residuals.end());
}

std::size_t InputReconstruction::worst() const {
    return static_cast<std::size_t>(
        std::distance(residuals.begin(), std::max_element(residuals.begin(), residuals.end())));
}

InputSolution solve_inputs(const MechanicalSystem& sys, const State& s, const Vector& qdd) {
    const Matrix mass = sys.inertia(s.q);
    Vector f = mass * (qdd + christoffel(sys, s.q).contract(s.qdot, s.qdot));
    if (sys.has_potential()) {
        f += sys.potential_gradient(s.q);
    }
    if (sys.has_damping()) {
        f -= mass * (sys.damping(s.q) * s.qdot);
    }

    const int m = sys.m();
    const Matrix covectors = sys.input_covectors(s.q);
    Eigen::JacobiSVD<Matrix> svd(covectors, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() < m || sv[sv.size() - 1] <= 1e-10 * std::max(sv[0], 1e-300)) {
        return {Vector::Constant(m, std::numeric_limits<double>::quiet_NaN()),
                std::numeric_limits<double>::infinity(), true};
    }
    const Vector u = svd.solve(f);
    return {u, (f - covectors * u).norm() / std::max(1.0, f.norm()), false};
}

InputReconstruction reconstruct_inputs(const MechanicalSystem& sys, const Trajectory& traj) {
    InputReconstruction out;
    if (traj.size() < 3) {
        return out;
    }
    for (std::size_t i = 1; i + 1 < traj.size(); ++i) {
        const Vector qdd = (traj.states[i + 1].qdot - traj.states[i - 1].qdot) / (2.0 * traj.dt);
        const InputSolution sol = solve_inputs(sys, traj.states[i], qdd);
        out.indices.push_back(i);
        out.inputs.push_back(sol.inputs);
        out.residuals.push_back(sol.residual);
        out.flagged.push_back(sol.flagged);
    }
    return out;
}

std::string format_number(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    const int n = traj.n();
    const int m = traj.m();
    os << "t";
    for (int i = 1; i <= n; ++i) {
        os << ",q" << i;
    }
    for (int i = 1; i <= n; ++i) {
        os << ",qd" << i;
    }
    for (int a = 1; a <= m; ++a) {
        os << ",u" << a;
    }
    os << "\n";
    for (std::size_t k = 0; k < traj.size(); ++k) {
        os << format_number(traj.times[k]);
        for (int i = 0; i < n; ++i) {
            os << "," << format_number(traj.states[k].q[i]);
        }
        for (int i = 0; i < n; ++i) {
            os << "," << format_number(traj.states[k].qdot[i]);
        }
        for (int a = 0; a < m; ++a) {
            os << "," << format_number(traj.inputs[k][a]);
        }
        os << "\n";
    }
}

}  // namespace geoctrl
