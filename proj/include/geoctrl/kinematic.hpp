#pragma once

#include "geoctrl/dynamics.hpp"
#include "geoctrl/mechanical_system.hpp"

#include <functional>
#include <string>
#include <vector>

namespace geoctrl::kinematic {

/// V(q) = sum_a h_a(q) Y_a(q).
struct DecouplingCandidate {
    std::function<Vector(const Vector&)> coefficients;

    VectorField field(const MechanicalSystem& sys, FiniteDifference fd = {1e-4, 4}) const;
};

/// Orthonormal basis of the complement of span{Y_a(q)}, one column per
/// direction. Throws RankDeficientError when the Y_a(q) lose rank.
Matrix input_complement(const MechanicalSystem& sys, const Vector& q);

/// max of |P V| / max(1, |V|) and |P nabla_V V| / max(1, |nabla_V V|),
/// where P projects onto the complement of the input span.
double decoupling_residual(const MechanicalSystem& sys, const VectorField& v, const Vector& q);

/// Symmetric matrices Q_l with nabla_V V = sum_l (h^T Q_l h) c_l + (span terms)
/// for V = sum_a h_a Y_a. Q_l(a, b) = 1/2 <c_l, <Y_a:Y_b>(q)>.
std::vector<Matrix> decoupling_forms(const MechanicalSystem& sys, const Vector& q);

struct DecouplingOptions {
    int starts = 100;           ///< random starts for m > 2
    unsigned seed = 7u;
    double angular_tol = 1e-6;  ///< duplicate roots
    double root_tol = 1e-10;    ///< |h^T Q_l h| relative to the form scale
};

struct DecouplingSolutions {
    /// Every direction decouples (m = n or all forms vanish).
    bool all_directions = false;
    /// Unit directions h, first nonzero entry positive.
    std::vector<Vector> directions;
};

/// Real projective zeros of h^T Q_l h = 0, l = 1..n-m, at q.
DecouplingSolutions find_decoupling_fields(const MechanicalSystem& sys, const Vector& q,
                                           const DecouplingOptions& options = {});

/// Decoupling field obtained by re-solving at every q and keeping the root
/// closest to the previously returned one, starting from `reference`, with
/// the sign aligned to it. The field is stateful: evaluate it along a path.
/// Copies share the state. Throws PreconditionError where no root exists.
DecouplingCandidate follow_decoupling_root(const MechanicalSystem& sys, Vector reference,
                                           const DecouplingOptions& options = {});

struct ControllabilityReport {
    int rank = 0;
    int depth = 0;
    bool verdict = false;
    std::vector<double> residuals;
};

/// Numerical rank of the fields and their iterated brackets up to
/// `max_depth` at q (singular values above tol * sigma_max). Stops early
/// once the rank reaches n; `depth` is the depth actually used.
ControllabilityReport larc_rank(const std::vector<VectorField>& fields, const Vector& q,
                                int max_depth, double tol = 1e-8);

/// Finds the decoupling fields at q, follows each root as a field, runs
/// larc_rank on them and records their decoupling residuals at q.
ControllabilityReport kinematic_controllability(const MechanicalSystem& sys, const Vector& q,
                                                int max_depth = 2, double tol = 1e-8,
                                                const DecouplingOptions& options = {});

/// s: [0, T] -> [0, 1] with zero rate at both ends. `cubic` is
/// 3 tau^2 - 2 tau^3. `trapezoidal` accelerates over the first quarter,
/// cruises at 4 / (3T) over the middle half and decelerates over the last
/// quarter; the ramps are smoothstep in velocity.
class TimeScaling {
public:
    enum class Profile { cubic, trapezoidal };

    TimeScaling(Profile profile, double duration);
    static TimeScaling cubic(double duration) { return {Profile::cubic, duration}; }
    static TimeScaling trapezoidal(double duration) { return {Profile::trapezoidal, duration}; }

    Profile profile() const { return profile_; }
    double duration() const { return duration_; }
    double s(double t) const;
    double sdot(double t) const;
    double sddot(double t) const;

private:
    Profile profile_;
    double duration_;
};

std::string to_string(TimeScaling::Profile profile);
TimeScaling::Profile parse_profile(const std::string& name);

struct PlanSegment {
    DecouplingCandidate candidate;
    double sign = 1.0;
    TimeScaling scaling;
    /// Parameter length: the segment follows sign * V for s in [0, length].
    double length = 1.0;
};

/// Residual threshold for reconstruct_inputs along a kinematic plan.
inline constexpr double plan_residual_tol = 1e-6;

/// Integrates qdot = sdot(t) * length * sign * V(q) segment by segment from
/// q0 (rest at every junction) and fills the inputs by reconstruction.
/// Throws ResidualViolationError naming the segment and the worst sample.
Trajectory kinematic_plan(const MechanicalSystem& sys, const std::vector<PlanSegment>& segments,
                          const Vector& q0, double dt, double residual_tol = plan_residual_tol);

}  // namespace geoctrl::kinematic
