#include "geoctrl/kinematic.hpp"

#include "geoctrl/errors.hpp"
#include "geoctrl/geometry.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

namespace geoctrl::kinematic {

namespace {

std::string describe(const Vector& q) {
    std::ostringstream os;
    os << "q = (";
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        os << (i ? ", " : "") << format_number(q[i]);
    }
    os << ")";
    return os.str();
}

Vector canonical_sign(Vector h) {
    for (Eigen::Index i = 0; i < h.size(); ++i) {
        if (std::abs(h[i]) > 1e-12) {
            return h[i] < 0.0 ? Vector(-h) : h;
        }
    }
    return h;
}

double angle_between(const Vector& a, const Vector& b) {
    return std::min((a - b).norm(), (a + b).norm());
}

void add_unique(std::vector<Vector>& out, const Vector& h, double tol) {
    for (const auto& g : out) {
        if (angle_between(g, h) < tol) {
            return;
        }
    }
    out.push_back(canonical_sign(h));
}

// Zeros of A c^2 + 2B cs + C s^2 on the half circle.
std::vector<Vector> binary_roots(const Matrix& q) {
    const double a = q(0, 0), b = q(0, 1), c = q(1, 1);
    const double r = std::hypot(a - c, 2.0 * b);
    std::vector<Vector> out;
    if (r == 0.0) {
        return out;
    }
    const double x = -(a + c) / r;
    if (std::abs(x) > 1.0 + 1e-14) {
        return out;
    }
    const double delta = std::atan2(2.0 * b, a - c);
    const double spread = std::acos(std::clamp(x, -1.0, 1.0));
    for (double phi : {0.5 * (delta + spread), 0.5 * (delta - spread)}) {
        out.push_back((Vector(2) << std::cos(phi), std::sin(phi)).finished());
    }
    return out;
}

double form_value(const Matrix& q, const Vector& h) { return h.dot(q * h); }

bool solves_all(const std::vector<Matrix>& forms, const Vector& h, double tol) {
    for (const auto& f : forms) {
        if (std::abs(form_value(f, h)) > tol * std::max(f.norm(), 1e-300)) {
            return false;
        }
    }
    return true;
}

// Gauss-Newton on (h^T Q_l h, |h|^2 - 1) from one start.
bool projective_newton(const std::vector<Matrix>& forms, Vector& h, double tol) {
    const auto m = h.size();
    const auto rows = static_cast<Eigen::Index>(forms.size()) + 1;
    for (int iter = 0; iter < 100; ++iter) {
        Vector f(rows);
        Matrix jac(rows, m);
        for (std::size_t l = 0; l < forms.size(); ++l) {
            const double scale = forms[l].norm();
            f[l] = form_value(forms[l], h) / scale;
            jac.row(l) = 2.0 * (forms[l] * h).transpose() / scale;
        }
        f[rows - 1] = h.squaredNorm() - 1.0;
        jac.row(rows - 1) = 2.0 * h.transpose();
        if (f.head(rows - 1).cwiseAbs().maxCoeff() < 1e-3 * tol && std::abs(f[rows - 1]) < 1e-14) {
            return true;
        }
        const Vector step =
            Eigen::JacobiSVD<Matrix>(jac, Eigen::ComputeThinU | Eigen::ComputeThinV).solve(f);
        h -= step;
        if (!h.allFinite()) {
            return false;
        }
    }
    h.normalize();
    return solves_all(forms, h, tol);
}

}  // namespace

VectorField DecouplingCandidate::field(const MechanicalSystem& sys, FiniteDifference fd) const {
    auto h = coefficients;
    return VectorField([sys, h](const Vector& q) { return Vector(sys.input_vectors(q) * h(q)); },
                       {}, fd);
}

namespace {

Matrix complement_of(const Matrix& y, const Vector& q) {
    Eigen::JacobiSVD<Matrix> svd(y, Eigen::ComputeFullU);
    const auto& sv = svd.singularValues();
    if (sv[sv.size() - 1] <= 1e-10 * sv[0]) {
        throw RankDeficientError("input vectors are rank deficient at " + describe(q));
    }
    return svd.matrixU().rightCols(y.rows() - y.cols());
}

}  // namespace

Matrix input_complement(const MechanicalSystem& sys, const Vector& q) {
    return complement_of(sys.input_vectors(q), q);
}

double decoupling_residual(const MechanicalSystem& sys, const VectorField& v, const Vector& q) {
    const Matrix c = input_complement(sys, q);
    const Vector value = v(q);
    const Vector accel = covariant_derivative(sys, v, v, q);
    const double r1 = (c.transpose() * value).norm() / std::max(1.0, value.norm());
    const double r2 = (c.transpose() * accel).norm() / std::max(1.0, accel.norm());
    return std::max(r1, r2);
}

std::vector<Matrix> decoupling_forms(const MechanicalSystem& sys, const Vector& q) {
    const int n = sys.n();
    const int m = sys.m();
    const InertiaFactor fac = sys.factor(q);
    const Matrix y = fac.llt.solve(sys.input_covectors(q));
    const Matrix c = complement_of(y, q);
    const ChristoffelTensor gamma = christoffel(sys, q);

    // dy[a] = M^{-1} (dF_a - dM/dq^k Y_a), column k.
    std::vector<Matrix> dm;
    for (int k = 0; k < n; ++k) {
        dm.push_back(sys.inertia_partial(q, k));
    }
    std::vector<Matrix> dy;
    for (int a = 0; a < m; ++a) {
        Matrix rhs = sys.input_covector_jacobian(a, q);
        for (int k = 0; k < n; ++k) {
            rhs.col(k) -= dm[k] * y.col(a);
        }
        dy.push_back(fac.llt.solve(rhs));
    }

    std::vector<Matrix> forms(static_cast<std::size_t>(c.cols()), Matrix::Zero(m, m));
    for (int a = 0; a < m; ++a) {
        for (int b = a; b < m; ++b) {
            const Vector s = dy[a] * y.col(b) + dy[b] * y.col(a) +
                             gamma.contract(y.col(a), y.col(b)) +
                             gamma.contract(y.col(b), y.col(a));
            for (Eigen::Index l = 0; l < c.cols(); ++l) {
                const double v = 0.5 * c.col(l).dot(s);
                forms[l](a, b) = v;
                forms[l](b, a) = v;
            }
        }
    }
    return forms;
}

DecouplingSolutions find_decoupling_fields(const MechanicalSystem& sys, const Vector& q,
                                           const DecouplingOptions& options) {
    DecouplingSolutions out;
    const std::vector<Matrix> all = decoupling_forms(sys, q);
    double scale = 0.0;
    for (const auto& f : all) {
        scale = std::max(scale, f.norm());
    }
    std::vector<Matrix> forms;
    for (const auto& f : all) {
        if (f.norm() > 1e-12 * std::max(1.0, scale)) {
            forms.push_back(f);
        }
    }
    if (forms.empty()) {
        out.all_directions = true;
        return out;
    }

    if (sys.m() == 2) {
        const auto primary = std::max_element(forms.begin(), forms.end(),
                                              [](const Matrix& a, const Matrix& b) {
                                                  return a.norm() < b.norm();
                                              });
        for (const Vector& h : binary_roots(*primary)) {
            if (solves_all(forms, h, options.root_tol)) {
                add_unique(out.directions, h, options.angular_tol);
            }
        }
    } else {
        std::mt19937 rng(options.seed);
        std::normal_distribution<double> normal;
        for (int s = 0; s < options.starts; ++s) {
            Vector h(sys.m());
            for (auto& x : h) {
                x = normal(rng);
            }
            h.normalize();
            if (projective_newton(forms, h, options.root_tol)) {
                add_unique(out.directions, h.normalized(), options.angular_tol);
            }
        }
    }
    std::sort(out.directions.begin(), out.directions.end(), [](const Vector& a, const Vector& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
    });
    return out;
}

DecouplingCandidate follow_decoupling_root(const MechanicalSystem& sys, Vector reference,
                                           const DecouplingOptions& options) {
    reference.normalize();
    // The last returned direction becomes the next reference, so a path
    // stays on one branch.
    auto last = std::make_shared<Vector>(reference);
    return {[sys, last, options](const Vector& q) -> Vector {
        const DecouplingSolutions sol = find_decoupling_fields(sys, q, options);
        if (sol.all_directions) {
            return *last;
        }
        if (sol.directions.empty()) {
            throw PreconditionError("no decoupling direction exists at " + describe(q));
        }
        const Vector* best = &sol.directions.front();
        for (const auto& h : sol.directions) {
            if (std::abs(h.dot(*last)) > std::abs(best->dot(*last))) {
                best = &h;
            }
        }
        *last = best->dot(*last) < 0.0 ? Vector(-*best) : *best;
        return *last;
    }};
}

ControllabilityReport larc_rank(const std::vector<VectorField>& fields, const Vector& q,
                                int max_depth, double tol) {
    if (max_depth < 1) {
        throw PreconditionError("bracket depth must be at least 1");
    }
    ControllabilityReport report;
    const auto n = q.size();
    std::vector<Vector> columns;
    std::vector<VectorField> level = fields;
    for (int depth = 1; depth <= max_depth; ++depth) {
        if (depth > 1) {
            std::vector<VectorField> next;
            for (const auto& x : fields) {
                for (const auto& y : level) {
                    next.push_back(lie_bracket_field(x, y));
                }
            }
            level = std::move(next);
        }
        for (const auto& f : level) {
            columns.push_back(f(q));
        }
        Matrix span(n, static_cast<Eigen::Index>(columns.size()));
        for (std::size_t i = 0; i < columns.size(); ++i) {
            span.col(static_cast<Eigen::Index>(i)) = columns[i];
        }
        const Vector sv = Eigen::JacobiSVD<Matrix>(span).singularValues();
        int rank = 0;
        for (auto s : sv) {
            if (sv[0] > 0.0 && s > tol * sv[0]) {
                ++rank;
            }
        }
        report.rank = rank;
        report.depth = depth;
        if (rank == n) {
            break;
        }
    }
    report.verdict = report.rank == n;
    return report;
}

ControllabilityReport kinematic_controllability(const MechanicalSystem& sys, const Vector& q,
                                                int max_depth, double tol,
                                                const DecouplingOptions& options) {
    const DecouplingSolutions sol = find_decoupling_fields(sys, q, options);
    std::vector<Vector> directions = sol.directions;
    if (sol.all_directions) {
        for (int a = 0; a < sys.m(); ++a) {
            directions.push_back(Vector::Unit(sys.m(), a));
        }
    }
    std::vector<VectorField> fields;
    std::vector<double> residuals;
    for (const auto& h : directions) {
        VectorField v = follow_decoupling_root(sys, h, options).field(sys);
        residuals.push_back(decoupling_residual(sys, v, q));
        fields.push_back(std::move(v));
    }
    ControllabilityReport report;
    if (!fields.empty()) {
        report = larc_rank(fields, q, max_depth, tol);
    }
    report.residuals = std::move(residuals);
    return report;
}

TimeScaling::TimeScaling(Profile profile, double duration)
    : profile_(profile), duration_(duration) {
    if (!(duration > 0.0)) {
        throw PreconditionError("time scaling needs a positive duration");
    }
}

// Trapezoidal profile: the velocity ramps over the first and last quarter
// follow a smoothstep, so the acceleration is continuous. Peak rate 4/3 in
// normalized time; each ramp covers s = 1/6.
namespace {

constexpr double kPeak = 4.0 / 3.0;

double ramp_s(double tau) {
    const double u = 4.0 * tau;
    return kPeak * 0.25 * (u * u * u - 0.5 * u * u * u * u);
}

double ramp_sdot(double tau) {
    const double u = 4.0 * tau;
    return kPeak * u * u * (3.0 - 2.0 * u);
}

double ramp_sddot(double tau) {
    const double u = 4.0 * tau;
    return 4.0 * kPeak * 6.0 * u * (1.0 - u);
}

}  // namespace

double TimeScaling::s(double t) const {
    const double tau = std::clamp(t / duration_, 0.0, 1.0);
    if (profile_ == Profile::cubic) {
        return tau * tau * (3.0 - 2.0 * tau);
    }
    if (tau < 0.25) {
        return ramp_s(tau);
    }
    if (tau <= 0.75) {
        return 1.0 / 6.0 + kPeak * (tau - 0.25);
    }
    return 1.0 - ramp_s(1.0 - tau);
}

double TimeScaling::sdot(double t) const {
    const double tau = std::clamp(t / duration_, 0.0, 1.0);
    if (profile_ == Profile::cubic) {
        return 6.0 * tau * (1.0 - tau) / duration_;
    }
    if (tau < 0.25) {
        return ramp_sdot(tau) / duration_;
    }
    if (tau <= 0.75) {
        return kPeak / duration_;
    }
    return ramp_sdot(1.0 - tau) / duration_;
}

double TimeScaling::sddot(double t) const {
    const double tau = std::clamp(t / duration_, 0.0, 1.0);
    const double t2 = duration_ * duration_;
    if (profile_ == Profile::cubic) {
        return (6.0 - 12.0 * tau) / t2;
    }
    if (tau < 0.25) {
        return ramp_sddot(tau) / t2;
    }
    if (tau <= 0.75) {
        return 0.0;
    }
    return -ramp_sddot(1.0 - tau) / t2;
}

std::string to_string(TimeScaling::Profile profile) {
    return profile == TimeScaling::Profile::cubic ? "cubic" : "trapezoidal";
}

TimeScaling::Profile parse_profile(const std::string& name) {
    if (name == "cubic") {
        return TimeScaling::Profile::cubic;
    }
    if (name == "trapezoidal") {
        return TimeScaling::Profile::trapezoidal;
    }
    throw PreconditionError("unknown time scaling '" + name + "'");
}

Trajectory kinematic_plan(const MechanicalSystem& sys, const std::vector<PlanSegment>& segments,
                          const Vector& q0, double dt, double residual_tol) {
    if (segments.empty()) {
        throw PreconditionError("kinematic plan needs at least one segment");
    }
    Trajectory traj;
    traj.dt = dt;
    std::vector<std::size_t> first_sample;  // first sample index owned by each segment
    Vector q = q0;
    double start = 0.0;
    for (std::size_t j = 0; j < segments.size(); ++j) {
        const PlanSegment& seg = segments[j];
        const VectorField v = seg.candidate.field(sys);
        const double gain = seg.sign * seg.length;
        const auto velocity = [&](double t, const Vector& x) {
            return Vector(seg.scaling.sdot(t) * gain * v(x));
        };
        const std::size_t steps = step_count(0.0, seg.scaling.duration(), dt);
        first_sample.push_back(traj.size());
        for (std::size_t i = (j == 0 ? 0 : 1); i <= steps; ++i) {
            const double t = static_cast<double>(i) * dt;
            if (i > 0) {
                q = rk4_step(velocity, t - dt, q, dt);
            }
            if (!q.allFinite()) {
                throw NonFiniteStateError(start + t, "kinematic plan became non-finite");
            }
            traj.times.push_back(start + t);
            traj.states.push_back({q, velocity(t, q)});
        }
        start += seg.scaling.duration();
    }
    traj.t0 = 0.0;
    traj.t1 = start;

    const auto segment_of = [&](std::size_t sample) {
        std::size_t j = 0;
        while (j + 1 < first_sample.size() && first_sample[j + 1] <= sample) {
            ++j;
        }
        return j;
    };

    const InputReconstruction rec = reconstruct_inputs(sys, traj);
    for (std::size_t k = 0; k < rec.indices.size(); ++k) {
        if (rec.flagged[k] || rec.residuals[k] > residual_tol) {
            const std::size_t worst = rec.indices[rec.worst()];
            throw ResidualViolationError(
                segment_of(worst), worst, rec.max_residual(),
                "kinematic plan leaves the input span: segment " +
                    std::to_string(segment_of(worst)) + ", sample " + std::to_string(worst) +
                    ", residual " + format_number(rec.max_residual()));
        }
    }

    // Interior inputs from the reconstruction; the two ends use one-sided
    // second-order differences.
    const std::size_t last = traj.size() - 1;
    traj.inputs.assign(traj.size(), Vector::Zero(sys.m()));
    for (std::size_t k = 0; k < rec.indices.size(); ++k) {
        traj.inputs[rec.indices[k]] = rec.inputs[k];
    }
    if (traj.size() >= 3) {
        const auto& s = traj.states;
        const Vector head = (-3.0 * s[0].qdot + 4.0 * s[1].qdot - s[2].qdot) / (2.0 * dt);
        const Vector tail =
            (3.0 * s[last].qdot - 4.0 * s[last - 1].qdot + s[last - 2].qdot) / (2.0 * dt);
        traj.inputs[0] = solve_inputs(sys, s[0], head).inputs;
        traj.inputs[last] = solve_inputs(sys, s[last], tail).inputs;
    }
    return traj;
}

}  // namespace geoctrl::kinematic
