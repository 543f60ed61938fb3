#include "geoctrl/oscillatory.hpp"

#include "geoctrl/errors.hpp"
#include "geoctrl/geometry.hpp"
#include "geoctrl/numerics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <atomic>
#include <exception>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace geoctrl::oscillatory {

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

void check_quadrature(double period, std::size_t nodes) {
    if (!(period > 0.0) || !std::isfinite(period)) {
        throw PreconditionError("averaging period must be positive");
    }
    if (nodes < 3) {
        throw PreconditionError("averaging needs at least 3 quadrature nodes");
    }
}

// Primitives W_a(s) = int_0^s u_a on the quadrature nodes.
std::vector<std::vector<double>> primitives(const std::vector<FastFunction>& u, double period,
                                            std::size_t nodes) {
    const double h = period / static_cast<double>(nodes - 1);
    std::vector<std::vector<double>> out;
    out.reserve(u.size());
    std::vector<double> samples(nodes);
    for (const auto& f : u) {
        for (std::size_t i = 0; i < nodes; ++i) {
            samples[i] = f(h * static_cast<double>(i));
        }
        out.push_back(cumulative_integral(samples, h));
    }
    return out;
}

// Period means of the primitives and of their pairwise products.
class PrimitiveMeans {
public:
    PrimitiveMeans(const std::vector<FastFunction>& u, double period, std::size_t nodes)
        : w_(primitives(u, period, nodes)), period_(period),
          h_(period / static_cast<double>(nodes - 1)), buffer_(nodes) {}

    double first(int a) { return simpson(w_[a], h_) / period_; }

    /// U_ab for a != b, U_aa for a == b.
    double second(int a, int b) {
        for (std::size_t i = 0; i < buffer_.size(); ++i) {
            buffer_[i] = w_[a][i] * w_[b][i];
        }
        const double mean = simpson(buffer_, h_) / period_;
        return a == b ? 0.5 * mean : mean;
    }

private:
    std::vector<std::vector<double>> w_;
    double period_;
    double h_;
    std::vector<double> buffer_;
};

std::vector<FastFunction> fast_components(const OscillatoryControl::Fast& fast, int m, double t) {
    std::vector<FastFunction> out;
    out.reserve(m);
    for (int a = 0; a < m; ++a) {
        out.push_back([fast, a, t](double tau) { return fast(tau, t)[a]; });
    }
    return out;
}

// #{c < a} + sum_{c > a} z_ac(t)^2
double diagonal_weight(const AveragedGains& gains, int a, double t) {
    double w = static_cast<double>(a);
    for (int c = a + 1; c < gains.m(); ++c) {
        const double z = gains.pair(a, c, t);
        w += z * z;
    }
    return w;
}

double factorial(int k) {
    double f = 1.0;
    for (int i = 2; i <= k; ++i) {
        f *= i;
    }
    return f;
}

}  // namespace

double averaged_iterated_integral(const std::vector<FastFunction>& u, const std::vector<int>& k,
                                  double period, std::size_t nodes) {
    if (u.size() != k.size()) {
        throw PreconditionError("iterated integral needs one exponent per input");
    }
    check_quadrature(period, nodes);
    std::vector<FastFunction> used;
    std::vector<int> powers;
    double denom = 1.0;
    for (std::size_t a = 0; a < u.size(); ++a) {
        if (k[a] < 0) {
            throw PreconditionError("iterated integral exponents must be non-negative");
        }
        if (k[a] > 0) {
            used.push_back(u[a]);
            powers.push_back(k[a]);
            denom *= factorial(k[a]);
        }
    }
    const auto w = primitives(used, period, nodes);
    std::vector<double> integrand(nodes, 1.0);
    for (std::size_t j = 0; j < w.size(); ++j) {
        for (std::size_t i = 0; i < nodes; ++i) {
            integrand[i] *= std::pow(w[j][i], powers[j]);
        }
    }
    const double h = period / static_cast<double>(nodes - 1);
    return simpson(integrand, h) / (period * denom);
}

FastFunction psi(int n) {
    if (n <= 0) {
        throw PreconditionError("psi frequency must be a positive integer");
    }
    const double amp = std::sqrt(2.0) * n;
    return [amp, n](double tau) { return amp * std::cos(n * tau); };
}

PairEnumeration::PairEnumeration(int m) : m_(m) {
    if (m < 1) {
        throw PreconditionError("pair enumeration needs at least one input");
    }
    int next = 1;
    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            frequencies_[{a, b}] = next++;
        }
    }
}

PairEnumeration::PairEnumeration(int m, std::map<std::pair<int, int>, int> frequencies)
    : m_(m), frequencies_(std::move(frequencies)) {
    if (m < 1) {
        throw PreconditionError("pair enumeration needs at least one input");
    }
    const std::size_t expected = static_cast<std::size_t>(m) * (m - 1) / 2;
    std::map<int, std::pair<int, int>> seen;
    for (const auto& [pair, n] : frequencies_) {
        const auto [a, b] = pair;
        if (a < 0 || b >= m || a >= b) {
            throw PreconditionError("pair (" + std::to_string(a + 1) + ", " +
                                    std::to_string(b + 1) + ") is not an ordered input pair");
        }
        if (n <= 0) {
            throw PreconditionError("pair frequencies must be positive integers");
        }
        if (!seen.emplace(n, pair).second) {
            throw PreconditionError("pair enumeration is not injective: frequency " +
                                    std::to_string(n) + " is used twice");
        }
    }
    if (frequencies_.size() != expected) {
        throw PreconditionError("pair enumeration must assign every input pair");
    }
}

int PairEnumeration::operator()(int a, int b) const {
    const auto it = frequencies_.find({std::min(a, b), std::max(a, b)});
    if (a == b || it == frequencies_.end()) {
        throw PreconditionError("no frequency for pair (" + std::to_string(a + 1) + ", " +
                                std::to_string(b + 1) + ")");
    }
    return it->second;
}

std::vector<std::pair<int, int>> PairEnumeration::pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < m_; ++a) {
        for (int b = a + 1; b < m_; ++b) {
            out.emplace_back(a, b);
        }
    }
    return out;
}

double AveragedGains::pair(int a, int b, double t) const {
    const auto it = z_pair.find({std::min(a, b), std::max(a, b)});
    return it == z_pair.end() ? 0.0 : it->second(t);
}

SpanCoefficients span_coefficients(const MechanicalSystem& sys, const Vector& q, double tol) {
    const int m = sys.m();
    const Matrix y = sys.input_vectors(q);
    const auto fields = sys.input_fields();
    Eigen::ColPivHouseholderQR<Matrix> qr(y);
    if (qr.rank() < m) {
        throw RankDeficientError("input vectors are rank deficient at " + describe(q));
    }
    SpanCoefficients out;
    out.alpha = Matrix::Zero(m, m);
    for (int a = 0; a < m; ++a) {
        const Vector s = symmetric_product(sys, fields[a], fields[a], q);
        const Vector coeffs = qr.solve(s);
        out.alpha.row(a) = coeffs.transpose();
        const double r = (s - y * coeffs).norm() / std::max(1.0, s.norm());
        out.residual = std::max(out.residual, r);
    }
    if (out.residual > tol) {
        throw AssumptionViolationError(
            out.residual, "<Y_a:Y_a> is not in the input span at " + describe(q) +
                              " (residual " + format_number(out.residual) + ")");
    }
    return out;
}

OscillatoryControl::OscillatoryControl(Slow slow, Fast fast, double epsilon, double period)
    : slow_(std::move(slow)), fast_(std::move(fast)), epsilon_(epsilon), period_(period) {
    if (!(epsilon > 0.0)) {
        throw PreconditionError("epsilon must be positive");
    }
    check_quadrature(period, 3);
}

Vector OscillatoryControl::input(double t, const Vector& q) const {
    return slow_(t, q) + fast_(t / epsilon_, t) / epsilon_;
}

ControlLaw OscillatoryControl::law() const {
    return [self = *this](double t, const Vector& q, const Vector&) { return self.input(t, q); };
}

FastFunction OscillatoryControl::fast_component(int a, double t) const {
    return [fast = fast_, a, t](double tau) { return fast(tau, t)[a]; };
}

OscillatoryControl::Fast synthesized_fast_inputs(const AveragedGains& gains,
                                                 const PairEnumeration& enumeration) {
    const int m = gains.m();
    if (enumeration.m() != m) {
        throw PreconditionError("pair enumeration and gains disagree on the number of inputs");
    }
    // amp * cos(n tau), scaled by z_ab(t) when `gain` is set.
    struct Term {
        double amp;
        int n;
        int a;
        int b;
        bool gain;
    };
    std::vector<std::vector<Term>> terms(m);
    for (int a = 0; a < m; ++a) {
        for (int c = 0; c < a; ++c) {
            const int n = enumeration(c, a);
            terms[a].push_back({-std::sqrt(2.0) * n, n, c, a, false});
        }
        for (int c = a + 1; c < m; ++c) {
            const int n = enumeration(a, c);
            terms[a].push_back({std::sqrt(2.0) * n, n, a, c, true});
        }
    }
    return [gains, terms, m](double tau, double t) {
        Vector w = Vector::Zero(m);
        for (int a = 0; a < m; ++a) {
            for (const auto& term : terms[a]) {
                const double scale = term.gain ? gains.pair(term.a, term.b, t) : 1.0;
                w[a] += scale * term.amp * std::cos(term.n * tau);
            }
        }
        return w;
    };
}

OscillatoryControl synthesize_controls(const MechanicalSystem& sys, const AveragedGains& gains,
                                       const PairEnumeration& enumeration, double epsilon,
                                       double period, double span_tol) {
    const int m = sys.m();
    if (gains.m() != m) {
        throw PreconditionError("gains must provide one z_a per input (" + std::to_string(m) +
                                ")");
    }
    auto fast = synthesized_fast_inputs(gains, enumeration);
    OscillatoryControl::Slow slow = [sys, gains, m, span_tol](double t, const Vector& q) {
        Vector v(m);
        for (int a = 0; a < m; ++a) {
            v[a] = gains.z[a](t);
        }
        if (m > 1) {
            const SpanCoefficients span = span_coefficients(sys, q, span_tol);
            for (int b = 0; b < m; ++b) {
                v += 0.5 * diagonal_weight(gains, b, t) * span.alpha.row(b).transpose();
            }
        }
        return v;
    };
    return OscillatoryControl(std::move(slow), std::move(fast), epsilon, period);
}

AveragedSystem::AveragedSystem(MechanicalSystem sys, AveragedGains gains)
    : sys_(std::move(sys)), gains_(std::move(gains)) {
    if (gains_.m() != sys_.m()) {
        throw PreconditionError("gains must provide one z_a per input (" +
                                std::to_string(sys_.m()) + ")");
    }
    for (const auto& [pair, z] : gains_.z_pair) {
        if (pair.first < 0 || pair.second >= sys_.m() || pair.first >= pair.second) {
            throw PreconditionError("pair gain on an invalid input pair");
        }
    }
    fields_ = sys_.input_fields();
}

std::vector<std::pair<int, int>> AveragedSystem::pairs() const {
    return PairEnumeration(sys_.m()).pairs();
}

Vector AveragedSystem::rhs(double t, const State& state) const {
    const int m = sys_.m();
    const int n = sys_.n();
    Vector z(m);
    for (int a = 0; a < m; ++a) {
        z[a] = gains_.z[a](t);
    }
    Vector x = dynamics_rhs(sys_, state, z);
    for (const auto& [pair, gain] : gains_.z_pair) {
        const double zbc = gain(t);
        if (zbc != 0.0) {
            x.tail(n) += zbc * symmetric_product(sys_, fields_[pair.first], fields_[pair.second],
                                                 state.q);
        }
    }
    return x;
}

Trajectory AveragedSystem::simulate(const State& x0, double t0, double t1,
                                    const IntegratorConfig& cfg) const {
    const std::size_t steps = step_count(t0, t1, cfg.dt);
    const int n = sys_.n();
    if (x0.q.size() != n || x0.qdot.size() != n) {
        throw PreconditionError("initial state dimension does not match the system");
    }
    const auto f = [this](double t, const Vector& x) { return rhs(t, State::from_stacked(x)); };
    const auto ps = pairs();

    Trajectory traj;
    traj.t0 = t0;
    traj.t1 = t1;
    traj.dt = cfg.dt;
    Vector x = x0.stacked();
    for (std::size_t i = 0;; ++i) {
        const double t = t0 + static_cast<double>(i) * cfg.dt;
        if (!x.allFinite()) {
            throw NonFiniteStateError(t, "state became non-finite at t = " + format_number(t));
        }
        const State s = State::from_stacked(x);
        Vector u(sys_.m() + static_cast<int>(ps.size()));
        for (int a = 0; a < sys_.m(); ++a) {
            u[a] = gains_.z[a](t);
        }
        for (std::size_t p = 0; p < ps.size(); ++p) {
            u[sys_.m() + static_cast<int>(p)] = gains_.pair(ps[p].first, ps[p].second, t);
        }
        traj.times.push_back(t);
        traj.states.push_back(s);
        traj.inputs.push_back(u);
        if (cfg.dense_output) {
            traj.accelerations.push_back(rhs(t, s).tail(n));
        }
        if (i == steps) {
            break;
        }
        x = rk4_step(f, t, x, cfg.dt);
    }
    return traj;
}

Matrix AveragedSystem::distribution(const Vector& q) const {
    const int m = sys_.m();
    const auto ps = pairs();
    Matrix d(sys_.n(), m + static_cast<int>(ps.size()));
    d.leftCols(m) = sys_.input_vectors(q);
    for (std::size_t p = 0; p < ps.size(); ++p) {
        d.col(m + static_cast<int>(p)) =
            symmetric_product(sys_, fields_[ps[p].first], fields_[ps[p].second], q);
    }
    return d;
}

int AveragedSystem::distribution_rank(const Vector& q, double tol) const {
    const Vector sv = Eigen::JacobiSVD<Matrix>(distribution(q)).singularValues();
    if (sv.size() == 0 || sv[0] == 0.0) {
        return 0;
    }
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        rank += sv[i] > tol * sv[0] ? 1 : 0;
    }
    return rank;
}

Vector general_averaged_acceleration(const MechanicalSystem& sys, const OscillatoryControl& control,
                                     double t, const State& state, std::size_t nodes) {
    check_quadrature(control.period(), nodes);
    const int m = sys.m();
    const int n = sys.n();
    const auto fields = sys.input_fields();
    PrimitiveMeans means(fast_components([&control](double tau, double s) {
                             return control.fast(tau, s);
                         },
                                         m, t),
                         control.period(), nodes);
    Vector ubar(m);
    for (int a = 0; a < m; ++a) {
        ubar[a] = means.first(a);
    }
    Vector acc = dynamics_rhs(sys, state, control.slow(t, state.q)).tail(n);
    for (int a = 0; a < m; ++a) {
        const double c = 0.5 * ubar[a] * ubar[a] - means.second(a, a);
        if (c != 0.0) {
            acc += c * symmetric_product(sys, fields[a], fields[a], state.q);
        }
        for (int b = a + 1; b < m; ++b) {
            const double cab = ubar[a] * ubar[b] - means.second(a, b);
            if (cab != 0.0) {
                acc += cab * symmetric_product(sys, fields[a], fields[b], state.q);
            }
        }
    }
    return acc;
}

std::vector<AuditRow> audit_coefficients(const AveragedGains& gains,
                                         const PairEnumeration& enumeration,
                                         const std::vector<double>& times, double period,
                                         std::size_t nodes) {
    check_quadrature(period, nodes);
    const int m = gains.m();
    const auto fast = synthesized_fast_inputs(gains, enumeration);
    std::vector<AuditRow> rows;
    for (double t : times) {
        PrimitiveMeans means(fast_components(fast, m, t), period, nodes);
        Vector ubar(m);
        for (int a = 0; a < m; ++a) {
            ubar[a] = means.first(a);
        }
        for (int a = 0; a < m; ++a) {
            for (int b = a; b < m; ++b) {
                AuditRow row;
                row.a = a;
                row.b = b;
                row.t = t;
                if (a == b) {
                    row.coefficient = 0.5 * ubar[a] * ubar[a] - means.second(a, a);
                    row.target = -0.5 * diagonal_weight(gains, a, t);
                } else {
                    row.coefficient = ubar[a] * ubar[b] - means.second(a, b);
                    row.target = gains.pair(a, b, t);
                }
                row.difference = std::abs(row.coefficient - row.target);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_audit_json(std::ostream& os, const std::vector<AuditRow>& rows) {
    os << "[\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        os << "  {\"pair\": \"" << r.a + 1 << "," << r.b + 1 << "\", \"t\": " << format_number(r.t)
           << ", \"coefficient\": " << format_number(r.coefficient)
           << ", \"target\": " << format_number(r.target)
           << ", \"difference\": " << format_number(r.difference) << "}"
           << (i + 1 < rows.size() ? ",\n" : "\n");
    }
    os << "]\n";
}

ConvergenceStudy convergence_study(const MechanicalSystem& sys, const AveragedGains& gains,
                                   const PairEnumeration& enumeration, const State& x0,
                                   double horizon, const std::vector<double>& epsilons,
                                   const ConvergenceOptions& options) {
    if (epsilons.empty()) {
        throw PreconditionError("convergence study needs at least one epsilon");
    }
    if (!(horizon > 0.0) || !(options.max_dt > 0.0)) {
        throw PreconditionError("horizon and max_dt must be positive");
    }
    for (double eps : epsilons) {
        if (!(eps > 0.0)) {
            throw PreconditionError("epsilon values must be positive");
        }
    }
    const auto steps_for = [horizon](double bound) {
        return horizon / std::ceil(horizon / bound - 1e-9);
    };

    ConvergenceStudy study;
    const AveragedSystem averaged(sys, gains);
    IntegratorConfig ref_cfg;
    ref_cfg.dt = steps_for(options.max_dt);
    study.reference = averaged.simulate(x0, 0.0, horizon, ref_cfg);

    study.rows.resize(epsilons.size());
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        const double eps = epsilons[i];
        const double bound = eps * options.period / 50.0;
        const double dt =
            options.fixed_dt > 0.0 ? options.fixed_dt : steps_for(std::min(options.max_dt, bound));
        if (dt > bound * (1.0 + 1e-9)) {
            study.warnings.push_back("epsilon " + format_number(eps) + ": dt " +
                                     format_number(dt) + " exceeds eps T / 50 = " +
                                     format_number(bound));
        }
        study.rows[i] = {eps, 0.0, dt};
    }

    std::vector<std::exception_ptr> errors(epsilons.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&]() {
        for (std::size_t i = next++; i < study.rows.size(); i = next++) {
            try {
                auto& row = study.rows[i];
                const auto control =
                    synthesize_controls(sys, gains, enumeration, row.epsilon, options.period,
                                        options.span_tol);
                IntegratorConfig cfg;
                cfg.dt = row.dt;
                const Trajectory traj = simulate(sys, control.law(), x0, 0.0, horizon, cfg);
                double err = 0.0;
                for (std::size_t k = 0; k < traj.size(); ++k) {
                    const double t = std::min(traj.times[k], horizon);
                    err = std::max(err,
                                   (traj.states[k].q - study.reference.sample_at(t).q).norm());
                }
                row.max_error = err;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(options.threads, 1, static_cast<int>(epsilons.size()));
    std::vector<std::thread> pool;
    for (int k = 1; k < threads; ++k) {
        pool.emplace_back(worker);
    }
    worker();
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }

    if (study.rows.size() >= 2) {
        std::vector<double> x, y;
        for (const auto& r : study.rows) {
            x.push_back(r.epsilon);
            y.push_back(r.max_error);
        }
        study.slope = loglog_slope(x, y);
    } else {
        study.slope = std::numeric_limits<double>::quiet_NaN();
    }
    return study;
}

void write_convergence_csv(std::ostream& os, const ConvergenceStudy& study) {
    os << "epsilon,max_err,slope_partial\n";
    for (std::size_t i = 0; i < study.rows.size(); ++i) {
        const auto& r = study.rows[i];
        double partial = std::numeric_limits<double>::quiet_NaN();
        if (i > 0) {
            const auto& p = study.rows[i - 1];
            partial = std::log(r.max_error / p.max_error) / std::log(r.epsilon / p.epsilon);
        }
        os << format_number(r.epsilon) << "," << format_number(r.max_error) << ","
           << format_number(partial) << "\n";
    }
}

}  // namespace geoctrl::oscillatory
