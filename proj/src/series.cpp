#include "geoctrl/series.hpp"

#include "geoctrl/errors.hpp"
#include "geoctrl/geometry.hpp"

#include <cmath>
#include <map>
#include <ostream>

namespace geoctrl::series {

ForcingField::ForcingField(const MechanicalSystem& sys, std::vector<InputSignal> inputs)
    : fields_(sys.input_fields()), inputs_(std::move(inputs)) {
    if (static_cast<int>(inputs_.size()) != sys.m()) {
        throw PreconditionError("forcing needs one input signal per input field");
    }
}

Vector ForcingField::operator()(const Vector& q, double t) const {
    Vector out = Vector::Zero(q.size());
    for (std::size_t a = 0; a < fields_.size(); ++a) {
        out += fields_[a](q) * inputs_[a](t);
    }
    return out;
}

ForcingField ForcingField::scaled(double factor) const {
    ForcingField copy = *this;
    for (auto& u : copy.inputs_) {
        u = [u, factor](double t) { return factor * u(t); };
    }
    return copy;
}

SeriesTerm::SeriesTerm(int order, TimeGrid grid, std::vector<SeriesComponent> components)
    : order_(order), grid_(grid), components_(std::move(components)) {}

Vector SeriesTerm::operator()(const Vector& q, double t) const {
    Vector out = Vector::Zero(q.size());
    for (const auto& c : components_) {
        const double weight = interpolate(grid_, c.coefficient, t);
        if (weight != 0.0) {
            out += weight * c.field(q);
        }
    }
    return out;
}

std::vector<SeriesTerm> series_terms(const MechanicalSystem& sys, const ForcingField& forcing,
                                     int order, const TimeGrid& grid,
                                     const SeriesOptions& options) {
    if (sys.has_potential() || sys.has_damping()) {
        throw PreconditionError("series expansion assumes no potential or damping forces");
    }
    if (order < 1 || order > options.max_order) {
        throw PreconditionError("series order must lie in 1.." + std::to_string(options.max_order));
    }
    if (grid.start != 0.0) {
        throw PreconditionError("series grid must start at t = 0");
    }

    // levels[k-1] maps canonical tree keys to components of V_k.
    std::vector<std::map<std::string, SeriesComponent>> levels(order);
    for (std::size_t a = 0; a < forcing.inputs().size(); ++a) {
        std::vector<double> u(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) {
            u[i] = forcing.inputs()[a](grid.time(i));
        }
        const std::string key = std::to_string(a + 1);
        levels[0][key] = {key, cumulative_integral(u, grid.spacing), forcing.fields()[a]};
    }

    for (int k = 2; k <= order; ++k) {
        auto& level = levels[k - 1];
        for (int j = 1; j < k; ++j) {
            for (const auto& [lkey, left] : levels[j - 1]) {
                for (const auto& [rkey, right] : levels[k - j - 1]) {
                    const std::string key =
                        lkey <= rkey ? "<" + lkey + ":" + rkey + ">" : "<" + rkey + ":" + lkey + ">";
                    std::vector<double> product(grid.size());
                    for (std::size_t i = 0; i < grid.size(); ++i) {
                        product[i] = left.coefficient[i] * right.coefficient[i];
                    }
                    const std::vector<double> integral = cumulative_integral(product, grid.spacing);
                    auto it = level.find(key);
                    if (it == level.end()) {
                        SeriesComponent c{key, std::vector<double>(grid.size(), 0.0),
                                          symmetric_product_field(sys, left.field, right.field,
                                                                  options.fd)};
                        it = level.emplace(key, std::move(c)).first;
                    }
                    for (std::size_t i = 0; i < grid.size(); ++i) {
                        it->second.coefficient[i] -= 0.5 * integral[i];
                    }
                }
            }
        }
    }

    std::vector<SeriesTerm> terms;
    for (int k = 1; k <= order; ++k) {
        std::vector<SeriesComponent> comps;
        for (auto& [key, c] : levels[k - 1]) {
            comps.push_back(std::move(c));
        }
        terms.emplace_back(k, grid, std::move(comps));
    }
    return terms;
}

Trajectory predict_from_rest(const MechanicalSystem& sys, const ForcingField& forcing, int order,
                             const Vector& q0, double horizon, const IntegratorConfig& cfg,
                             const SeriesOptions& options) {
    const std::size_t steps = step_count(0.0, horizon, cfg.dt);
    // RK4 stage times t, t + dt/2, t + dt fall on grid nodes; spacing <= 1/200.
    const auto refine = static_cast<std::size_t>(std::ceil(0.5 * cfg.dt * 200.0 - 1e-9));
    const std::size_t sub = std::max<std::size_t>(1, refine);
    const TimeGrid grid{0.0, 0.5 * cfg.dt / static_cast<double>(sub), 2 * sub * steps};
    const std::vector<SeriesTerm> terms = series_terms(sys, forcing, order, grid, options);

    const auto velocity = [&terms](double t, const Vector& q) {
        Vector v = Vector::Zero(q.size());
        for (const auto& term : terms) {
            v += term(q, t);
        }
        return v;
    };
    const auto inputs = [&forcing](double t) {
        Vector u(forcing.inputs().size());
        for (std::size_t a = 0; a < forcing.inputs().size(); ++a) {
            u[a] = forcing.inputs()[a](t);
        }
        return u;
    };

    Trajectory traj;
    traj.t0 = 0.0;
    traj.t1 = horizon;
    traj.dt = cfg.dt;
    Vector q = q0;
    for (std::size_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * cfg.dt;
        if (!q.allFinite()) {
            throw NonFiniteStateError(t, "series prediction became non-finite at t = " +
                                             format_number(t));
        }
        traj.times.push_back(t);
        traj.states.push_back({q, velocity(t, q)});
        traj.inputs.push_back(inputs(t));
        if (i == steps) {
            break;
        }
        q = rk4_step(velocity, t, q, cfg.dt);
    }
    return traj;
}

TruncationStudy truncation_study(const MechanicalSystem& sys, const ForcingField& unit_forcing,
                                 int order, const Vector& q0, double horizon,
                                 const IntegratorConfig& cfg, const std::vector<double>& epsilons,
                                 const SeriesOptions& options) {
    TruncationStudy study;
    study.order = order;
    for (double eps : epsilons) {
        const ForcingField forcing = unit_forcing.scaled(eps);
        const Trajectory predicted = predict_from_rest(sys, forcing, order, q0, horizon, cfg, options);
        const ControlLaw control = [&forcing](double t, const Vector&, const Vector&) {
            Vector u(forcing.inputs().size());
            for (std::size_t a = 0; a < forcing.inputs().size(); ++a) {
                u[a] = forcing.inputs()[a](t);
            }
            return u;
        };
        const Trajectory exact =
            simulate(sys, control, {q0, Vector::Zero(q0.size())}, 0.0, horizon, cfg);
        double err = 0.0;
        for (std::size_t i = 0; i < exact.size(); ++i) {
            err = std::max(err, (predicted.states[i].q - exact.states[i].q).norm());
        }
        study.rows.push_back({eps, err});
    }
    if (study.rows.size() >= 2) {
        std::vector<double> xs, ys;
        for (const auto& r : study.rows) {
            xs.push_back(r.epsilon);
            ys.push_back(r.error);
        }
        study.slope = loglog_slope(xs, ys);
    }
    return study;
}

void write_truncation_csv(std::ostream& os, const TruncationStudy& study) {
    os << "epsilon,err\n";
    for (const auto& r : study.rows) {
        os << format_number(r.epsilon) << "," << format_number(r.error) << "\n";
    }
}

}  // namespace geoctrl::series
