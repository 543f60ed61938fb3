#pragma once

#include "geoctrl/dynamics.hpp"
#include "geoctrl/mechanical_system.hpp"
#include "geoctrl/numerics.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace geoctrl::series {

using InputSignal = std::function<double(double)>;

/// Y(q, t) = sum_a Y_a(q) u_a(t).
class ForcingField {
public:
    ForcingField(const MechanicalSystem& sys, std::vector<InputSignal> inputs);

    Vector operator()(const Vector& q, double t) const;
    const std::vector<InputSignal>& inputs() const { return inputs_; }
    const std::vector<VectorField>& fields() const { return fields_; }

    /// Same fields, every input multiplied by `factor`.
    ForcingField scaled(double factor) const;

private:
    std::vector<VectorField> fields_;
    std::vector<InputSignal> inputs_;
};

/// One iterated symmetric product with its time coefficient on the grid.
struct SeriesComponent {
    std::string key;  ///< canonical tree, e.g. "<1:<1:2>>"
    std::vector<double> coefficient;
    VectorField field;
};

/// V_k(q, t) = sum_c coefficient_c(t) * field_c(q). Time coefficients live
/// on the construction grid and are interpolated between nodes.
class SeriesTerm {
public:
    SeriesTerm(int order, TimeGrid grid, std::vector<SeriesComponent> components);

    int order() const { return order_; }
    Vector operator()(const Vector& q, double t) const;
    const std::vector<SeriesComponent>& components() const { return components_; }
    const TimeGrid& grid() const { return grid_; }

private:
    int order_;
    TimeGrid grid_;
    std::vector<SeriesComponent> components_;
};

struct SeriesOptions {
    int max_order = 4;
    /// Finite-difference settings for Jacobians of iterated products.
    FiniteDifference fd{1e-3, 4};
};

/// V_1 = int_0^t Y(q, s) ds and
/// V_k = -1/2 sum_{j<k} int_0^t <V_j(q, s) : V_{k-j}(q, s)> ds, k = 1..K.
/// Requires a system without potential or damping forces.
std::vector<SeriesTerm> series_terms(const MechanicalSystem& sys, const ForcingField& forcing,
                                     int order, const TimeGrid& grid,
                                     const SeriesOptions& options = {});

/// Integrates qdot = sum_{k<=K} V_k(q, t) from q0 with RK4. The returned
/// trajectory carries the series velocity and the applied inputs.
Trajectory predict_from_rest(const MechanicalSystem& sys, const ForcingField& forcing, int order,
                             const Vector& q0, double horizon, const IntegratorConfig& cfg,
                             const SeriesOptions& options = {});

struct TruncationRow {
    double epsilon;
    double error;
};

struct TruncationStudy {
    int order = 0;
    std::vector<TruncationRow> rows;
    double slope = 0.0;
};

/// For each epsilon, compares predict_from_rest (inputs scaled by epsilon)
/// against direct simulation from rest; error is max_t |q_series - q_sim|.
TruncationStudy truncation_study(const MechanicalSystem& sys, const ForcingField& unit_forcing,
                                 int order, const Vector& q0, double horizon,
                                 const IntegratorConfig& cfg, const std::vector<double>& epsilons,
                                 const SeriesOptions& options = {});

/// Header `epsilon,err`.
void write_truncation_csv(std::ostream& os, const TruncationStudy& study);

}  // namespace geoctrl::series
