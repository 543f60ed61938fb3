#pragma once

#include "geoctrl/mechanical_system.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace geoctrl {

/// Christoffel symbols Gamma^i_jk at a fixed configuration, stored densely.
/// Symmetric in (j, k).
class ChristoffelTensor {
public:
    explicit ChristoffelTensor(int n) : n_(n), values_(static_cast<std::size_t>(n) * n * n, 0.0) {}

    int n() const { return n_; }

    double operator()(int i, int j, int k) const { return values_[index(i, j, k)]; }
    double& operator()(int i, int j, int k) { return values_[index(i, j, k)]; }

    /// Gamma^i_jk x^j y^k.
    Vector contract(const Vector& x, const Vector& y) const;

    /// n x n matrix S with S(i, j) = Gamma^i_jk v^k.
    Matrix contract_last(const Vector& v) const;

private:
    std::size_t index(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n_ + j) * n_ + k;
    }

    int n_;
    std::vector<double> values_;
};

/// Levi-Civita connection of the kinetic-energy metric:
///   Gamma^i_jk = 1/2 M^{im} (dM_mj/dq^k + dM_mk/dq^j - dM_jk/dq^m).
/// Throws SingularInertiaError when M(q) fails the inertia guard.
ChristoffelTensor christoffel(const MechanicalSystem& sys, const Vector& q);

/// (nabla_X Y)^i = dY^i/dq^j X^j + Gamma^i_jk X^j Y^k.
Vector covariant_derivative(const MechanicalSystem& sys, const VectorField& x,
                            const VectorField& y, const Vector& q);

/// [X, Y] = DY X - DX Y.
Vector lie_bracket(const VectorField& x, const VectorField& y, const Vector& q);

/// <Ya:Yb> = nabla_Ya Yb + nabla_Yb Ya.
Vector symmetric_product(const MechanicalSystem& sys, const VectorField& ya,
                         const VectorField& yb, const Vector& q);

/// The bracket [X, Y] as a field. Its Jacobian comes from finite differences.
VectorField lie_bracket_field(VectorField x, VectorField y, FiniteDifference fd = {1e-4, 4});

/// <Ya:Yb> as a field. Its Jacobian comes from finite differences.
VectorField symmetric_product_field(MechanicalSystem sys, VectorField ya, VectorField yb,
                                    FiniteDifference fd = {1e-4, 4});

/// Vector field on the state space R^{2n}, x = (q, qdot). `homogeneity` is
/// the class index i of P_i when known: the first n components scale as
/// lambda^i and the last n as lambda^{i+1} under qdot -> lambda qdot.
class LiftedVectorField {
public:
    LiftedVectorField() = default;
    LiftedVectorField(int n, VectorFunction eval, MatrixFunction jacobian = {},
                      std::optional<int> homogeneity = std::nullopt,
                      FiniteDifference fd = {1e-4, 4});

    int n() const { return n_; }
    Vector operator()(const Vector& x) const { return eval_(x); }
    Vector operator()(const Vector& q, const Vector& qdot) const;
    Matrix jacobian(const Vector& x) const;
    bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
    std::optional<int> homogeneity() const { return homogeneity_; }

private:
    int n_ = 0;
    VectorFunction eval_;
    MatrixFunction jacobian_;
    std::optional<int> homogeneity_;
    FiniteDifference fd_;
};

/// Y^lift(q, qdot) = (0, Y(q)); class -1.
LiftedVectorField lift(const VectorField& y, int n);

/// Z(q, qdot) = (qdot, -Gamma(q)(qdot, qdot)); class 1.
LiftedVectorField geodesic_spray(const MechanicalSystem& sys);

/// k^lift(q, qdot) = (0, k(q) qdot); class 0.
LiftedVectorField damping_lift(const MechanicalSystem& sys);

/// Bracket on R^{2n}; the result carries class i + j when both classes are known.
LiftedVectorField lie_bracket(const LiftedVectorField& x, const LiftedVectorField& y);

/// Largest deviation from the scaling law of the field's homogeneity class,
/// relative to max(1, |value|), over the given lambdas at (q, qdot).
double homogeneity_defect(const LiftedVectorField& field, int homogeneity, const Vector& q,
                          const Vector& qdot, const std::vector<double>& lambdas);

}  // namespace geoctrl
