#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <functional>
#include <vector>

namespace geoctrl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

using ScalarFunction = std::function<double(const Vector&)>;
using VectorFunction = std::function<Vector(const Vector&)>;
using MatrixFunction = std::function<Matrix(const Vector&)>;
/// (q, k) -> partial derivative of a matrix-valued function with respect to q^k.
using MatrixPartialFunction = std::function<Matrix(const Vector&, int)>;

/// How partial derivatives of M, V and F_a are obtained.
struct DerivativeProvider {
    enum class Kind { analytic, central_difference };

    Kind kind = Kind::central_difference;
    double step = 1e-5;

    static DerivativeProvider analytic() { return {Kind::analytic, 0.0}; }
    static DerivativeProvider central_difference(double h = 1e-5) {
        return {Kind::central_difference, h};
    }
};

/// Finite-difference settings for fields without an analytic Jacobian.
/// `order` is 2 (three-point stencil) or 4 (five-point stencil).
struct FiniteDifference {
    double step = 1e-5;
    int order = 2;
};

Matrix numeric_jacobian(const VectorFunction& f, const Vector& x, FiniteDifference fd = {});
Vector numeric_gradient(const ScalarFunction& f, const Vector& x, FiniteDifference fd = {});
/// Partial derivative of a matrix-valued function with respect to coordinate k.
Matrix numeric_matrix_partial(const MatrixFunction& f, const Vector& x, int k,
                              FiniteDifference fd = {});

/// A vector field on the configuration space together with its Jacobian
/// (dY^i/dq^j). When no Jacobian is supplied it falls back to central
/// differences of `eval`.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(VectorFunction eval, MatrixFunction jacobian = {},
                         FiniteDifference fd = {});

    static VectorField constant(Vector value);

    Vector operator()(const Vector& q) const { return eval_(q); }
    Matrix jacobian(const Vector& q) const;
    bool has_analytic_jacobian() const { return static_cast<bool>(jacobian_); }
    const FiniteDifference& finite_difference() const { return fd_; }

    explicit operator bool() const { return static_cast<bool>(eval_); }

private:
    VectorFunction eval_;
    MatrixFunction jacobian_;
    FiniteDifference fd_;
};

/// Raw model callables. Optional entries may be left empty.
struct SystemData {
    int n = 0;
    MatrixFunction inertia;
    MatrixPartialFunction inertia_partial;  ///< analytic dM/dq^k
    ScalarFunction potential;
    VectorFunction potential_gradient;      ///< analytic dV/dq
    MatrixFunction damping;                 ///< k(q), applied as k(q) qdot
    std::vector<VectorFunction> input_covectors;           ///< F_a
    std::vector<MatrixFunction> input_covector_jacobians;  ///< dF_a/dq, optional per input
};

/// Cholesky factor of M(q) with the cached matrix.
struct InertiaFactor {
    Matrix inertia;
    Eigen::LLT<Matrix> llt;

    Vector solve(const Vector& rhs) const { return llt.solve(rhs); }
    Matrix solve(const Matrix& rhs) const { return llt.solve(rhs); }
};

/// The forced mechanical system
///   qdd + Gamma(q)(qd, qd) = -M^{-1} dV/dq + k(q) qd + sum_a Y_a(q) u_a,
/// with Y_a = M^{-1} F_a. Immutable; safe to share across threads.
///
/// With the analytic provider, derivatives that the model did not supply
/// fall back to central differences with h = 1e-5.
class MechanicalSystem {
public:
    explicit MechanicalSystem(SystemData data,
                              DerivativeProvider provider = DerivativeProvider::central_difference());

    int n() const { return data_.n; }
    int m() const { return static_cast<int>(data_.input_covectors.size()); }

    const DerivativeProvider& derivative_provider() const { return provider_; }
    MechanicalSystem with_derivative_provider(DerivativeProvider provider) const;

    /// Copy of the system keeping only the listed inputs (0-based indices).
    MechanicalSystem with_inputs(const std::vector<int>& indices) const;

    bool has_potential() const { return static_cast<bool>(data_.potential); }
    bool has_damping() const { return static_cast<bool>(data_.damping); }

    /// Validated M(q); throws SingularInertiaError.
    Matrix inertia(const Vector& q) const;
    InertiaFactor factor(const Vector& q) const;
    Matrix inertia_partial(const Vector& q, int k) const;

    double potential(const Vector& q) const;
    Vector potential_gradient(const Vector& q) const;
    Matrix damping(const Vector& q) const;

    Vector input_covector(int a, const Vector& q) const;
    Matrix input_covector_jacobian(int a, const Vector& q) const;
    /// n x m matrix with columns F_a(q).
    Matrix input_covectors(const Vector& q) const;
    /// n x m matrix with columns Y_a(q).
    Matrix input_vectors(const Vector& q) const;

    /// Y_a as a vector field, Jacobian from dY/dq^k = M^{-1}(dF/dq^k - dM/dq^k Y).
    VectorField input_field(int a) const;
    std::vector<VectorField> input_fields() const;

    double kinetic_energy(const Vector& q, const Vector& qdot) const;

    const SystemData& data() const { return data_; }

private:
    FiniteDifference fd() const;

    SystemData data_;
    DerivativeProvider provider_;
};

}  // namespace geoctrl
