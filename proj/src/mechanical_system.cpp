#include "geoctrl/mechanical_system.hpp"

#include "geoctrl/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace geoctrl {

namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kSymmetryTolerance = 1e-12;

std::string format_point(const Vector& q) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        os << (i ? ", " : "") << q[i];
    }
    os << "]";
    return os.str();
}

// Weights of the central stencils for the first derivative.
template <typename F>
auto central(const F& f, const Vector& x, Eigen::Index k, const FiniteDifference& fd) {
    const double h = fd.step;
    Vector xp = x;
    Vector xm = x;
    if (fd.order == 4) {
        Vector xp2 = x;
        Vector xm2 = x;
        xp[k] += h;
        xm[k] -= h;
        xp2[k] += 2 * h;
        xm2[k] -= 2 * h;
        return ((8.0 * (f(xp) - f(xm)) - (f(xp2) - f(xm2))) / (12.0 * h)).eval();
    }
    xp[k] += h;
    xm[k] -= h;
    return ((f(xp) - f(xm)) / (2.0 * h)).eval();
}

}  // namespace

Matrix numeric_jacobian(const VectorFunction& f, const Vector& x, FiniteDifference fd) {
    const Vector f0 = f(x);
    Matrix jac(f0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        jac.col(k) = central(f, x, k, fd);
    }
    return jac;
}

Vector numeric_gradient(const ScalarFunction& f, const Vector& x, FiniteDifference fd) {
    Vector grad(x.size());
    const auto wrapped = [&](const Vector& y) { return Vector::Constant(1, f(y)); };
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        grad[k] = central(wrapped, x, k, fd)[0];
    }
    return grad;
}

Matrix numeric_matrix_partial(const MatrixFunction& f, const Vector& x, int k,
                              FiniteDifference fd) {
    return central(f, x, k, fd);
}

VectorField::VectorField(VectorFunction eval, MatrixFunction jacobian, FiniteDifference fd)
    : eval_(std::move(eval)), jacobian_(std::move(jacobian)), fd_(fd) {}

VectorField VectorField::constant(Vector value) {
    const auto n = value.size();
    return VectorField([value](const Vector&) { return value; },
                       [n](const Vector& q) { return Matrix::Zero(n, q.size()).eval(); });
}

Matrix VectorField::jacobian(const Vector& q) const {
    if (jacobian_) {
        return jacobian_(q);
    }
    return numeric_jacobian(eval_, q, fd_);
}

MechanicalSystem::MechanicalSystem(SystemData data, DerivativeProvider provider)
    : data_(std::move(data)), provider_(provider) {
    if (data_.n <= 0) {
        throw PreconditionError("mechanical system needs n >= 1");
    }
    if (!data_.inertia) {
        throw PreconditionError("mechanical system needs an inertia function");
    }
    if (data_.input_covectors.empty()) {
        throw PreconditionError("mechanical system needs at least one input");
    }
    if (m() > n()) {
        throw PreconditionError("mechanical system has more inputs than degrees of freedom");
    }
    if (!data_.input_covector_jacobians.empty() &&
        data_.input_covector_jacobians.size() != data_.input_covectors.size()) {
        throw PreconditionError("input covector Jacobians must match the inputs one-to-one");
    }
    if (provider_.kind == DerivativeProvider::Kind::central_difference && provider_.step <= 0) {
        throw PreconditionError("finite-difference step must be positive");
    }
}

MechanicalSystem MechanicalSystem::with_derivative_provider(DerivativeProvider provider) const {
    return MechanicalSystem(data_, provider);
}

MechanicalSystem MechanicalSystem::with_inputs(const std::vector<int>& indices) const {
    SystemData reduced = data_;
    reduced.input_covectors.clear();
    reduced.input_covector_jacobians.clear();
    for (int a : indices) {
        if (a < 0 || a >= m()) {
            throw PreconditionError("input index out of range");
        }
        reduced.input_covectors.push_back(data_.input_covectors[a]);
        if (!data_.input_covector_jacobians.empty()) {
            reduced.input_covector_jacobians.push_back(data_.input_covector_jacobians[a]);
        }
    }
    return MechanicalSystem(std::move(reduced), provider_);
}

FiniteDifference MechanicalSystem::fd() const {
    const double h =
        provider_.kind == DerivativeProvider::Kind::central_difference ? provider_.step : 1e-5;
    return {h, 2};
}

Matrix MechanicalSystem::inertia(const Vector& q) const {
    Matrix mass = data_.inertia(q);
    if (mass.rows() != n() || mass.cols() != n() || !mass.allFinite()) {
        throw SingularInertiaError("inertia matrix is malformed or non-finite at q = " +
                                   format_point(q));
    }
    const double scale = mass.norm();
    if ((mass - mass.transpose()).norm() > kSymmetryTolerance * std::max(1.0, scale)) {
        throw SingularInertiaError("inertia matrix is not symmetric at q = " + format_point(q));
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(mass, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxCondition) {
        throw SingularInertiaError("inertia matrix is singular or ill-conditioned at q = " +
                                   format_point(q));
    }
    return mass;
}

InertiaFactor MechanicalSystem::factor(const Vector& q) const {
    InertiaFactor f{inertia(q), {}};
    f.llt.compute(f.inertia);
    if (f.llt.info() != Eigen::Success) {
        throw SingularInertiaError("Cholesky factorization failed at q = " + format_point(q));
    }
    return f;
}

Matrix MechanicalSystem::inertia_partial(const Vector& q, int k) const {
    if (provider_.kind == DerivativeProvider::Kind::analytic && data_.inertia_partial) {
        return data_.inertia_partial(q, k);
    }
    return numeric_matrix_partial(data_.inertia, q, k, fd());
}

double MechanicalSystem::potential(const Vector& q) const {
    return data_.potential ? data_.potential(q) : 0.0;
}

Vector MechanicalSystem::potential_gradient(const Vector& q) const {
    if (!data_.potential) {
        return Vector::Zero(n());
    }
    if (provider_.kind == DerivativeProvider::Kind::analytic && data_.potential_gradient) {
        return data_.potential_gradient(q);
    }
    return numeric_gradient(data_.potential, q, fd());
}

Matrix MechanicalSystem::damping(const Vector& q) const {
    return data_.damping ? data_.damping(q) : Matrix::Zero(n(), n());
}

Vector MechanicalSystem::input_covector(int a, const Vector& q) const {
    return data_.input_covectors.at(a)(q);
}

Matrix MechanicalSystem::input_covector_jacobian(int a, const Vector& q) const {
    if (provider_.kind == DerivativeProvider::Kind::analytic &&
        !data_.input_covector_jacobians.empty() && data_.input_covector_jacobians.at(a)) {
        return data_.input_covector_jacobians[a](q);
    }
    return numeric_jacobian(data_.input_covectors.at(a), q, fd());
}

Matrix MechanicalSystem::input_covectors(const Vector& q) const {
    Matrix f(n(), m());
    for (int a = 0; a < m(); ++a) {
        f.col(a) = input_covector(a, q);
    }
    return f;
}

Matrix MechanicalSystem::input_vectors(const Vector& q) const {
    const Matrix y = factor(q).solve(input_covectors(q));
    if (!y.allFinite()) {
        throw SingularInertiaError("input vector fields are not finite at q = " + format_point(q));
    }
    return y;
}

VectorField MechanicalSystem::input_field(int a) const {
    if (a < 0 || a >= m()) {
        throw PreconditionError("input index out of range");
    }
    // Copy keeps the field valid independently of this object's lifetime.
    const MechanicalSystem self = *this;
    auto eval = [self, a](const Vector& q) -> Vector {
        return self.factor(q).solve(self.input_covector(a, q));
    };
    auto jac = [self, a](const Vector& q) -> Matrix {
        const InertiaFactor f = self.factor(q);
        const Vector y = f.solve(self.input_covector(a, q));
        Matrix rhs = self.input_covector_jacobian(a, q);
        for (int k = 0; k < self.n(); ++k) {
            rhs.col(k) -= self.inertia_partial(q, k) * y;
        }
        return f.solve(rhs);
    };
    return VectorField(std::move(eval), std::move(jac), fd());
}

std::vector<VectorField> MechanicalSystem::input_fields() const {
    std::vector<VectorField> fields;
    fields.reserve(m());
    for (int a = 0; a < m(); ++a) {
        fields.push_back(input_field(a));
    }
    return fields;
}

double MechanicalSystem::kinetic_energy(const Vector& q, const Vector& qdot) const {
    return 0.5 * qdot.dot(inertia(q) * qdot);
}

}  // namespace geoctrl
