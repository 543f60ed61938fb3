#include "geoctrl/geometry.hpp"

#include "geoctrl/errors.hpp"

#include <cmath>

namespace geoctrl {

namespace {

// D f(x) v by a central stencil along the unit direction of v.
Vector directional_derivative(const VectorFunction& f, const Vector& x, const Vector& v,
                              const FiniteDifference& fd) {
    const double norm = v.norm();
    if (norm == 0.0) {
        return Vector::Zero(f(x).size());
    }
    const Vector dir = v / norm;
    const double h = fd.step;
    Vector d;
    if (fd.order == 4) {
        d = (8.0 * (f(x + h * dir) - f(x - h * dir)) - (f(x + 2 * h * dir) - f(x - 2 * h * dir))) /
            (12.0 * h);
    } else {
        d = (f(x + h * dir) - f(x - h * dir)) / (2.0 * h);
    }
    return norm * d;
}

Vector apply_jacobian(const VectorField& field, const Vector& q, const Vector& v) {
    if (field.has_analytic_jacobian()) {
        return field.jacobian(q) * v;
    }
    return directional_derivative([&field](const Vector& p) { return field(p); }, q, v,
                                  field.finite_difference());
}

}  // namespace

Vector ChristoffelTensor::contract(const Vector& x, const Vector& y) const {
    Vector out = Vector::Zero(n_);
    for (int i = 0; i < n_; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_; ++j) {
            for (int k = 0; k < n_; ++k) {
                acc += (*this)(i, j, k) * x[j] * y[k];
            }
        }
        out[i] = acc;
    }
    return out;
}

Matrix ChristoffelTensor::contract_last(const Vector& v) const {
    Matrix out = Matrix::Zero(n_, n_);
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n_; ++k) {
                acc += (*this)(i, j, k) * v[k];
            }
            out(i, j) = acc;
        }
    }
    return out;
}

ChristoffelTensor christoffel(const MechanicalSystem& sys, const Vector& q) {
    const int n = sys.n();
    const InertiaFactor factor = sys.factor(q);
    std::vector<Matrix> partials;
    partials.reserve(n);
    for (int k = 0; k < n; ++k) {
        partials.push_back(sys.inertia_partial(q, k));
    }

    // First-kind symbols b_m(j,k) = dM_mj/dq^k + dM_mk/dq^j - dM_jk/dq^m.
    auto first_kind = [&](int j, int k) {
        Vector b(n);
        for (int m = 0; m < n; ++m) {
            b[m] = partials[k](m, j) + partials[j](m, k) - partials[m](j, k);
        }
        return b;
    };

    ChristoffelTensor gamma(n);
    for (int j = 0; j < n; ++j) {
        for (int k = j; k < n; ++k) {
            const Vector b = 0.5 * (first_kind(j, k) + first_kind(k, j));
            const Vector g = 0.5 * factor.solve(b);
            for (int i = 0; i < n; ++i) {
                gamma(i, j, k) = g[i];
                gamma(i, k, j) = g[i];
            }
        }
    }
    return gamma;
}

Vector covariant_derivative(const MechanicalSystem& sys, const VectorField& x,
                            const VectorField& y, const Vector& q) {
    const Vector xv = x(q);
    const Vector yv = y(q);
    return apply_jacobian(y, q, xv) + christoffel(sys, q).contract(xv, yv);
}

Vector lie_bracket(const VectorField& x, const VectorField& y, const Vector& q) {
    return apply_jacobian(y, q, x(q)) - apply_jacobian(x, q, y(q));
}

Vector symmetric_product(const MechanicalSystem& sys, const VectorField& ya,
                         const VectorField& yb, const Vector& q) {
    const Vector a = ya(q);
    const Vector b = yb(q);
    const ChristoffelTensor gamma = christoffel(sys, q);
    return apply_jacobian(ya, q, b) + apply_jacobian(yb, q, a) + gamma.contract(a, b) +
           gamma.contract(b, a);
}

VectorField lie_bracket_field(VectorField x, VectorField y, FiniteDifference fd) {
    return VectorField(
        [x = std::move(x), y = std::move(y)](const Vector& q) { return lie_bracket(x, y, q); },
        {}, fd);
}

VectorField symmetric_product_field(MechanicalSystem sys, VectorField ya, VectorField yb,
                                    FiniteDifference fd) {
    return VectorField(
        [sys = std::move(sys), ya = std::move(ya), yb = std::move(yb)](const Vector& q) {
            return symmetric_product(sys, ya, yb, q);
        },
        {}, fd);
}

LiftedVectorField::LiftedVectorField(int n, VectorFunction eval, MatrixFunction jacobian,
                                     std::optional<int> homogeneity, FiniteDifference fd)
    : n_(n), eval_(std::move(eval)), jacobian_(std::move(jacobian)),
      homogeneity_(homogeneity), fd_(fd) {}

Vector LiftedVectorField::operator()(const Vector& q, const Vector& qdot) const {
    Vector x(2 * n_);
    x << q, qdot;
    return eval_(x);
}

Matrix LiftedVectorField::jacobian(const Vector& x) const {
    if (jacobian_) {
        return jacobian_(x);
    }
    return numeric_jacobian(eval_, x, fd_);
}

LiftedVectorField lift(const VectorField& y, int n) {
    auto eval = [y, n](const Vector& x) -> Vector {
        Vector out = Vector::Zero(2 * n);
        out.tail(n) = y(x.head(n));
        return out;
    };
    auto jac = [y, n](const Vector& x) -> Matrix {
        Matrix out = Matrix::Zero(2 * n, 2 * n);
        out.bottomLeftCorner(n, n) = y.jacobian(x.head(n));
        return out;
    };
    return LiftedVectorField(n, std::move(eval), std::move(jac), -1);
}

LiftedVectorField geodesic_spray(const MechanicalSystem& sys) {
    const int n = sys.n();
    auto eval = [sys, n](const Vector& x) -> Vector {
        const Vector q = x.head(n);
        const Vector v = x.tail(n);
        Vector out(2 * n);
        out << v, -christoffel(sys, q).contract(v, v);
        return out;
    };
    // The velocity block is exact; the configuration block differentiates
    // Gamma(q)(v, v) with a five-point stencil.
    auto jac = [sys, n](const Vector& x) -> Matrix {
        const Vector q = x.head(n);
        const Vector v = x.tail(n);
        Matrix out = Matrix::Zero(2 * n, 2 * n);
        out.topRightCorner(n, n) = Matrix::Identity(n, n);
        const auto quad = [&sys, &v](const Vector& p) -> Vector {
            return -christoffel(sys, p).contract(v, v);
        };
        out.bottomLeftCorner(n, n) = numeric_jacobian(quad, q, {1e-3, 4});
        out.bottomRightCorner(n, n) = -2.0 * christoffel(sys, q).contract_last(v);
        return out;
    };
    return LiftedVectorField(n, std::move(eval), std::move(jac), 1);
}

LiftedVectorField damping_lift(const MechanicalSystem& sys) {
    const int n = sys.n();
    auto eval = [sys, n](const Vector& x) -> Vector {
        Vector out = Vector::Zero(2 * n);
        out.tail(n) = sys.damping(x.head(n)) * x.tail(n);
        return out;
    };
    return LiftedVectorField(n, std::move(eval), {}, 0, {1e-3, 4});
}

LiftedVectorField lie_bracket(const LiftedVectorField& x, const LiftedVectorField& y) {
    const auto apply = [](const LiftedVectorField& f, const Vector& at, const Vector& v) {
        if (f.has_analytic_jacobian()) {
            return (f.jacobian(at) * v).eval();
        }
        return directional_derivative([&f](const Vector& p) { return f(p); }, at, v,
                                      {1e-3, 4});
    };
    auto eval = [x, y, apply](const Vector& at) -> Vector {
        return apply(y, at, x(at)) - apply(x, at, y(at));
    };
    std::optional<int> cls;
    if (x.homogeneity() && y.homogeneity()) {
        cls = *x.homogeneity() + *y.homogeneity();
    }
    return LiftedVectorField(x.n(), std::move(eval), {}, cls, {1e-3, 4});
}

double homogeneity_defect(const LiftedVectorField& field, int homogeneity, const Vector& q,
                          const Vector& qdot, const std::vector<double>& lambdas) {
    const int n = field.n();
    const Vector base = field(q, qdot);
    double worst = 0.0;
    for (double lambda : lambdas) {
        const Vector scaled = field(q, (lambda * qdot).eval());
        Vector expected(2 * n);
        expected.head(n) = std::pow(lambda, homogeneity) * base.head(n);
        expected.tail(n) = std::pow(lambda, homogeneity + 1) * base.tail(n);
        const double err = (scaled - expected).norm() / std::max(1.0, scaled.norm());
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace geoctrl
