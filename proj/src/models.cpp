#include "geoctrl/models.hpp"

#include "geoctrl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace geoctrl::models {

namespace {

MechanicalSystem select(SystemData data, const std::vector<int>& actuators) {
    const int total = static_cast<int>(data.input_covectors.size());
    std::vector<int> indices;
    for (int a : actuators) {
        if (a < 1 || a > total) {
            throw PreconditionError("actuator index " + std::to_string(a) + " out of range 1.." +
                                    std::to_string(total));
        }
        indices.push_back(a - 1);
    }
    return MechanicalSystem(std::move(data), DerivativeProvider::analytic()).with_inputs(indices);
}

// M = diag(mass, mass, inertia) on q = (x, y, theta).
SystemData rigid_planar_data(double mass, double inertia) {
    SystemData data;
    data.n = 3;
    Matrix m = Matrix::Zero(3, 3);
    m.diagonal() << mass, mass, inertia;
    data.inertia = [m](const Vector&) { return m; };
    data.inertia_partial = [](const Vector&, int) { return Matrix::Zero(3, 3).eval(); };
    return data;
}

// Covector of a body-frame force (fx, fy) applied at body point (px, py),
// expressed in (x, y, theta) coordinates, with its Jacobian.
void add_body_force(SystemData& data, double fx, double fy, double px, double py) {
    data.input_covectors.push_back([=](const Vector& q) {
        const double c = std::cos(q[2]);
        const double s = std::sin(q[2]);
        Vector f(3);
        f << c * fx - s * fy, s * fx + c * fy, px * fy - py * fx;
        return f;
    });
    data.input_covector_jacobians.push_back([=](const Vector& q) {
        const double c = std::cos(q[2]);
        const double s = std::sin(q[2]);
        Matrix j = Matrix::Zero(3, 3);
        j(0, 2) = -s * fx - c * fy;
        j(1, 2) = c * fx - s * fy;
        return j;
    });
}

// Moment arm of the a-th angle inside link i: full length for the links
// before i, distance to the center of mass for link i itself.
double arm_length(const ChainParameters& p, int i, int a) {
    return a < i ? p.lengths[a] : 0.5 * p.lengths[i];
}

std::vector<double> absolute_angles(const Vector& q) {
    std::vector<double> phi(q.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        acc += q[i];
        phi[i] = acc;
    }
    return phi;
}

double rod_inertia(const ChainParameters& p, int i) {
    return p.masses[i] * p.lengths[i] * p.lengths[i] / 12.0;
}

}  // namespace

const std::vector<ModelInfo>& catalog() {
    static const std::vector<ModelInfo> models = {
        {"flat", "Euclidean test system: M = I, no potential, inputs along coordinate axes", 2, 2,
         {1},
         {{"dof", 2.0, "1", "number of degrees of freedom"}}},
        {"pvtol", "planar vertical take-off and landing aircraft, q = (x, y, theta)", 3, 2,
         {1, 2},
         {{"mass", 1.0, "kg", "vehicle mass"},
          {"inertia", 1.0, "kg m^2", "moment of inertia about the center of mass"},
          {"arm", 1.0, "m", "moment arm of the lateral force"},
          {"gravity", 0.0, "m/s^2", "gravitational acceleration (absent: off)"}}},
        {"planar-body", "planar rigid body in the horizontal plane, q = (x, y, theta)", 3, 2,
         {1, 2},
         {{"mass", 1.0, "kg", "body mass"},
          {"inertia", 1.0, "kg m^2", "moment of inertia about the center of mass"},
          {"arm", 1.0, "m", "offset of the lateral force behind the center of mass"}}},
        {"blimp", "planar rigid body with isotropic linear damping k(q) = -c I", 3, 2, {1, 2},
         {{"mass", 1.0, "kg", "body mass"},
          {"inertia", 1.0, "kg m^2", "moment of inertia about the center of mass"},
          {"arm", 1.0, "m", "offset of the lateral force behind the center of mass"},
          {"damping", 0.1, "1/s", "damping coefficient c"}}},
        {"3r", "three-revolute-joint planar manipulator of uniform rods", 3, 3, {1, 2},
         {{"mass1", 1.0, "kg", "mass of link 1"},
          {"mass2", 1.0, "kg", "mass of link 2"},
          {"mass3", 1.0, "kg", "mass of link 3"},
          {"length1", 1.0, "m", "length of link 1"},
          {"length2", 1.0, "m", "length of link 2"},
          {"length3", 1.0, "m", "length of link 3"},
          {"gravity", 0.0, "m/s^2", "gravitational acceleration (absent: horizontal plane)"}}},
    };
    return models;
}

const ModelInfo& info(const std::string& name) {
    for (const auto& m : catalog()) {
        if (m.name == name) {
            return m;
        }
    }
    throw UnknownModelError("unknown model '" + name + "'");
}

void validate(const ModelDescriptor& descriptor) {
    const ModelInfo& model = info(descriptor.name);
    for (const auto& [key, value] : descriptor.parameters) {
        const bool known = std::any_of(model.parameters.begin(), model.parameters.end(),
                                       [&](const ParameterInfo& p) { return p.name == key; });
        if (!known) {
            throw PreconditionError("model '" + model.name + "' has no parameter '" + key + "'");
        }
        if (!(value > 0.0) || !std::isfinite(value)) {
            throw PreconditionError("parameter '" + key + "' must be strictly positive");
        }
    }
    int max_inputs = model.max_inputs;
    if (model.name == "flat") {
        const auto it = descriptor.parameters.find("dof");
        if (it != descriptor.parameters.end()) {
            if (it->second != std::round(it->second)) {
                throw PreconditionError("parameter 'dof' must be an integer");
            }
            max_inputs = static_cast<int>(it->second);
        }
    }
    if (descriptor.actuators.empty()) {
        return;  // defaults apply
    }
    std::set<int> seen;
    for (int a : descriptor.actuators) {
        if (a < 1 || a > max_inputs) {
            throw PreconditionError("actuator " + std::to_string(a) + " out of range for '" +
                                    model.name + "'");
        }
        if (!seen.insert(a).second) {
            throw PreconditionError("duplicate actuator " + std::to_string(a));
        }
    }
}

MechanicalSystem build(const ModelDescriptor& d) {
    validate(d);
    const ModelInfo& model = info(d.name);
    const auto p = [&](const std::string& key) {
        const auto it = d.parameters.find(key);
        if (it != d.parameters.end()) {
            return it->second;
        }
        for (const auto& pi : model.parameters) {
            if (pi.name == key) {
                return pi.default_value;
            }
        }
        throw PreconditionError("missing parameter '" + key + "'");
    };
    const std::vector<int> actuators = d.actuators.empty() ? model.default_actuators : d.actuators;

    if (d.name == "flat") {
        return flat(static_cast<int>(p("dof")), actuators);
    }
    if (d.name == "pvtol") {
        return pvtol(p("mass"), p("inertia"), p("arm"), p("gravity"), actuators);
    }
    if (d.name == "planar-body") {
        return planar_body(p("mass"), p("inertia"), p("arm"), 0.0, actuators);
    }
    if (d.name == "blimp") {
        return planar_body(p("mass"), p("inertia"), p("arm"), p("damping"), actuators);
    }
    ChainParameters chain;
    chain.masses = {p("mass1"), p("mass2"), p("mass3")};
    chain.lengths = {p("length1"), p("length2"), p("length3")};
    chain.gravity = p("gravity");
    return planar_chain(chain, actuators);
}

MechanicalSystem flat(int n, std::vector<int> actuators) {
    if (n < 1) {
        throw PreconditionError("flat system needs n >= 1");
    }
    SystemData data;
    data.n = n;
    data.inertia = [n](const Vector&) { return Matrix::Identity(n, n).eval(); };
    data.inertia_partial = [n](const Vector&, int) { return Matrix::Zero(n, n).eval(); };
    for (int i = 0; i < n; ++i) {
        Vector e = Vector::Zero(n);
        e[i] = 1.0;
        data.input_covectors.push_back([e](const Vector&) { return e; });
        data.input_covector_jacobians.push_back(
            [n](const Vector&) { return Matrix::Zero(n, n).eval(); });
    }
    return select(std::move(data), actuators);
}

MechanicalSystem pvtol(double mass, double inertia, double arm, double gravity,
                       std::vector<int> actuators) {
    SystemData data = rigid_planar_data(mass, inertia);
    // Thrust along the body y axis through the center of mass.
    add_body_force(data, 0.0, 1.0, 0.0, 0.0);
    // Lateral force along the body x axis, producing torque `arm`.
    add_body_force(data, 1.0, 0.0, 0.0, -arm);
    if (gravity > 0.0) {
        data.potential = [mass, gravity](const Vector& q) { return mass * gravity * q[1]; };
        data.potential_gradient = [mass, gravity](const Vector&) {
            Vector g = Vector::Zero(3);
            g[1] = mass * gravity;
            return g;
        };
    }
    return select(std::move(data), actuators);
}

MechanicalSystem planar_body(double mass, double inertia, double arm, double damping,
                             std::vector<int> actuators) {
    SystemData data = rigid_planar_data(mass, inertia);
    add_body_force(data, 1.0, 0.0, 0.0, 0.0);
    add_body_force(data, 0.0, 1.0, -arm, 0.0);
    if (damping > 0.0) {
        data.damping = [damping](const Vector&) { return (-damping * Matrix::Identity(3, 3)).eval(); };
    }
    return select(std::move(data), actuators);
}

std::vector<Vector> chain_link_centers(const ChainParameters& p, const Vector& q) {
    const int n = static_cast<int>(q.size());
    const std::vector<double> phi = absolute_angles(q);
    std::vector<Vector> centers;
    for (int i = 0; i < n; ++i) {
        Vector c = Vector::Zero(2);
        for (int a = 0; a <= i; ++a) {
            c[0] += arm_length(p, i, a) * std::cos(phi[a]);
            c[1] += arm_length(p, i, a) * std::sin(phi[a]);
        }
        centers.push_back(c);
    }
    return centers;
}

MechanicalSystem planar_chain(const ChainParameters& params, std::vector<int> actuators) {
    const int n = static_cast<int>(params.masses.size());
    if (n < 1 || params.lengths.size() != params.masses.size()) {
        throw PreconditionError("chain needs matching masses and lengths");
    }
    SystemData data;
    data.n = n;

    // The center of mass of link i moves with d p_i / d q_j = sum_{a=j..i} L_ia e(phi_a)^perp,
    // so M_jk = sum_i m_i sum_{a>=j, b>=k} L_ia L_ib cos(phi_a - phi_b) + I_i [j,k <= i].
    data.inertia = [params, n](const Vector& q) {
        const std::vector<double> phi = absolute_angles(q);
        Matrix mass = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                for (int k = 0; k <= i; ++k) {
                    double acc = 0.0;
                    for (int a = j; a <= i; ++a) {
                        for (int b = k; b <= i; ++b) {
                            acc += arm_length(params, i, a) * arm_length(params, i, b) *
                                   std::cos(phi[a] - phi[b]);
                        }
                    }
                    mass(j, k) += params.masses[i] * acc + rod_inertia(params, i);
                }
            }
        }
        return mass;
    };
    // d(phi_a - phi_b)/dq^s = [s <= a] - [s <= b].
    data.inertia_partial = [params, n](const Vector& q, int s) {
        const std::vector<double> phi = absolute_angles(q);
        Matrix d = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j <= i; ++j) {
                for (int k = 0; k <= i; ++k) {
                    double acc = 0.0;
                    for (int a = j; a <= i; ++a) {
                        for (int b = k; b <= i; ++b) {
                            const double dphi = (s <= a ? 1.0 : 0.0) - (s <= b ? 1.0 : 0.0);
                            if (dphi != 0.0) {
                                acc -= arm_length(params, i, a) * arm_length(params, i, b) *
                                       std::sin(phi[a] - phi[b]) * dphi;
                            }
                        }
                    }
                    d(j, k) += params.masses[i] * acc;
                }
            }
        }
        return d;
    };
    if (params.gravity > 0.0) {
        data.potential = [params](const Vector& q) {
            double v = 0.0;
            const auto centers = chain_link_centers(params, q);
            for (std::size_t i = 0; i < centers.size(); ++i) {
                v += params.masses[i] * params.gravity * centers[i][1];
            }
            return v;
        };
        data.potential_gradient = [params, n](const Vector& q) {
            const std::vector<double> phi = absolute_angles(q);
            Vector g = Vector::Zero(n);
            for (int s = 0; s < n; ++s) {
                for (int i = s; i < n; ++i) {
                    for (int a = s; a <= i; ++a) {
                        g[s] += params.masses[i] * params.gravity * arm_length(params, i, a) *
                                std::cos(phi[a]);
                    }
                }
            }
            return g;
        };
    }
    for (int i = 0; i < n; ++i) {
        Vector e = Vector::Zero(n);
        e[i] = 1.0;
        data.input_covectors.push_back([e](const Vector&) { return e; });
        data.input_covector_jacobians.push_back(
            [n](const Vector&) { return Matrix::Zero(n, n).eval(); });
    }
    return select(std::move(data), actuators);
}

}  // namespace geoctrl::models
