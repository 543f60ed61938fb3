#pragma once

#include "geoctrl/mechanical_system.hpp"

#include <map>
#include <string>
#include <vector>

namespace geoctrl::models {

/// Names a built-in model, overrides some of its parameters and selects the
/// active inputs (1-based, as in "actuators at joints 1 and 2").
struct ModelDescriptor {
    std::string name;
    std::map<std::string, double> parameters;
    std::vector<int> actuators;
};

struct ParameterInfo {
    std::string name;
    double default_value;
    std::string unit;
    std::string description;
};

struct ModelInfo {
    std::string name;
    std::string summary;
    int dof;
    int max_inputs;
    std::vector<int> default_actuators;
    std::vector<ParameterInfo> parameters;
};

const std::vector<ModelInfo>& catalog();
const ModelInfo& info(const std::string& name);

/// Validates the descriptor: known model, known and strictly positive
/// parameters, non-empty in-range actuator subset without duplicates.
void validate(const ModelDescriptor& descriptor);

/// Builds the model with analytic derivatives. Unknown names throw
/// UnknownModelError; invalid descriptors throw PreconditionError.
MechanicalSystem build(const ModelDescriptor& descriptor);

/// Unit-mass system on R^n with M = I, no potential and inputs e_1..e_n.
/// Default: n = 2 with the single input e_1.
MechanicalSystem flat(int n = 2, std::vector<int> actuators = {1});

/// Planar vertical take-off and landing aircraft, q = (x, y, theta).
/// Inputs: thrust along the body axis through the center of mass, and a
/// lateral force at moment arm `arm`. Gravity is off when `gravity` is 0.
MechanicalSystem pvtol(double mass = 1.0, double inertia = 1.0, double arm = 1.0,
                       double gravity = 0.0, std::vector<int> actuators = {1, 2});

/// Planar rigid body in the horizontal plane, q = (x, y, theta). Input 1
/// pushes along the body x axis through the center of mass; input 2 pushes
/// along the body y axis at distance `arm` behind the center of mass. A
/// positive `damping` adds k(q) = -damping * I (blimp-like variant).
MechanicalSystem planar_body(double mass = 1.0, double inertia = 1.0, double arm = 1.0,
                             double damping = 0.0, std::vector<int> actuators = {1, 2});

struct ChainParameters {
    std::vector<double> masses{1.0, 1.0, 1.0};
    std::vector<double> lengths{1.0, 1.0, 1.0};
    double gravity = 0.0;  ///< > 0 puts the chain in a vertical plane
};

/// Planar serial chain of uniform rods with revolute joints (relative
/// angles). With three links this is the three-revolute-joint manipulator;
/// `actuators` picks the motorized joints.
MechanicalSystem planar_chain(const ChainParameters& params, std::vector<int> actuators);

/// Center-of-mass position of every link, used by tests and plotting.
std::vector<Vector> chain_link_centers(const ChainParameters& params, const Vector& q);

}  // namespace geoctrl::models
