// Acceptance suite: one PASS/FAIL line per criterion.

#include "geoctrl/dynamics.hpp"
#include "geoctrl/geometry.hpp"
#include "geoctrl/kinematic.hpp"
#include "geoctrl/models.hpp"
#include "geoctrl/oscillatory.hpp"
#include "geoctrl/series.hpp"

#include "test_systems.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

using namespace geoctrl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), format, a, b, c);
    return buf;
}

double relative(const Vector& got, const Vector& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

MechanicalSystem three_link(std::vector<int> actuators) {
    return models::planar_chain({}, std::move(actuators));
}

Outcome lift_identity() {
    double worst = 0.0;
    testing::Sampler rng(1);
    for (const MechanicalSystem& sys : {three_link({1, 2, 3}), models::pvtol()}) {
        const int n = sys.n();
        const LiftedVectorField z = geodesic_spray(sys);
        const auto fields = sys.input_fields();
        const int m = sys.m();
        for (int trial = 0; trial < 100; ++trial) {
            const int a = trial % m;
            const int b = (trial / m) % m;
            const LiftedVectorField nested =
                lie_bracket(lift(fields[b], n), lie_bracket(z, lift(fields[a], n)));
            const Vector q = rng.uniform(n, -M_PI, M_PI);
            const Vector v = rng.uniform(n);
            Vector want = Vector::Zero(2 * n);
            want.tail(n) = symmetric_product(sys, fields[a], fields[b], q);
            worst = std::max(worst, relative(nested(q, v), want));
        }
    }
    return {worst < 1e-6, fmt("max relative error %.2e over 200 states (3r, pvtol)", worst)};
}

Outcome homogeneity() {
    testing::Sampler rng(2);
    double spray = 0.0;
    double brackets = 0.0;
    for (const MechanicalSystem& sys :
         {three_link({1, 2, 3}), models::pvtol(), models::planar_body(1.0, 1.0, 1.0, 0.1)}) {
        const int n = sys.n();
        const LiftedVectorField z = geodesic_spray(sys);
        const LiftedVectorField k = damping_lift(sys);
        const LiftedVectorField y = lift(sys.input_field(0), n);
        const std::vector<std::pair<LiftedVectorField, int>> cases{
            {lie_bracket(z, y), 0},
            {lie_bracket(z, k), 1},
            {lie_bracket(y, k), -1},
            {lie_bracket(y, lie_bracket(z, y)), -1},
            {lie_bracket(z, lie_bracket(z, y)), 1}};
        for (int trial = 0; trial < 20; ++trial) {
            const Vector q = rng.uniform(n, -M_PI, M_PI);
            const Vector v = rng.uniform(n);
            spray = std::max(spray, homogeneity_defect(z, 1, q, v, {2.0, 3.0}));
            for (const auto& [field, cls] : cases) {
                if (field.homogeneity() != cls) {
                    return {false, "bracket class bookkeeping is wrong"};
                }
                brackets = std::max(brackets, homogeneity_defect(field, cls, q, v, {2.0, 3.0}));
            }
        }
    }
    return {spray < 1e-12 && brackets < 1e-8,
            fmt("spray scaling defect %.2e, bracket class defect %.2e", spray, brackets)};
}

Outcome christoffel_oracle() {
    double analytic = 0.0;
    double fd = 0.0;
    testing::Sampler rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector q = rng.uniform(2, -2.0, 2.0);
        const double q1 = q[0];
        for (const auto provider :
             {DerivativeProvider::analytic(), DerivativeProvider::central_difference(1e-5)}) {
            const ChristoffelTensor g = christoffel(testing::warped_plane(provider), q);
            double err = 0.0;
            for (int i = 0; i < 2; ++i) {
                for (int j = 0; j < 2; ++j) {
                    for (int k = 0; k < 2; ++k) {
                        double want = 0.0;
                        if (i == 0 && j == 1 && k == 1) want = -q1;
                        if (i == 1 && j != k) want = q1 / (1.0 + q1 * q1);
                        err = std::max(err, std::abs(g(i, j, k) - want));
                    }
                }
            }
            (provider.kind == DerivativeProvider::Kind::analytic ? analytic : fd) =
                std::max(provider.kind == DerivativeProvider::Kind::analytic ? analytic : fd, err);
        }
    }
    return {analytic < 1e-10 && fd < 1e-5,
            fmt("max error %.2e analytic, %.2e finite difference", analytic, fd)};
}

Outcome series_order() {
    const MechanicalSystem sys = models::planar_body().with_inputs({1});
    const series::ForcingField unit(sys, {[](double t) { return std::sin(t); }});
    bool ok = true;
    std::string detail = "slopes";
    for (int k = 1; k <= 3; ++k) {
        const auto study = series::truncation_study(sys, unit, k, Vector::Zero(3), 1.0, {},
                                                    {0.02, 0.01, 0.005, 0.0025});
        ok = ok && std::abs(study.slope - (k + 1.0)) <= 0.3;
        detail += fmt(" K=%.0f: %.3f", k, study.slope);
    }
    return {ok, detail};
}

Outcome kinematic_controllability() {
    testing::Sampler rng(5);
    bool ok = true;
    double worst = 0.0;
    int min_rank = 3;
    std::string counts;
    for (const std::vector<int> pair : {std::vector<int>{1, 2}, {1, 3}, {2, 3}}) {
        const MechanicalSystem sys = three_link(pair);
        int fewest = 1 << 20;
        bool all = false;
        for (int i = 0; i < 20; ++i) {
            const Vector q = rng.uniform(3, -M_PI, M_PI);
            const auto sol = kinematic::find_decoupling_fields(sys, q);
            std::vector<Vector> dirs = sol.directions;
            if (sol.all_directions) {
                // Every direction decouples: infinitely many projective solutions.
                all = true;
                dirs = {Vector::Unit(2, 0), Vector::Unit(2, 1), rng.uniform(2).normalized()};
            }
            fewest = std::min(fewest, static_cast<int>(dirs.size()));
            ok = ok && dirs.size() >= 2;
            for (const auto& h : dirs) {
                const kinematic::DecouplingCandidate fixed{[h](const Vector&) { return h; }};
                worst = std::max(worst,
                                 kinematic::decoupling_residual(sys, fixed.field(sys), q));
            }
            const auto report = kinematic::kinematic_controllability(sys, q, 2);
            min_rank = std::min(min_rank, report.rank);
            ok = ok && report.rank == 3;
        }
        counts += " {" + std::to_string(pair[0]) + "," + std::to_string(pair[1]) + "}: " +
                  (all ? std::string("all") : std::to_string(fewest));
    }
    ok = ok && worst < 1e-8;
    return {ok, "solutions" + counts + fmt("; max residual %.2e; min rank %.0f", worst, min_rank)};
}

Outcome scaling_invariance() {
    double worst = 0.0;
    int plans = 0;
    for (const std::vector<int> pair : {std::vector<int>{1, 2}, {1, 3}, {2, 3}}) {
        const MechanicalSystem sys = three_link(pair);
        const Vector q0 = (Vector(3) << -0.5, 1.2, 0.7).finished();
        const auto sol = kinematic::find_decoupling_fields(sys, q0);
        const std::vector<Vector> dirs =
            sol.all_directions ? std::vector<Vector>{Vector::Unit(2, 0), Vector::Unit(2, 1)}
                               : sol.directions;
        for (const auto& h : dirs) {
            const double length = 0.25 / (sys.input_vectors(q0) * h).norm();
            for (auto profile : {kinematic::TimeScaling::Profile::cubic,
                                 kinematic::TimeScaling::Profile::trapezoidal}) {
                for (double duration : {1.0, 2.0, 5.0}) {
                    const auto traj = kinematic::kinematic_plan(
                        sys,
                        {{kinematic::follow_decoupling_root(sys, h), 1.0,
                          kinematic::TimeScaling(profile, duration), length}},
                        q0, 2.5e-4, INFINITY);
                    worst = std::max(worst, reconstruct_inputs(sys, traj).max_residual());
                    ++plans;
                }
            }
        }
    }
    return {worst < 1e-6,
            fmt("max reconstruction residual %.2e over %.0f plans (dt 2.5e-4)", worst, plans)};
}

Outcome averaging_rate() {
    oscillatory::AveragedGains g;
    g.z = {[](double) { return 0.0; }, [](double t) { return 0.5 * std::sin(t); }};
    g.z_pair[{0, 1}] = [](double) { return 1.0; };
    oscillatory::ConvergenceOptions opts;
    opts.threads = 4;
    const auto study = oscillatory::convergence_study(
        models::pvtol(), g, oscillatory::PairEnumeration(2), {Vector::Zero(3), Vector::Zero(3)},
        5.0, {0.1, 0.05, 0.025, 0.0125}, opts);
    bool monotone = true;
    for (std::size_t i = 1; i < study.rows.size(); ++i) {
        monotone = monotone && study.rows[i].max_error < study.rows[i - 1].max_error;
    }
    return {monotone && study.slope >= 0.7 && study.slope <= 1.3,
            fmt("slope %.3f, errors %.3e .. %.3e", study.slope, study.rows.front().max_error,
                study.rows.back().max_error) +
                (monotone ? ", monotone" : ", not monotone")};
}

Outcome synthesis_identities() {
    testing::Sampler rng(8);
    std::vector<double> times;
    for (int i = 0; i < 20; ++i) {
        times.push_back(rng.scalar(0.0, 10.0));
    }
    const auto sinusoid = [](double a, double w, double p) {
        return [=](double t) { return a * std::sin(w * t + p); };
    };
    oscillatory::AveragedGains two;
    two.z = {sinusoid(0.3, 1.0, 0.2), sinusoid(0.5, 0.7, 0.0)};
    two.z_pair[{0, 1}] = sinusoid(1.2, 0.9, 0.4);
    oscillatory::AveragedGains three;
    three.z = {sinusoid(0.1, 1.0, 0.0), sinusoid(0.4, 1.3, 0.0), sinusoid(0.2, 0.5, 1.0)};
    three.z_pair[{0, 1}] = sinusoid(0.8, 0.5, 0.1);
    three.z_pair[{0, 2}] = sinusoid(-1.1, 0.3, 0.0);
    three.z_pair[{1, 2}] = sinusoid(1.5, 2.0, -0.3);
    double diag = 0.0;
    double off = 0.0;
    for (const auto& [gains, m] : {std::pair{two, 2}, std::pair{three, 3}}) {
        for (const auto& row : oscillatory::audit_coefficients(
                 gains, oscillatory::PairEnumeration(m), times)) {
            (row.a == row.b ? diag : off) =
                std::max(row.a == row.b ? diag : off, row.difference);
        }
    }
    return {diag < 1e-6 && off < 1e-6,
            fmt("max diagonal cancellation error %.2e, max pair-gain error %.2e (m = 2, 3)",
                diag, off)};
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "geoctrl_acceptance";
    fs::remove_all(root);
    int compared = 0;
    for (const char* name : {"simulate_3r", "convergence_pvtol", "tracking_pvtol"}) {
        const fs::path config = fs::path(GEOCTRL_SOURCE_DIR) / "configs" / (std::string(name) + ".json");
        std::vector<fs::path> dirs;
        for (const char* run : {"a", "b"}) {
            const fs::path out = root / name / run;
            const std::string cmd = std::string("\"") + GEOCTRL_CLI + "\" run \"" +
                                    config.string() + "\" --out \"" + out.string() +
                                    "\" > /dev/null";
            if (std::system(cmd.c_str()) != 0) {
                return {false, std::string("run failed for ") + name};
            }
            dirs.push_back(out);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            if (entry.path().extension() != ".csv") {
                continue;
            }
            const std::string a = slurp(entry.path());
            const std::string b = slurp(dirs[1] / entry.path().filename());
            if (a.empty() || a != b) {
                return {false, "CSV files differ: " + entry.path().filename().string()};
            }
            ++compared;
        }
    }
    fs::remove_all(root);
    return {compared > 0, fmt("%.0f CSV files byte-identical across two runs", compared)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"lift identity", lift_identity},
        {"homogeneity", homogeneity},
        {"Christoffel oracle", christoffel_oracle},
        {"series order", series_order},
        {"kinematic controllability of 3R", kinematic_controllability},
        {"decoupling time-scaling invariance", scaling_invariance},
        {"averaging rate", averaging_rate},
        {"synthesis identities", synthesis_identities},
        {"determinism", determinism},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = criteria[i].second();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %zu %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", i + 1,
                    criteria[i].first.c_str(), out.detail.c_str(), secs);
        std::fflush(stdout);
        failures += out.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}
