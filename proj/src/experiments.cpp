#include "geoctrl/experiments.hpp"

#include "geoctrl/errors.hpp"
#include "geoctrl/kinematic.hpp"
#include "geoctrl/oscillatory.hpp"
#include "geoctrl/series.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <random>
#include <regex>
#include <set>
#include <thread>

namespace geoctrl::experiments {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) {
        config_error(where, "expected an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            config_error(where, "unknown key '" + key + "'");
        }
    }
}

double number(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key)) {
        config_error(where, "missing '" + key + "'");
    }
    const json& v = obj.at(key);
    if (!v.is_number()) {
        config_error(where + "." + key, "expected a number");
    }
    const double x = v.get<double>();
    if (!std::isfinite(x)) {
        config_error(where + "." + key, "must be finite");
    }
    return x;
}

double number_or(const json& obj, const std::string& key, const std::string& where, double def) {
    return obj.contains(key) ? number(obj, key, where) : def;
}

double positive(const json& obj, const std::string& key, const std::string& where) {
    const double x = number(obj, key, where);
    if (!(x > 0.0)) {
        config_error(where + "." + key, "must be positive");
    }
    return x;
}

double positive_or(const json& obj, const std::string& key, const std::string& where, double def) {
    return obj.contains(key) ? positive(obj, key, where) : def;
}

int integer_or(const json& obj, const std::string& key, const std::string& where, int def, int lo,
               int hi) {
    if (!obj.contains(key)) {
        return def;
    }
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
        config_error(where + "." + key, "expected an integer");
    }
    const int x = v.get<int>();
    if (x < lo || x > hi) {
        config_error(where + "." + key,
                     "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    return x;
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_array() || obj.at(key).empty()) {
        config_error(where, "'" + key + "' must be a non-empty array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : obj.at(key)) {
        if (!v.is_number() || !std::isfinite(v.get<double>())) {
            config_error(where + "." + key, "expected finite numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

std::vector<double> positive_list(const json& obj, const std::string& key,
                                  const std::string& where) {
    auto out = numbers(obj, key, where);
    for (double x : out) {
        if (!(x > 0.0)) {
            config_error(where + "." + key, "entries must be positive");
        }
    }
    return out;
}

Vector vector_or_zero(const json& obj, const std::string& key, const std::string& where, int n) {
    if (!obj.contains(key)) {
        return Vector::Zero(n);
    }
    const auto v = numbers(obj, key, where);
    if (static_cast<int>(v.size()) != n) {
        config_error(where + "." + key, "expected " + std::to_string(n) + " entries");
    }
    return Eigen::Map<const Vector>(v.data(), n);
}

Vector required_vector(const json& obj, const std::string& key, const std::string& where, int n) {
    if (!obj.contains(key)) {
        config_error(where, "missing '" + key + "'");
    }
    return vector_or_zero(obj, key, where, n);
}

State initial_state(const json& params, const std::string& where, int n) {
    if (!params.contains("initial")) {
        return {Vector::Zero(n), Vector::Zero(n)};
    }
    const json& init = params.at("initial");
    const std::string w = where + ".initial";
    check_keys(init, {"q", "qdot"}, w);
    return {vector_or_zero(init, "q", w, n), vector_or_zero(init, "qdot", w, n)};
}

std::vector<std::function<double(double)>> gain_list(const json& params, const std::string& key,
                                                     const std::string& where, int m) {
    const json& list = params.at(key);
    if (!list.is_array() || static_cast<int>(list.size()) != m) {
        config_error(where + "." + key, "expected " + std::to_string(m) + " gain specs");
    }
    std::vector<std::function<double(double)>> out;
    for (const auto& spec : list) {
        if (!spec.is_string()) {
            config_error(where + "." + key, "gain specs are strings");
        }
        out.push_back(parse_gain(spec.get<std::string>()));
    }
    return out;
}

std::pair<int, int> parse_pair(const std::string& key, int m, const std::string& where) {
    static const std::regex re(R"(^\s*(\d+)\s*,\s*(\d+)\s*$)");
    std::smatch match;
    if (!std::regex_match(key, match, re)) {
        config_error(where, "pair keys look like \"1,2\", got '" + key + "'");
    }
    const int a = std::stoi(match[1]) - 1;
    const int b = std::stoi(match[2]) - 1;
    if (a < 0 || b < 0 || a >= m || b >= m || a == b) {
        config_error(where, "pair '" + key + "' is not a pair of distinct inputs 1.." +
                                std::to_string(m));
    }
    return {std::min(a, b), std::max(a, b)};
}

oscillatory::AveragedGains averaged_gains(const json& params, const std::string& where, int m) {
    if (!params.contains("gains")) {
        config_error(where, "missing 'gains'");
    }
    const json& g = params.at("gains");
    const std::string w = where + ".gains";
    check_keys(g, {"z", "pairs"}, w);
    if (!g.contains("z")) {
        config_error(w, "missing 'z'");
    }
    oscillatory::AveragedGains gains;
    gains.z = gain_list(g, "z", w, m);
    if (!g.contains("pairs")) {
        return gains;
    }
    const json& pairs = g.at("pairs");
    if (!pairs.is_object()) {
        config_error(w + ".pairs", "expected an object");
    }
    for (const auto& [key, spec] : pairs.items()) {
        if (!spec.is_string()) {
            config_error(w + ".pairs." + key, "gain specs are strings");
        }
        const auto p = parse_pair(key, m, w + ".pairs");
        if (gains.z_pair.count(p)) {
            config_error(w + ".pairs", "pair '" + key + "' given twice");
        }
        gains.z_pair[p] = parse_gain(spec.get<std::string>());
    }
    return gains;
}

oscillatory::PairEnumeration enumeration(const json& params, const std::string& where, int m) {
    if (!params.contains("frequencies")) {
        return oscillatory::PairEnumeration(m);
    }
    const json& f = params.at("frequencies");
    const std::string w = where + ".frequencies";
    if (!f.is_object()) {
        config_error(w, "expected an object");
    }
    std::map<std::pair<int, int>, int> table;
    for (const auto& [key, n] : f.items()) {
        if (!n.is_number_integer()) {
            config_error(w + "." + key, "expected an integer");
        }
        table[parse_pair(key, m, w)] = n.get<int>();
    }
    try {
        return oscillatory::PairEnumeration(m, std::move(table));
    } catch (const PreconditionError& e) {
        config_error(w, e.what());
    }
}

json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(path);
    if (!os) {
        throw Error("io", "cannot write " + path.string());
    }
    body(os);
    if (!os) {
        throw Error("io", "failed writing " + path.string());
    }
}

std::string utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json trajectory_summary(const Trajectory& traj) {
    return {{"samples", traj.size()},
            {"final_q", to_json(traj.states.back().q)},
            {"final_qdot", to_json(traj.states.back().qdot)}};
}

// --- experiments ----------------------------------------------------------

PreparedExperiment prepare_simulate(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"horizon", "initial", "inputs"}, w);
    const double horizon = positive(p, "horizon", w);
    const State x0 = initial_state(p, w, sys.n());
    std::vector<std::function<double(double)>> inputs(sys.m(), [](double) { return 0.0; });
    if (p.contains("inputs")) {
        inputs = gain_list(p, "inputs", w, sys.m());
    }
    step_count(0.0, horizon, cfg.integrator.dt);
    const IntegratorConfig integ = cfg.integrator;
    ControlLaw law = [inputs](double t, const Vector&, const Vector&) {
        Vector u(static_cast<Eigen::Index>(inputs.size()));
        for (std::size_t a = 0; a < inputs.size(); ++a) {
            u[static_cast<Eigen::Index>(a)] = inputs[a](t);
        }
        return u;
    };
    return {[sys, law, x0, horizon, integ](const fs::path& dir) {
                const Trajectory traj = simulate(sys, law, x0, 0.0, horizon, integ);
                write_file(dir / "trajectory.csv",
                           [&](std::ostream& os) { write_trajectory_csv(os, traj); });
                return trajectory_summary(traj);
            },
            {"trajectory.csv"}};
}

PreparedExperiment prepare_series(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"orders", "epsilons", "horizon", "input", "q0"}, w);
    if (sys.has_potential() || sys.has_damping()) {
        config_error(w, "series-check needs a model without potential or damping forces");
    }
    std::vector<int> orders{1, 2, 3};
    if (p.contains("orders")) {
        orders.clear();
        for (double k : numbers(p, "orders", w)) {
            if (k != std::round(k) || k < 1 || k > 4) {
                config_error(w + ".orders", "orders are integers in 1..4");
            }
            orders.push_back(static_cast<int>(k));
        }
    }
    const auto epsilons = positive_list(p, "epsilons", w);
    const double horizon = positive(p, "horizon", w);
    if (!p.contains("input")) {
        config_error(w, "missing 'input'");
    }
    const auto input = gain_list(p, "input", w, sys.m());
    const Vector q0 = vector_or_zero(p, "q0", w, sys.n());
    step_count(0.0, horizon, cfg.integrator.dt);
    std::vector<std::string> files;
    for (int k : orders) {
        files.push_back("truncation_K" + std::to_string(k) + ".csv");
    }
    const IntegratorConfig integ = cfg.integrator;
    return {[sys, orders, epsilons, horizon, input, q0, integ](const fs::path& dir) {
                const series::ForcingField forcing(
                    sys, std::vector<series::InputSignal>(input.begin(), input.end()));
                json rows = json::array();
                for (int k : orders) {
                    const auto study =
                        series::truncation_study(sys, forcing, k, q0, horizon, integ, epsilons);
                    write_file(dir / ("truncation_K" + std::to_string(k) + ".csv"),
                               [&](std::ostream& os) { series::write_truncation_csv(os, study); });
                    json errs = json::array();
                    for (const auto& r : study.rows) {
                        errs.push_back({{"epsilon", r.epsilon}, {"error", r.error}});
                    }
                    rows.push_back({{"order", k}, {"slope", study.slope}, {"rows", errs}});
                }
                return json{{"studies", rows}};
            },
            files};
}

json directions_report(const MechanicalSystem& sys, const Vector& q,
                       const kinematic::DecouplingSolutions& sols, std::vector<Vector>& dirs) {
    dirs = sols.directions;
    if (sols.all_directions) {
        dirs.clear();
        for (int a = 0; a < sys.m(); ++a) {
            dirs.push_back(Vector::Unit(sys.m(), a));
        }
    }
    json out = json::array();
    for (const auto& h : dirs) {
        const kinematic::DecouplingCandidate fixed{[h](const Vector&) { return h; }};
        out.push_back({{"h", to_json(h)},
                       {"residual", kinematic::decoupling_residual(sys, fixed.field(sys), q)}});
    }
    return out;
}

PreparedExperiment prepare_decoupling(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"q", "depth", "plan"}, w);
    const Vector q = required_vector(p, "q", w, sys.n());
    const int depth = integer_or(p, "depth", w, 2, 1, 4);

    struct SegmentSpec {
        int direction;
        double sign;
        kinematic::TimeScaling scaling;
        double length;
    };
    std::vector<SegmentSpec> segments;
    double plan_dt = cfg.integrator.dt;
    if (p.contains("plan")) {
        const json& plan = p.at("plan");
        const std::string pw = w + ".plan";
        check_keys(plan, {"dt", "segments"}, pw);
        plan_dt = positive_or(plan, "dt", pw, plan_dt);
        if (!plan.contains("segments") || !plan.at("segments").is_array() ||
            plan.at("segments").empty()) {
            config_error(pw, "'segments' must be a non-empty array");
        }
        for (std::size_t i = 0; i < plan.at("segments").size(); ++i) {
            const json& s = plan.at("segments")[i];
            const std::string sw = pw + ".segments[" + std::to_string(i) + "]";
            check_keys(s, {"direction", "sign", "profile", "duration", "length"}, sw);
            const int dir = integer_or(s, "direction", sw, 1, 1, 1 << 20);
            const double sign = number_or(s, "sign", sw, 1.0);
            if (sign != 1.0 && sign != -1.0) {
                config_error(sw + ".sign", "must be 1 or -1");
            }
            kinematic::TimeScaling::Profile profile = kinematic::TimeScaling::Profile::cubic;
            if (s.contains("profile")) {
                if (!s.at("profile").is_string()) {
                    config_error(sw + ".profile", "expected a string");
                }
                try {
                    profile = kinematic::parse_profile(s.at("profile").get<std::string>());
                } catch (const Error& e) {
                    config_error(sw + ".profile", e.what());
                }
            }
            const double duration = positive(s, "duration", sw);
            step_count(0.0, duration, plan_dt);
            segments.push_back({dir, sign, kinematic::TimeScaling(profile, duration),
                                positive_or(s, "length", sw, 1.0)});
        }
    }
    std::vector<std::string> files;
    if (!segments.empty()) {
        files.push_back("plan.csv");
    }
    return {[sys, q, depth, segments, plan_dt](const fs::path& dir) {
                const auto sols = kinematic::find_decoupling_fields(sys, q);
                std::vector<Vector> dirs;
                json report{{"q", to_json(q)},
                            {"all_directions", sols.all_directions},
                            {"fields", directions_report(sys, q, sols, dirs)}};
                const auto larc = kinematic::kinematic_controllability(sys, q, depth);
                report["rank"] = larc.rank;
                report["depth"] = larc.depth;
                report["verdict"] = larc.verdict;
                if (!segments.empty()) {
                    // Direction k is the k-th root at the segment's own start.
                    std::vector<Vector> refs;
                    Vector start = q;
                    for (std::size_t i = 0; i < segments.size(); ++i) {
                        const auto& s = segments[i];
                        std::vector<Vector> here;
                        directions_report(sys, start, kinematic::find_decoupling_fields(sys, start),
                                          here);
                        if (s.direction > static_cast<int>(here.size())) {
                            throw PreconditionError(
                                "segment " + std::to_string(i + 1) + " uses direction " +
                                std::to_string(s.direction) + " but " +
                                std::to_string(here.size()) + " decoupling directions exist there");
                        }
                        refs.push_back(here[s.direction - 1]);
                        const kinematic::PlanSegment seg{
                            kinematic::follow_decoupling_root(sys, refs.back()), s.sign, s.scaling,
                            s.length};
                        start = kinematic::kinematic_plan(sys, {seg}, start, plan_dt, INFINITY)
                                    .states.back()
                                    .q;
                    }
                    std::vector<kinematic::PlanSegment> plan;
                    for (std::size_t i = 0; i < segments.size(); ++i) {
                        plan.push_back({kinematic::follow_decoupling_root(sys, refs[i]),
                                        segments[i].sign, segments[i].scaling, segments[i].length});
                    }
                    const Trajectory traj = kinematic::kinematic_plan(sys, plan, q, plan_dt);
                    write_file(dir / "plan.csv",
                               [&](std::ostream& os) { write_trajectory_csv(os, traj); });
                    report["plan"] = {{"max_residual", reconstruct_inputs(sys, traj).max_residual()},
                                      {"final_q", to_json(traj.states.back().q)}};
                }
                return report;
            },
            files};
}

PreparedExperiment prepare_larc(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"q", "depth", "fields"}, w);
    const Vector q = required_vector(p, "q", w, sys.n());
    const int depth = integer_or(p, "depth", w, 2, 1, 4);
    std::string fields = "decoupling";
    if (p.contains("fields")) {
        if (!p.at("fields").is_string()) {
            config_error(w + ".fields", "expected \"decoupling\" or \"inputs\"");
        }
        fields = p.at("fields").get<std::string>();
        if (fields != "decoupling" && fields != "inputs") {
            config_error(w + ".fields", "expected \"decoupling\" or \"inputs\"");
        }
    }
    return {[sys, q, depth, fields](const fs::path&) {
                const auto report = fields == "inputs"
                                        ? kinematic::larc_rank(sys.input_fields(), q, depth)
                                        : kinematic::kinematic_controllability(sys, q, depth);
                return json{{"q", to_json(q)},         {"fields", fields},
                            {"n", sys.n()},            {"rank", report.rank},
                            {"depth", report.depth},   {"verdict", report.verdict},
                            {"residuals", report.residuals}};
            },
            {}};
}

PreparedExperiment prepare_tracking(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"gains", "epsilon", "horizon", "initial", "period", "frequencies",
                   "audit_times", "audit_seed"},
               w);
    const auto gains = averaged_gains(p, w, sys.m());
    const auto pairs = enumeration(p, w, sys.m());
    const double eps = positive(p, "epsilon", w);
    const double horizon = positive(p, "horizon", w);
    const double period = positive_or(p, "period", w, oscillatory::default_period);
    const State x0 = initial_state(p, w, sys.n());
    const int audit_times = integer_or(p, "audit_times", w, 20, 1, 10000);
    const int audit_seed = integer_or(p, "audit_seed", w, 7, 0, 1 << 30);
    step_count(0.0, horizon, cfg.integrator.dt);
    const IntegratorConfig integ = cfg.integrator;
    return {[=](const fs::path& dir) {
                json warnings = json::array();
                const double bound = eps * period / 50.0;
                if (integ.dt > bound * (1.0 + 1e-9)) {
                    warnings.push_back("dt " + format_number(integ.dt) +
                                       " exceeds eps T / 50 = " + format_number(bound));
                }
                const auto control =
                    oscillatory::synthesize_controls(sys, gains, pairs, eps, period);
                const Trajectory truth = simulate(sys, control.law(), x0, 0.0, horizon, integ);
                const oscillatory::AveragedSystem averaged(sys, gains);
                const Trajectory ref = averaged.simulate(x0, 0.0, horizon, integ);
                double max_err = 0.0;
                write_file(dir / "tracking.csv", [&](std::ostream& os) {
                    const int n = sys.n();
                    os << "t";
                    for (int i = 1; i <= n; ++i) os << ",q" << i;
                    for (int i = 1; i <= n; ++i) os << ",r" << i;
                    os << ",err\n";
                    for (std::size_t k = 0; k < truth.size(); ++k) {
                        const Vector& q = truth.states[k].q;
                        const Vector& r = ref.states[k].q;
                        const double err = (q - r).norm();
                        max_err = std::max(max_err, err);
                        os << format_number(truth.times[k]);
                        for (int i = 0; i < n; ++i) os << "," << format_number(q[i]);
                        for (int i = 0; i < n; ++i) os << "," << format_number(r[i]);
                        os << "," << format_number(err) << "\n";
                    }
                });
                write_file(dir / "averaged.csv",
                           [&](std::ostream& os) { write_trajectory_csv(os, ref); });
                std::mt19937 rng(static_cast<unsigned>(audit_seed));
                std::uniform_real_distribution<double> dist(0.0, horizon);
                std::vector<double> times(audit_times);
                for (auto& t : times) {
                    t = dist(rng);
                }
                const auto rows = oscillatory::audit_coefficients(gains, pairs, times, period);
                write_file(dir / "audit.json",
                           [&](std::ostream& os) { oscillatory::write_audit_json(os, rows); });
                double audit_max = 0.0;
                for (const auto& r : rows) {
                    audit_max = std::max(audit_max, r.difference);
                }
                return json{{"epsilon", eps},
                            {"max_error", max_err},
                            {"audit_max_difference", audit_max},
                            {"final_q", to_json(truth.states.back().q)},
                            {"final_r", to_json(ref.states.back().q)},
                            {"warnings", warnings}};
            },
            {"tracking.csv", "averaged.csv", "audit.json"}};
}

PreparedExperiment prepare_convergence(const MechanicalSystem& sys, const ExperimentConfig& cfg) {
    const json& p = cfg.parameters;
    const std::string w = "parameters";
    check_keys(p, {"gains", "epsilons", "horizon", "initial", "period", "frequencies"}, w);
    const auto gains = averaged_gains(p, w, sys.m());
    const auto pairs = enumeration(p, w, sys.m());
    auto epsilons = positive_list(p, "epsilons", w);
    const double horizon = positive(p, "horizon", w);
    const State x0 = initial_state(p, w, sys.n());
    oscillatory::ConvergenceOptions opts;
    opts.period = positive_or(p, "period", w, oscillatory::default_period);
    opts.max_dt = cfg.integrator.dt;
    return {[=](const fs::path& dir) {
                auto o = opts;
                o.threads = worker_threads();
                const auto study =
                    oscillatory::convergence_study(sys, gains, pairs, x0, horizon, epsilons, o);
                write_file(dir / "convergence.csv",
                           [&](std::ostream& os) { oscillatory::write_convergence_csv(os, study); });
                json rows = json::array();
                bool monotone = true;
                for (std::size_t i = 0; i < study.rows.size(); ++i) {
                    const auto& r = study.rows[i];
                    rows.push_back({{"epsilon", r.epsilon}, {"max_error", r.max_error}, {"dt", r.dt}});
                    if (i > 0) {
                        const auto& prev = study.rows[i - 1];
                        monotone = monotone && ((r.epsilon < prev.epsilon) ==
                                                (r.max_error < prev.max_error));
                    }
                }
                return json{{"slope", study.slope},
                            {"monotone", monotone},
                            {"rows", rows},
                            {"warnings", study.warnings}};
            },
            {"convergence.csv"}};
}

}  // namespace

std::function<double(double)> parse_gain(const std::string& spec) {
    static const std::string num = R"(\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*)";
    static const std::regex constant(R"(^\s*const\()" + num + R"(\)\s*$)");
    static const std::regex sinusoid(R"(^\s*sinusoid\()" + num + "," + num + "," + num +
                                     R"(\)\s*$)");
    std::smatch m;
    if (std::regex_match(spec, m, constant)) {
        const double c = std::stod(m[1]);
        return [c](double) { return c; };
    }
    if (std::regex_match(spec, m, sinusoid)) {
        const double amp = std::stod(m[1]);
        const double omega = std::stod(m[2]);
        const double phase = std::stod(m[3]);
        return [=](double t) { return amp * std::sin(omega * t + phase); };
    }
    throw ConfigError("gain '" + spec + "' is not const(c) or sinusoid(A, omega, phi)");
}

const std::vector<std::string>& experiment_names() {
    static const std::vector<std::string> names = {
        "simulate", "series-check", "decoupling", "larc", "oscillatory-track", "convergence"};
    return names;
}

ExperimentConfig parse_config(const json& config) {
    check_keys(config, {"experiment", "model", "integrator", "parameters", "output"}, "config");
    ExperimentConfig out;
    out.source = config;
    if (!config.contains("experiment") || !config.at("experiment").is_string()) {
        config_error("config", "'experiment' must be a string");
    }
    out.experiment = config.at("experiment").get<std::string>();
    const auto& names = experiment_names();
    if (std::find(names.begin(), names.end(), out.experiment) == names.end()) {
        config_error("config.experiment", "unknown experiment '" + out.experiment + "'");
    }

    if (!config.contains("model")) {
        config_error("config", "missing 'model'");
    }
    const json& model = config.at("model");
    check_keys(model, {"name", "parameters", "actuators"}, "model");
    if (!model.contains("name") || !model.at("name").is_string()) {
        config_error("model", "'name' must be a string");
    }
    out.model.name = model.at("name").get<std::string>();
    if (model.contains("parameters")) {
        if (!model.at("parameters").is_object()) {
            config_error("model.parameters", "expected an object");
        }
        for (const auto& [key, value] : model.at("parameters").items()) {
            out.model.parameters[key] = number(model.at("parameters"), key, "model.parameters");
        }
    }
    if (model.contains("actuators")) {
        for (double a : numbers(model, "actuators", "model")) {
            if (a != std::round(a)) {
                config_error("model.actuators", "actuators are integers");
            }
            out.model.actuators.push_back(static_cast<int>(a));
        }
    }

    if (config.contains("integrator")) {
        const json& integ = config.at("integrator");
        check_keys(integ, {"method", "dt", "dense_output"}, "integrator");
        if (integ.contains("method") &&
            (!integ.at("method").is_string() || integ.at("method").get<std::string>() != "rk4")) {
            config_error("integrator.method", "only \"rk4\" is available");
        }
        out.integrator.dt = positive_or(integ, "dt", "integrator", out.integrator.dt);
        if (integ.contains("dense_output")) {
            if (!integ.at("dense_output").is_boolean()) {
                config_error("integrator.dense_output", "expected a boolean");
            }
            out.integrator.dense_output = integ.at("dense_output").get<bool>();
        }
    }
    if (config.contains("parameters")) {
        out.parameters = config.at("parameters");
        if (!out.parameters.is_object()) {
            config_error("parameters", "expected an object");
        }
    }
    if (config.contains("output")) {
        if (!config.at("output").is_string()) {
            config_error("output", "expected a string");
        }
        out.output = config.at("output").get<std::string>();
    }
    return out;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream is(path);
    if (!is) {
        throw ConfigError("cannot open config " + path.string());
    }
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(j);
}

PreparedExperiment prepare(const ExperimentConfig& config) {
    MechanicalSystem sys = [&] {
        try {
            return models::build(config.model);
        } catch (const UnknownModelError&) {
            throw;
        } catch (const Error& e) {
            throw ConfigError(std::string("model: ") + e.what());
        }
    }();
    try {
        if (config.experiment == "simulate") return prepare_simulate(sys, config);
        if (config.experiment == "series-check") return prepare_series(sys, config);
        if (config.experiment == "decoupling") return prepare_decoupling(sys, config);
        if (config.experiment == "larc") return prepare_larc(sys, config);
        if (config.experiment == "oscillatory-track") return prepare_tracking(sys, config);
        return prepare_convergence(sys, config);
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        // Parameter checks that reuse library preconditions (step counts).
        throw ConfigError(std::string("parameters: ") + e.what());
    }
}

RunResult run(const ExperimentConfig& config, const fs::path& directory) {
    const PreparedExperiment prepared = prepare(config);
    std::error_code ec;
    fs::create_directories(directory, ec);
    if (ec) {
        throw Error("io", "cannot create " + directory.string() + ": " + ec.message());
    }
    const std::string started = utc_now();
    const auto t0 = std::chrono::steady_clock::now();
    RunResult result;
    result.directory = directory;
    result.report = prepared.execute(directory);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.files = prepared.artifacts;
    result.files.push_back("report.json");
    write_file(directory / "report.json",
               [&](std::ostream& os) { os << result.report.dump(2) << "\n"; });
    result.files.push_back("manifest.json");
    const json manifest{{"tool", "geoctrl"},
                        {"version", version},
                        {"experiment", config.experiment},
                        {"config", config.source},
                        {"files", result.files},
                        {"started_at", started},
                        {"wall_time_seconds", wall},
                        {"threads", worker_threads()},
                        {"compiler", __VERSION__},
                        {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                      std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                      std::to_string(EIGEN_MINOR_VERSION)}};
    write_file(directory / "manifest.json",
               [&](std::ostream& os) { os << manifest.dump(2) << "\n"; });
    return result;
}

int worker_threads() {
    if (const char* env = std::getenv("GEOCTRL_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && n > 0) {
            return static_cast<int>(std::min(n, 256L));
        }
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

json model_catalog() {
    json out = json::array();
    for (const auto& m : models::catalog()) {
        json params = json::array();
        for (const auto& p : m.parameters) {
            params.push_back({{"name", p.name},
                              {"default", p.default_value},
                              {"unit", p.unit},
                              {"description", p.description}});
        }
        out.push_back({{"name", m.name},
                       {"summary", m.summary},
                       {"dof", m.dof},
                       {"max_inputs", m.max_inputs},
                       {"default_actuators", m.default_actuators},
                       {"parameters", params}});
    }
    return out;
}

json error_report(const std::string& kind, const std::string& message, int exit_code) {
    return {{"error", {{"kind", kind}, {"message", message}, {"exit_code", exit_code}}}};
}

}  // namespace geoctrl::experiments
