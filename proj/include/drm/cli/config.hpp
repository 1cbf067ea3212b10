#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drm/bounds.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"
#include "drm/problems.hpp"
#include "drm/train.hpp"

namespace drm::cli {

using json = nlohmann::json;

/// Rejected configuration; `what()` names the offending key path.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct AnalysisSection {
    std::size_t n_quad = 4096;
    std::size_t seeds = 10;  // runs use train.seed, train.seed + 1, ...
    std::size_t jobs = 1;
    bool decompose = false;
    std::size_t approx_samples = 4096;
    std::size_t approx_steps = 0;
};

struct BoundsSection {
    std::size_t N = 1000;
    std::size_t M = 1000;
    std::optional<HyperParamRequest> plan;
};

struct SweepSection {
    std::vector<double> epsilons;
    double mu = 0.5;
    Activation activation = Activation::Tanh;
    bool calibrate_first_row = true;
    std::size_t max_width = 4096;
};

struct PenaltySection {
    std::vector<double> betas = {0.2, 0.1, 0.05};
    std::size_t n_grid = 4096;
};

/// Everything one invocation needs, after defaults are filled in.
struct ExperimentConfig {
    ProblemSpec problem = builtin_problem_spec("sin1d_robin");
    std::optional<NetworkArch> arch;
    TrainConfig train;
    AnalysisSection analysis;
    BoundConstants constants;
    BoundsSection bounds;
    SweepSection sweep;
    PenaltySection penalty;
    std::string output = "out";

    std::vector<std::uint64_t> seed_list() const {
        std::vector<std::uint64_t> s;
        for (std::size_t k = 0; k < analysis.seeds; ++k) s.push_back(train.seed + k);
        return s;
    }
    const NetworkArch& require_arch() const {
        if (!arch) throw ConfigError("config: 'arch' is required for this command");
        return *arch;
    }
};

namespace detail {

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError("config: '" + path + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("config: unknown key '" + (path.empty() ? key : path + "." + key) + "'");
    }
}

template <class T>
T read(const json& j, const std::string& path, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: '" + (path.empty() ? std::string(key) : path + "." + key) + "' has the wrong type");
    }
}

inline std::size_t read_count(const json& j, const std::string& path, const char* key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError("config: '" + path + "." + key + "' must be a nonnegative integer");
    return v.get<std::size_t>();
}

inline Domain parse_domain(const json& j, const std::string& path) {
    const auto kind = read<std::string>(j, path, "kind", "hypercube");
    if (kind == "hypercube") {
        check_keys(j, path, {"kind", "d"});
        return Domain::hypercube(read_count(j, path, "d", 1));
    }
    if (kind == "ball") {
        check_keys(j, path, {"kind", "d", "center", "radius"});
        if (!j.contains("center") || !j.contains("radius")) throw ConfigError("config: '" + path + "' ball needs center and radius");
        auto center = read<std::vector<double>>(j, path, "center", {});
        if (j.contains("d") && read_count(j, path, "d", 0) != center.size())
            throw ConfigError("config: '" + path + ".d' does not match the length of the center");
        return Domain::ball(std::move(center), read<double>(j, path, "radius", 0.0));
    }
    throw ConfigError("config: '" + path + ".kind' must be 'hypercube' or 'ball'");
}

inline json domain_to_json(const Domain& d) {
    if (d.kind() == DomainKind::UnitHypercube) return {{"kind", "hypercube"}, {"d", d.dimension()}};
    return {{"kind", "ball"}, {"d", d.dimension()}, {"center", d.center()}, {"radius", d.radius()}};
}

inline BoundaryCondition parse_bc(const json& j, const std::string& path) {
    const auto kind = read<std::string>(j, path, "kind", "robin");
    if (kind == "robin") {
        check_keys(j, path, {"kind", "alpha", "beta"});
        return BoundaryCondition::robin(read<double>(j, path, "alpha", 1.0), read<double>(j, path, "beta", 1.0));
    }
    if (kind == "neumann") {
        check_keys(j, path, {"kind"});
        return BoundaryCondition::neumann();
    }
    if (kind == "dirichlet_penalty") {
        check_keys(j, path, {"kind", "beta"});
        return BoundaryCondition::dirichlet_penalty(read<double>(j, path, "beta", kDefaultPenaltyBeta));
    }
    throw ConfigError("config: '" + path + ".kind' must be robin, neumann or dirichlet_penalty");
}

inline json bc_to_json(const BoundaryCondition& bc) {
    switch (bc.kind) {
        case BoundaryCondition::Kind::Neumann: return {{"kind", "neumann"}};
        case BoundaryCondition::Kind::DirichletPenalty: return {{"kind", "dirichlet_penalty"}, {"beta", bc.beta}};
        case BoundaryCondition::Kind::Robin: break;
    }
    return {{"kind", "robin"}, {"alpha", bc.alpha}, {"beta", bc.beta}};
}

inline ReactionCoefficient parse_reaction(const json& j, const std::string& path) {
    const auto kind = read<std::string>(j, path, "kind", "constant");
    if (kind == "constant") {
        check_keys(j, path, {"kind", "value"});
        return ReactionCoefficient::constant_value(read<double>(j, path, "value", 1.0));
    }
    if (kind == "one_plus_squared") {
        check_keys(j, path, {"kind"});
        return ReactionCoefficient::one_plus_squared();
    }
    throw ConfigError("config: '" + path + ".kind' must be constant or one_plus_squared");
}

inline json reaction_to_json(const ReactionCoefficient& w) {
    if (w.kind == ReactionCoefficient::Kind::OnePlusSquared) return {{"kind", "one_plus_squared"}};
    return {{"kind", "constant"}, {"value", w.constant}};
}

inline ProblemSpec parse_problem(const json& j) {
    if (j.is_string()) return builtin_problem_spec(j.get<std::string>());
    check_keys(j, "problem", {"name", "builtin", "domain", "solution", "reaction", "bc"});
    ProblemSpec s = j.contains("builtin") ? builtin_problem_spec(read<std::string>(j, "problem", "builtin", ""))
                                          : ProblemSpec{};
    s.name = read<std::string>(j, "problem", "name", s.name);
    if (j.contains("domain")) s.domain = parse_domain(j.at("domain"), "problem.domain");
    if (j.contains("solution")) s.solution = solution_kind_from_string(read<std::string>(j, "problem", "solution", ""));
    if (j.contains("reaction")) s.w = parse_reaction(j.at("reaction"), "problem.reaction");
    if (j.contains("bc")) s.bc = parse_bc(j.at("bc"), "problem.bc");
    return s;
}

inline json problem_to_json(const ProblemSpec& s) {
    return {{"name", s.name},
            {"domain", domain_to_json(s.domain)},
            {"solution", to_string(s.solution)},
            {"reaction", reaction_to_json(s.w)},
            {"bc", bc_to_json(s.bc)}};
}

inline NetworkArch parse_arch(const json& j) {
    check_keys(j, "arch", {"widths", "activation", "weight_bound"});
    if (!j.contains("widths")) throw ConfigError("config: 'arch.widths' is required");
    return NetworkArch(read<std::vector<std::size_t>>(j, "arch", "widths", {}),
                       activation_from_string(read<std::string>(j, "arch", "activation", "tanh")),
                       read<double>(j, "arch", "weight_bound", 10.0));
}

inline json arch_to_json(const NetworkArch& a) {
    return {{"widths", a.widths()}, {"activation", to_string(a.activation())}, {"weight_bound", a.weight_bound()}};
}

inline TrainConfig parse_train(const json& j) {
    check_keys(j, "train", {"optimizer", "lr", "steps", "batch_mode", "n_interior", "n_boundary", "project_every_step",
                            "seed", "log_every", "init"});
    TrainConfig t;
    const auto opt = read<std::string>(j, "train", "optimizer", "adam");
    const double lr = read<double>(j, "train", "lr", 1e-2);
    if (opt == "adam")
        t.optimizer = OptimizerConfig::adam(lr);
    else if (opt == "sgd")
        t.optimizer = OptimizerConfig::sgd(lr);
    else
        throw ConfigError("config: 'train.optimizer' must be adam or sgd");
    t.steps = read_count(j, "train", "steps", t.steps);
    const auto mode = read<std::string>(j, "train", "batch_mode", "full");
    if (mode == "full")
        t.batch.mode = BatchConfig::Mode::FullBatch;
    else if (mode == "resample")
        t.batch.mode = BatchConfig::Mode::Resample;
    else
        throw ConfigError("config: 'train.batch_mode' must be full or resample");
    t.batch.n_interior = read_count(j, "train", "n_interior", t.batch.n_interior);
    t.batch.n_boundary = read_count(j, "train", "n_boundary", t.batch.n_boundary);
    t.project_every_step = read<bool>(j, "train", "project_every_step", true);
    t.seed = read<std::uint64_t>(j, "train", "seed", 0);
    t.log_every = read_count(j, "train", "log_every", t.log_every);
    const auto init = read<std::string>(j, "train", "init", "uniform");
    if (init == "uniform")
        t.init = InitScheme::UniformScaled;
    else if (init == "zero")
        t.init = InitScheme::Zero;
    else
        throw ConfigError("config: 'train.init' must be uniform or zero");
    try {
        t.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return t;
}

inline json train_to_json(const TrainConfig& t) {
    return {{"optimizer", t.optimizer.kind == OptimizerConfig::Kind::Adam ? "adam" : "sgd"},
            {"lr", t.optimizer.lr},
            {"steps", t.steps},
            {"batch_mode", t.batch.mode == BatchConfig::Mode::FullBatch ? "full" : "resample"},
            {"n_interior", t.batch.n_interior},
            {"n_boundary", t.batch.n_boundary},
            {"project_every_step", t.project_every_step},
            {"seed", t.seed},
            {"log_every", t.log_every},
            {"init", t.init == InitScheme::Zero ? "zero" : "uniform"}};
}

inline BoundConstants parse_constants(const json& j) {
    if (!j.is_object()) throw ConfigError("config: 'constants' must be an object");
    BoundConstants c;
    for (const auto& [key, v] : j.items()) {
        const auto& names = BoundConstants::names();
        if (std::find(names.begin(), names.end(), key) == names.end())
            throw ConfigError("config: unknown key 'constants." + key + "'");
        if (!v.is_number()) throw ConfigError("config: 'constants." + key + "' must be a number");
        c.set(key, v.get<double>());
    }
    return c;
}

}  // namespace detail

/// Parses a configuration document. Every object is closed: an unknown key
/// anywhere is an error naming its full path.
inline ExperimentConfig parse_config(const json& j) {
    using namespace detail;
    check_keys(j, "", {"problem", "arch", "train", "analysis", "constants", "bounds", "sweep", "penalty", "output"});
    ExperimentConfig c;
    try {
        if (j.contains("problem")) c.problem = parse_problem(j.at("problem"));
        if (j.contains("arch")) c.arch = parse_arch(j.at("arch"));
        if (j.contains("train")) c.train = parse_train(j.at("train"));
        if (j.contains("constants")) c.constants = parse_constants(j.at("constants"));
        if (j.contains("analysis")) {
            const auto& a = j.at("analysis");
            check_keys(a, "analysis", {"n_quad", "seeds", "jobs", "decompose", "approx_samples", "approx_steps"});
            c.analysis.n_quad = read_count(a, "analysis", "n_quad", c.analysis.n_quad);
            c.analysis.seeds = read_count(a, "analysis", "seeds", c.analysis.seeds);
            c.analysis.jobs = read_count(a, "analysis", "jobs", c.analysis.jobs);
            c.analysis.decompose = read<bool>(a, "analysis", "decompose", false);
            c.analysis.approx_samples = read_count(a, "analysis", "approx_samples", c.analysis.approx_samples);
            c.analysis.approx_steps = read_count(a, "analysis", "approx_steps", c.analysis.approx_steps);
            if (c.analysis.n_quad < 1000) throw ConfigError("config: 'analysis.n_quad' must be >= 1000");
        }
        if (j.contains("bounds")) {
            const auto& b = j.at("bounds");
            check_keys(b, "bounds", {"N", "M", "plan"});
            c.bounds.N = read_count(b, "bounds", "N", c.bounds.N);
            c.bounds.M = read_count(b, "bounds", "M", c.bounds.M);
            if (b.contains("plan")) {
                const auto& p = b.at("plan");
                check_keys(p, "bounds.plan", {"epsilon", "mu"});
                HyperParamRequest r;
                r.epsilon = read<double>(p, "bounds.plan", "epsilon", r.epsilon);
                r.mu = read<double>(p, "bounds.plan", "mu", r.mu);
                c.bounds.plan = r;
            }
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            check_keys(s, "sweep", {"epsilons", "mu", "activation", "calibrate_first_row", "max_width"});
            c.sweep.epsilons = read<std::vector<double>>(s, "sweep", "epsilons", {});
            c.sweep.mu = read<double>(s, "sweep", "mu", c.sweep.mu);
            c.sweep.activation = activation_from_string(read<std::string>(s, "sweep", "activation", "tanh"));
            c.sweep.calibrate_first_row = read<bool>(s, "sweep", "calibrate_first_row", true);
            c.sweep.max_width = read_count(s, "sweep", "max_width", c.sweep.max_width);
            for (std::size_t k = 1; k < c.sweep.epsilons.size(); ++k)
                if (!(c.sweep.epsilons[k] < c.sweep.epsilons[k - 1]))
                    throw ConfigError("config: 'sweep.epsilons' must be strictly decreasing");
        }
        if (j.contains("penalty")) {
            const auto& p = j.at("penalty");
            check_keys(p, "penalty", {"betas", "n_grid"});
            c.penalty.betas = read<std::vector<double>>(p, "penalty", "betas", c.penalty.betas);
            c.penalty.n_grid = read_count(p, "penalty", "n_grid", c.penalty.n_grid);
        }
        c.output = read<std::string>(j, "", "output", c.output);
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (c.arch && c.arch->input_dim() != c.problem.domain.dimension())
        throw ConfigError("config: arch input width " + std::to_string(c.arch->input_dim()) +
                          " does not match the problem dimension " + std::to_string(c.problem.domain.dimension()));
    return c;
}

/// The effective configuration; parse_config(to_json(c)) reproduces c.
inline json to_json(const ExperimentConfig& c) {
    using namespace detail;
    json j;
    j["problem"] = problem_to_json(c.problem);
    if (c.arch) j["arch"] = arch_to_json(*c.arch);
    j["train"] = train_to_json(c.train);
    j["analysis"] = {{"n_quad", c.analysis.n_quad},
                     {"seeds", c.analysis.seeds},
                     {"jobs", c.analysis.jobs},
                     {"decompose", c.analysis.decompose},
                     {"approx_samples", c.analysis.approx_samples},
                     {"approx_steps", c.analysis.approx_steps}};
    json consts = json::object();
    for (const auto& n : BoundConstants::names()) consts[n] = c.constants.get(n);
    j["constants"] = consts;
    j["bounds"] = {{"N", c.bounds.N}, {"M", c.bounds.M}};
    if (c.bounds.plan) j["bounds"]["plan"] = {{"epsilon", c.bounds.plan->epsilon}, {"mu", c.bounds.plan->mu}};
    j["sweep"] = {{"epsilons", c.sweep.epsilons},
                  {"mu", c.sweep.mu},
                  {"activation", to_string(c.sweep.activation)},
                  {"calibrate_first_row", c.sweep.calibrate_first_row},
                  {"max_width", c.sweep.max_width}};
    j["penalty"] = {{"betas", c.penalty.betas}, {"n_grid", c.penalty.n_grid}};
    j["output"] = c.output;
    return j;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

}  // namespace drm::cli
