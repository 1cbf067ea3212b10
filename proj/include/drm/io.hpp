#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "drm/analysis.hpp"
#include "drm/bounds.hpp"
#include "drm/common.hpp"
#include "drm/network.hpp"
#include "drm/ritz.hpp"
#include "drm/train.hpp"

namespace drm {

using json = nlohmann::json;

// ------------------------------------------------------------------ CSV

/// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline const char* history_csv_header() { return "step,l1,l2,l3,l4,l5,total,param_inf_norm,seconds"; }

inline std::string history_csv_row(const TrainRecord& r) {
    std::string s = std::to_string(r.step);
    for (double v : r.loss.as_array()) s += "," + format_double(v);
    s += "," + format_double(r.param_inf_norm) + "," + format_double(r.seconds);
    return s;
}

inline void write_history_csv(std::ostream& os, const std::vector<TrainRecord>& history) {
    os << history_csv_header() << '\n';
    for (const auto& r : history) os << history_csv_row(r) << '\n';
}

inline const char* sweep_csv_header() {
    return "plan_id,eps,seed,depth,width_total,B_theta,N,M,beta,h1_error,h1_stderr,gap,stat_bound,status";
}

inline std::string sweep_csv_row(const SweepRow& r) {
    std::string s = csv_field(r.plan_id);
    s += "," + format_double(r.eps) + "," + std::to_string(r.seed) + "," + std::to_string(r.depth) + "," +
         std::to_string(r.width_total) + "," + format_double(r.B_theta) + "," + std::to_string(r.N) + "," +
         std::to_string(r.M) + "," + format_double(r.beta) + "," + format_double(r.h1_error) + "," +
         format_double(r.h1_stderr) + "," + format_double(r.gap) + "," + format_double(r.stat_bound) + "," +
         csv_field(r.status);
    return s;
}

// ----------------------------------------------------------------- JSON

inline json to_json_value(const LossBreakdown& l) {
    return {{"l1", l.l1}, {"l2", l.l2}, {"l3", l.l3}, {"l4", l.l4}, {"l5", l.l5}, {"total", l.total}};
}

/// {"value": v, "log10": ...}; value is null when it overflows a double.
inline json to_json_value(const BoundValue& b) {
    json j;
    j["value"] = b.representable ? json(b.value) : json(nullptr);
    j["log10"] = b.log10();
    return j;
}

inline json to_json_value(const BoundConstants& c) {
    json j = json::object();
    for (const auto& n : BoundConstants::names()) j[n] = c.get(n);
    return j;
}

inline json to_json_value(const NetworkArch& a) {
    return {{"widths", a.widths()},
            {"activation", to_string(a.activation())},
            {"weight_bound", a.weight_bound()},
            {"parameter_count", a.parameter_count()}};
}

inline json to_json_value(const ClassConstants& c) {
    json j;
    for (int i = 0; i < 5; ++i) {
        j["B" + std::to_string(i + 1)] = to_json_value(c.B[i]);
        j["L" + std::to_string(i + 1)] = to_json_value(c.L[i]);
    }
    return j;
}

inline json to_json_value(const BoundReport& r) {
    json j;
    j["inputs"] = {{"arch", to_json_value(r.arch)}, {"N", r.N}, {"M", r.M}, {"alpha", r.alpha},
                   {"beta", r.beta},                {"d", r.d}};
    j["constants"] = to_json_value(r.constants);
    j["class_constants"] = to_json_value(r.class_constants);
    json classes = json::array();
    for (int i = 0; i < 5; ++i) {
        const auto& c = r.classes[i];
        json cj;
        cj["class"] = i + 1;
        cj["covering_number_at_inv_sqrt_N"] = to_json_value(c.cover_at_delta);
        cj["rademacher_bound"] = c.rademacher ? to_json_value(*c.rademacher) : json(nullptr);
        if (!c.rademacher_error.empty()) cj["rademacher_error"] = c.rademacher_error;
        classes.push_back(cj);
    }
    j["classes"] = classes;
    j["statistical_error_bound"] = to_json_value(r.statistical);
    j["penalty_gap_bound"] = r.penalty ? json(*r.penalty) : json(nullptr);
    return j;
}

inline json to_json_value(const HyperParamPlan& p) {
    json j;
    j["depth"] = p.depth;
    j["weight_count"] = to_json_value(p.weight_count);
    j["weight_bound"] = to_json_value(p.weight_bound);
    j["samples"] = to_json_value(p.samples);
    j["beta"] = p.beta ? json(*p.beta) : json(nullptr);
    j["constants"] = to_json_value(p.constants);
    j["warnings"] = p.warnings;
    return j;
}

inline json to_json_value(const ErrorReport& e) {
    return {{"l2_error", e.l2_error},
            {"l2_stderr", e.l2_stderr},
            {"h1_seminorm_error", e.h1_seminorm_error},
            {"h1_seminorm_stderr", e.h1_seminorm_stderr},
            {"h1_error", e.h1_error},
            {"h1_stderr", e.h1_stderr},
            {"reference_h1_norm", e.reference_h1_norm},
            {"relative_h1_error", e.relative_h1()},
            {"samples", e.samples},
            {"method", e.method}};
}

inline json to_json_value(const DecompositionReport& r) {
    return {{"e_app", r.e_app},
            {"e_sta", r.e_sta},
            {"e_opt", r.e_opt},
            {"e_sta_mean", r.e_sta_mean},
            {"e_opt_median", r.e_opt_median},
            {"approx_h1_error", r.approx_h1_error},
            {"reference_loss", r.reference_loss},
            {"gaps", r.gaps},
            {"opt_errors", r.opt_errors},
            {"notes", r.notes}};
}

// ------------------------------------------------------- parameter files

inline constexpr char kParamMagic[4] = {'D', 'R', 'M', 'P'};
inline constexpr std::uint32_t kParamVersion = 1;

/// Binary snapshot: magic, version, architecture, then the raw parameter
/// doubles. Little-endian hosts only; the round trip is bit-exact.
inline void save_params_binary(std::ostream& os, const NetworkArch& arch, const NetworkParams& p) {
    static_assert(std::endian::native == std::endian::little, "parameter files assume a little-endian host");
    if (p.size() != arch.parameter_count())
        throw DimensionMismatch("save_params: parameter vector", arch.parameter_count(), p.size());
    auto put = [&](const auto& v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); };
    os.write(kParamMagic, 4);
    put(kParamVersion);
    put(static_cast<std::uint32_t>(arch.widths().size()));
    for (std::size_t w : arch.widths()) put(static_cast<std::uint64_t>(w));
    put(static_cast<std::uint8_t>(arch.activation() == Activation::Tanh ? 1 : 0));
    put(arch.weight_bound());
    put(static_cast<std::uint64_t>(p.size()));
    os.write(reinterpret_cast<const char*>(p.theta.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!os) throw NumericalError("save_params: write failed");
}

struct LoadedParams {
    NetworkArch arch;
    NetworkParams params;
};

inline LoadedParams load_params_binary(std::istream& is) {
    auto get = [&](auto& v) {
        is.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!is) throw InvalidArgument("load_params: truncated file");
    };
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kParamMagic, 4) != 0) throw InvalidArgument("load_params: not a parameter file");
    std::uint32_t version = 0, layers = 0;
    get(version);
    if (version != kParamVersion) throw InvalidArgument("load_params: unsupported version " + std::to_string(version));
    get(layers);
    if (layers < 3 || layers > 1024) throw InvalidArgument("load_params: implausible layer count");
    std::vector<std::size_t> widths(layers);
    for (auto& w : widths) {
        std::uint64_t v = 0;
        get(v);
        w = static_cast<std::size_t>(v);
    }
    std::uint8_t act = 0;
    double bound = 0.0;
    std::uint64_t count = 0;
    get(act);
    get(bound);
    get(count);
    NetworkArch arch(widths, act ? Activation::Tanh : Activation::Logistic, bound);
    if (count != arch.parameter_count()) throw DimensionMismatch("load_params: parameter count", arch.parameter_count(), count);
    NetworkParams p{std::vector<double>(count)};
    is.read(reinterpret_cast<char*>(p.theta.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw InvalidArgument("load_params: truncated file");
    return {std::move(arch), std::move(p)};
}

inline json params_to_json(const NetworkArch& arch, const NetworkParams& p) {
    return {{"arch", to_json_value(arch)}, {"theta", p.theta}};
}

inline LoadedParams params_from_json(const json& j) {
    const auto& a = j.at("arch");
    NetworkArch arch(a.at("widths").get<std::vector<std::size_t>>(),
                     activation_from_string(a.at("activation").get<std::string>()), a.at("weight_bound").get<double>());
    return {arch, unflatten(arch, j.at("theta").get<std::vector<double>>())};
}

inline void save_params_file(const std::string& path, const NetworkArch& arch, const NetworkParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
    save_params_binary(os, arch, p);
}

inline LoadedParams load_params_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw InvalidArgument("cannot open '" + path + "'");
    return load_params_binary(is);
}

}  // namespace drm
