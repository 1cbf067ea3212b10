#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "drm/geometry.hpp"
#include "drm/network.hpp"
#include "drm/problem.hpp"
#include "drm/ritz.hpp"

namespace drm {

struct OptimizerConfig {
    enum class Kind { SGD, Adam };
    Kind kind = Kind::Adam;
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimizerConfig sgd(double lr) { return {Kind::SGD, lr}; }
    static OptimizerConfig adam(double lr) { return {Kind::Adam, lr}; }
};

/// FullBatch minimises the empirical loss on one fixed sample set (the
/// setting the error analysis covers). Resample draws a fresh batch every
/// step; it is a practical solver mode outside that setting.
struct BatchConfig {
    enum class Mode { FullBatch, Resample };
    Mode mode = Mode::FullBatch;
    std::size_t n_interior = 512;
    std::size_t n_boundary = 512;
};

struct TrainConfig {
    OptimizerConfig optimizer;
    std::size_t steps = 1000;
    BatchConfig batch;
    bool project_every_step = true;
    std::uint64_t seed = 0;
    std::size_t log_every = 100;
    InitScheme init = InitScheme::UniformScaled;

    void validate() const {
        if (!(optimizer.lr > 0.0)) throw InvalidArgument("train: learning rate must be > 0");
        if (steps < 1) throw InvalidArgument("train: steps must be >= 1");
        if (log_every < 1) throw InvalidArgument("train: log_every must be >= 1");
        if (batch.n_interior < 1 || batch.n_boundary < 1) throw InvalidArgument("train: batch sizes must be >= 1");
    }
};

struct TrainRecord {
    std::size_t step = 0;
    LossBreakdown loss;
    double param_inf_norm = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    enum class Status { Ok, Aborted };
    Status status = Status::Ok;
    std::string message;
    NetworkParams params;  // best iterate
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_step = 0;
    std::vector<TrainRecord> history;

    bool ok() const { return status == Status::Ok; }
};

/// Seed streams derived from TrainConfig::seed.
inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kBatchStream = 2;
inline constexpr std::uint64_t kResampleStreamBase = 1000;

namespace detail {

class Optimizer {
public:
    Optimizer(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

    void step(std::vector<double>& theta, const std::vector<double>& grad) {
        ++t_;
        if (cfg_.kind == OptimizerConfig::Kind::SGD) {
            for (std::size_t k = 0; k < theta.size(); ++k) theta[k] -= cfg_.lr * grad[k];
            return;
        }
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < theta.size(); ++k) {
            m_[k] = cfg_.beta1 * m_[k] + (1.0 - cfg_.beta1) * grad[k];
            v_[k] = cfg_.beta2 * v_[k] + (1.0 - cfg_.beta2) * grad[k] * grad[k];
            theta[k] -= cfg_.lr * (m_[k] / c1) / (std::sqrt(v_[k] / c2) + cfg_.eps);
        }
    }

private:
    OptimizerConfig cfg_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace detail

/// Minimises the empirical loss over the bounded-weight class.
///
/// `fixed_batch` is used in FullBatch mode; when absent the batch is drawn
/// from the config seed. Returns the iterate with the lowest loss seen. A
/// non-finite loss or gradient stops the run with Status::Aborted; the
/// offending step is the last history record.
inline TrainResult train(const NetworkArch& arch, const EllipticProblem& problem, const TrainConfig& cfg,
                         const std::optional<SampleBatch>& fixed_batch = std::nullopt) {
    cfg.validate();
    if (problem.dimension() != arch.input_dim())
        throw DimensionMismatch("train: problem vs network input", arch.input_dim(), problem.dimension());

    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    NetworkParams params = init_params(arch, cfg.init, derive_seed(cfg.seed, kInitStream));
    if (cfg.project_every_step) params = project_weights(std::move(params), arch.weight_bound());

    const bool full = cfg.batch.mode == BatchConfig::Mode::FullBatch;
    PreparedBatch prepared;
    if (full) {
        prepared = prepare_batch(fixed_batch ? *fixed_batch
                                             : sample_batch(problem.domain, cfg.batch.n_interior, cfg.batch.n_boundary,
                                                            derive_seed(cfg.seed, kBatchStream)),
                                 problem);
    }

    TrainResult result;
    detail::Optimizer opt(cfg.optimizer, arch.parameter_count());

    auto record = [&](std::size_t step, const LossBreakdown& loss) {
        result.history.push_back({step, loss, params.inf_norm(), elapsed()});
    };

    for (std::size_t step = 0; step <= cfg.steps; ++step) {
        if (!full) {
            prepared = prepare_batch(sample_batch(problem.domain, cfg.batch.n_interior, cfg.batch.n_boundary,
                                                  derive_seed(cfg.seed, kResampleStreamBase + step)),
                                     problem);
        }
        const bool last = step == cfg.steps;
        auto lg = last ? LossAndGradient{empirical_loss(arch, params, prepared), {}}
                       : loss_and_gradient(arch, params, prepared);
        if (!std::isfinite(lg.loss.total) || !detail::all_finite(lg.gradient)) {
            record(step, lg.loss);
            result.status = TrainResult::Status::Aborted;
            result.message = "non-finite loss or gradient at step " + std::to_string(step) +
                             " (learning rate " + std::to_string(cfg.optimizer.lr) + " too large?)";
            break;
        }
        if (lg.loss.total < result.best_loss) {
            result.best_loss = lg.loss.total;
            result.best_step = step;
            result.params = params;
        }
        if (last || step % cfg.log_every == 0) record(step, lg.loss);
        if (last) break;
        opt.step(params.theta, lg.gradient);
        if (cfg.project_every_step) params = project_weights(std::move(params), arch.weight_bound());
    }
    if (result.params.theta.empty()) result.params = params;
    return result;
}

/// max(0, best recorded loss - reference); reference is the ensemble-best
/// loss standing in for the exact empirical minimiser.
inline double optimization_error_estimate(const std::vector<TrainRecord>& history, double reference_loss) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : history) best = std::min(best, r.loss.total);
    if (!std::isfinite(best)) return 0.0;
    return std::max(0.0, best - reference_loss);
}

/// Same, for the loss of the iterate a run returned.
inline double optimization_error_estimate(const TrainResult& run, double reference_loss) {
    if (!std::isfinite(run.best_loss)) return 0.0;
    return std::max(0.0, run.best_loss - reference_loss);
}

/// Lowest loss reached by any run, so the best run has zero optimisation error.
inline double ensemble_reference_loss(const std::vector<TrainResult>& runs) {
    double ref = std::numeric_limits<double>::infinity();
    for (const auto& r : runs) ref = std::min(ref, r.best_loss);
    return ref;
}

}  // namespace drm
