#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drm/common.hpp"
#include "drm/rng.hpp"

namespace drm {

enum class Activation { Logistic, Tanh };

inline std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "logistic"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "logistic" || s == "sigmoid") return Activation::Logistic;
    throw InvalidArgument("unknown activation '" + s + "' (expected tanh or logistic)");
}

/// rho, rho', rho'' at one pre-activation.
struct ActivationJet {
    double value;
    double d1;
    double d2;
};

inline ActivationJet activation_jet(Activation a, double s) {
    if (a == Activation::Tanh) {
        const double t = std::tanh(s);
        const double d1 = 1.0 - t * t;
        return {t, d1, -2.0 * t * d1};
    }
    const double sig = 1.0 / (1.0 + std::exp(-s));
    const double d1 = sig * (1.0 - sig);
    return {sig, d1, d1 * (1.0 - 2.0 * sig)};
}

/// sup |rho'| for the supported activations.
inline double activation_derivative_bound(Activation a) { return a == Activation::Tanh ? 1.0 : 0.25; }

/// Fully connected architecture n_0 -> n_1 -> ... -> n_D with scalar output.
///
/// Hidden layers apply the activation componentwise; the last layer is affine.
/// Every weight of a network in this class is bounded by weight_bound().
class NetworkArch {
public:
    NetworkArch(std::vector<std::size_t> widths, Activation activation, double weight_bound)
        : widths_(std::move(widths)), activation_(activation), weight_bound_(weight_bound) {
        if (widths_.size() < 3) throw InvalidArgument("NetworkArch: depth must be >= 2 (at least one hidden layer)");
        if (std::any_of(widths_.begin(), widths_.end(), [](std::size_t n) { return n == 0; }))
            throw InvalidArgument("NetworkArch: all widths must be positive");
        if (widths_.back() != 1) throw InvalidArgument("NetworkArch: output width must be 1");
        if (!(weight_bound_ >= 1.0)) throw InvalidArgument("NetworkArch: weight bound must be >= 1");
        offsets_.resize(depth() + 1, 0);
        for (std::size_t l = 1; l <= depth(); ++l)
            offsets_[l] = offsets_[l - 1] + widths_[l] * widths_[l - 1] + widths_[l];
    }

    std::size_t depth() const { return widths_.size() - 1; }
    std::size_t input_dim() const { return widths_.front(); }
    std::size_t width(std::size_t l) const { return widths_.at(l); }
    const std::vector<std::size_t>& widths() const { return widths_; }
    Activation activation() const { return activation_; }
    double weight_bound() const { return weight_bound_; }

    /// sum over layers of n_l * n_{l-1} + n_l. Reported as the nonzero weight
    /// count; trained weights are generically nonzero.
    std::size_t parameter_count() const { return offsets_.back(); }

    /// Offset of A_l (row-major n_l x n_{l-1}) in the flat vector; b_l follows it.
    std::size_t weight_offset(std::size_t l) const { return offsets_[l - 1]; }
    std::size_t bias_offset(std::size_t l) const { return offsets_[l - 1] + widths_[l] * widths_[l - 1]; }

    /// Product of hidden widths n_1 ... n_{D-1}.
    double hidden_width_product() const {
        double p = 1.0;
        for (std::size_t l = 1; l < depth(); ++l) p *= static_cast<double>(widths_[l]);
        return p;
    }

    std::size_t max_hidden_width() const { return *std::max_element(widths_.begin() + 1, widths_.end() - 1); }

    std::string describe() const {
        std::string s = "[";
        for (std::size_t l = 0; l < widths_.size(); ++l) s += (l ? "," : "") + std::to_string(widths_[l]);
        return s + "] " + to_string(activation_) + " B_theta=" + std::to_string(weight_bound_);
    }

    friend bool operator==(const NetworkArch& a, const NetworkArch& b) {
        return a.widths_ == b.widths_ && a.activation_ == b.activation_ && a.weight_bound_ == b.weight_bound_;
    }

private:
    std::vector<std::size_t> widths_;
    Activation activation_;
    double weight_bound_;
    std::vector<std::size_t> offsets_;
};

/// One layer's weights in matrix form.
struct LayerParams {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> weights;  // row-major rows x cols
    std::vector<double> bias;     // rows

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Concrete weight assignment theta. Stored flat; layer views come from the arch.
struct NetworkParams {
    std::vector<double> theta;

    std::size_t size() const { return theta.size(); }

    double inf_norm() const {
        double m = 0.0;
        for (double v : theta) m = std::max(m, std::abs(v));
        return m;
    }

    std::span<const double> weights(const NetworkArch& arch, std::size_t l) const {
        return {theta.data() + arch.weight_offset(l), arch.width(l) * arch.width(l - 1)};
    }
    std::span<const double> bias(const NetworkArch& arch, std::size_t l) const {
        return {theta.data() + arch.bias_offset(l), arch.width(l)};
    }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

inline std::vector<LayerParams> to_layers(const NetworkArch& arch, const NetworkParams& params) {
    std::vector<LayerParams> layers;
    for (std::size_t l = 1; l <= arch.depth(); ++l) {
        const auto w = params.weights(arch, l);
        const auto b = params.bias(arch, l);
        layers.push_back({arch.width(l), arch.width(l - 1), {w.begin(), w.end()}, {b.begin(), b.end()}});
    }
    return layers;
}

inline NetworkParams from_layers(const NetworkArch& arch, const std::vector<LayerParams>& layers) {
    if (layers.size() != arch.depth()) throw DimensionMismatch("from_layers: layer count", arch.depth(), layers.size());
    NetworkParams p;
    p.theta.reserve(arch.parameter_count());
    for (std::size_t l = 1; l <= arch.depth(); ++l) {
        const auto& L = layers[l - 1];
        if (L.rows != arch.width(l) || L.cols != arch.width(l - 1) || L.weights.size() != L.rows * L.cols ||
            L.bias.size() != L.rows)
            throw InvalidArgument("from_layers: layer " + std::to_string(l) + " shape does not match arch");
        p.theta.insert(p.theta.end(), L.weights.begin(), L.weights.end());
        p.theta.insert(p.theta.end(), L.bias.begin(), L.bias.end());
    }
    return p;
}

inline NetworkParams unflatten(const NetworkArch& arch, std::vector<double> theta) {
    if (theta.size() != arch.parameter_count())
        throw DimensionMismatch("unflatten", arch.parameter_count(), theta.size());
    return NetworkParams{std::move(theta)};
}

enum class InitScheme { UniformScaled, Zero };

/// UniformScaled draws every entry from U(-s, s), s = min(B_theta, sqrt(6 / (n_in + n_out))).
inline double init_scale(const NetworkArch& arch, std::size_t l) {
    return std::min(arch.weight_bound(),
                    std::sqrt(6.0 / static_cast<double>(arch.width(l - 1) + arch.width(l))));
}

inline NetworkParams init_params(const NetworkArch& arch, InitScheme scheme, std::uint64_t seed) {
    NetworkParams p;
    p.theta.assign(arch.parameter_count(), 0.0);
    if (scheme == InitScheme::Zero) return p;
    Xoshiro256 rng(seed);
    for (std::size_t l = 1; l <= arch.depth(); ++l) {
        const double s = init_scale(arch, l);
        const std::size_t begin = arch.weight_offset(l);
        const std::size_t end = begin + arch.width(l) * arch.width(l - 1) + arch.width(l);
        for (std::size_t k = begin; k < end; ++k) p.theta[k] = rng.uniform(-s, s);
    }
    return p;
}

/// Componentwise clamp of theta to [-bound, bound].
inline NetworkParams project_weights(NetworkParams params, double bound) {
    if (!(bound >= 1.0)) throw InvalidArgument("project_weights: bound must be >= 1");
    for (double& v : params.theta) v = std::clamp(v, -bound, bound);
    return params;
}

/// u(x) together with its input gradient.
struct EvalResult {
    double value = 0.0;
    std::vector<double> gradient;
};

/// Reusable workspace for evaluating one network at many points.
///
/// forward() carries d dual components through the recursion (one per input
/// coordinate), so a single pass yields u(x) and grad_x u(x). backward() then
/// runs reverse accumulation over that dual computation: given adjoints of u
/// and of grad_x u it adds d(loss)/d(theta) into a gradient buffer. This is
/// what lets the loss gradient see the |grad u|^2 term.
class NetworkEvaluator {
public:
    NetworkEvaluator(const NetworkArch& arch, const NetworkParams& params) : arch_(arch), params_(params) {
        if (params.size() != arch.parameter_count())
            throw DimensionMismatch("NetworkEvaluator: parameter vector", arch.parameter_count(), params.size());
        const std::size_t D = arch.depth();
        const std::size_t d = arch.input_dim();
        s_.resize(D);
        h_.resize(D);
        rho1_.resize(D);
        rho2_.resize(D);
        ds_.resize(D);
        dh_.resize(D);
        for (std::size_t l = 1; l < D; ++l) {
            const std::size_t n = arch.width(l);
            s_[l].resize(n);
            h_[l].resize(n);
            rho1_[l].resize(n);
            rho2_[l].resize(n);
            ds_[l].resize(n * d);
            dh_[l].resize(n * d);
        }
        const std::size_t wmax = *std::max_element(arch.widths().begin(), arch.widths().end());
        hbar_.resize(wmax);
        dhbar_.resize(wmax * d);
        sbar_.resize(wmax);
        dsbar_.resize(wmax * d);
        hbar_prev_.resize(wmax);
        dhbar_prev_.resize(wmax * d);
        grad_.resize(d);
        x_.resize(d);
    }

    const NetworkArch& arch() const { return arch_; }

    /// Value only.
    double value(std::span<const double> x) {
        check_input(x);
        const std::size_t D = arch_.depth();
        const auto& th = params_.theta;
        std::copy(x.begin(), x.end(), x_.begin());
        for (std::size_t l = 1; l < D; ++l) {
            const std::size_t n = arch_.width(l), m = arch_.width(l - 1);
            const double* A = th.data() + arch_.weight_offset(l);
            const double* b = th.data() + arch_.bias_offset(l);
            const double* in = (l == 1) ? x_.data() : h_[l - 1].data();
            for (std::size_t j = 0; j < n; ++j) {
                double acc = b[j];
                const double* row = A + j * m;
                for (std::size_t k = 0; k < m; ++k) acc += row[k] * in[k];
                s_[l][j] = acc;
                h_[l][j] = (arch_.activation() == Activation::Tanh) ? std::tanh(acc) : 1.0 / (1.0 + std::exp(-acc));
            }
        }
        return output_value();
    }

    /// Value and input gradient; the gradient is available through gradient().
    double forward(std::span<const double> x) {
        check_input(x);
        const std::size_t D = arch_.depth();
        const std::size_t d = arch_.input_dim();
        const auto& th = params_.theta;
        std::copy(x.begin(), x.end(), x_.begin());
        for (std::size_t l = 1; l < D; ++l) {
            const std::size_t n = arch_.width(l), m = arch_.width(l - 1);
            const double* A = th.data() + arch_.weight_offset(l);
            const double* b = th.data() + arch_.bias_offset(l);
            double* ds = ds_[l].data();
            if (l == 1) {
                for (std::size_t j = 0; j < n; ++j) {
                    const double* row = A + j * m;
                    double acc = b[j];
                    for (std::size_t k = 0; k < m; ++k) acc += row[k] * x_[k];
                    s_[l][j] = acc;
                    for (std::size_t p = 0; p < d; ++p) ds[j * d + p] = row[p];
                }
            } else {
                const double* hin = h_[l - 1].data();
                const double* dhin = dh_[l - 1].data();
                for (std::size_t j = 0; j < n; ++j) {
                    const double* row = A + j * m;
                    double acc = b[j];
                    double* dsj = ds + j * d;
                    for (std::size_t p = 0; p < d; ++p) dsj[p] = 0.0;
                    for (std::size_t k = 0; k < m; ++k) {
                        const double a = row[k];
                        acc += a * hin[k];
                        const double* dhk = dhin + k * d;
                        for (std::size_t p = 0; p < d; ++p) dsj[p] += a * dhk[p];
                    }
                    s_[l][j] = acc;
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                const auto jet = activation_jet(arch_.activation(), s_[l][j]);
                h_[l][j] = jet.value;
                rho1_[l][j] = jet.d1;
                rho2_[l][j] = jet.d2;
                for (std::size_t p = 0; p < d; ++p) dh_[l][j * d + p] = jet.d1 * ds[j * d + p];
            }
        }
        const std::size_t m = arch_.width(D - 1);
        const double* A = th.data() + arch_.weight_offset(D);
        for (std::size_t p = 0; p < d; ++p) grad_[p] = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            for (std::size_t p = 0; p < d; ++p) grad_[p] += A[k] * dh_[D - 1][k * d + p];
        return output_value();
    }

    std::span<const double> gradient() const { return grad_; }

    /// Adds (du/dtheta)*u_bar + (d grad_x u/dtheta) . grad_bar into `out`.
    /// Must follow forward() at the same point. grad_bar may be empty, in which
    /// case only the value path is differentiated (valid after value() too).
    void backward(double u_bar, std::span<const double> grad_bar, std::span<double> out) {
        const std::size_t D = arch_.depth();
        const std::size_t d = arch_.input_dim();
        const bool dual = !grad_bar.empty();
        const auto& th = params_.theta;

        // output layer
        {
            const std::size_t m = arch_.width(D - 1);
            const double* A = th.data() + arch_.weight_offset(D);
            double* gA = out.data() + arch_.weight_offset(D);
            const double* h = h_[D - 1].data();
            const double* dh = dh_[D - 1].data();
            for (std::size_t k = 0; k < m; ++k) {
                double g = u_bar * h[k];
                if (dual)
                    for (std::size_t p = 0; p < d; ++p) g += grad_bar[p] * dh[k * d + p];
                gA[k] += g;
                hbar_[k] = A[k] * u_bar;
                if (dual)
                    for (std::size_t p = 0; p < d; ++p) dhbar_[k * d + p] = A[k] * grad_bar[p];
            }
            out[arch_.bias_offset(D)] += u_bar;
        }

        for (std::size_t l = D - 1; l >= 1; --l) {
            const std::size_t n = arch_.width(l), m = arch_.width(l - 1);
            const double* A = th.data() + arch_.weight_offset(l);
            double* gA = out.data() + arch_.weight_offset(l);
            double* gb = out.data() + arch_.bias_offset(l);
            const double* ds = ds_[l].data();
            const double* hin = (l == 1) ? x_.data() : h_[l - 1].data();
            const double* dhin = (l == 1) ? nullptr : dh_[l - 1].data();

            for (std::size_t j = 0; j < n; ++j) {
                if (!dual) {
                    const double r1 = (arch_.activation() == Activation::Tanh) ? 1.0 - h_[l][j] * h_[l][j]
                                                                               : h_[l][j] * (1.0 - h_[l][j]);
                    sbar_[j] = hbar_[j] * r1;
                    continue;
                }
                double sb = hbar_[j] * rho1_[l][j];
                for (std::size_t p = 0; p < d; ++p) {
                    sb += dhbar_[j * d + p] * rho2_[l][j] * ds[j * d + p];
                    dsbar_[j * d + p] = dhbar_[j * d + p] * rho1_[l][j];
                }
                sbar_[j] = sb;
            }

            for (std::size_t j = 0; j < n; ++j) {
                double* gAj = gA + j * m;
                const double sb = sbar_[j];
                for (std::size_t k = 0; k < m; ++k) gAj[k] += sb * hin[k];
                if (dual) {
                    const double* dsbj = dsbar_.data() + j * d;
                    if (l == 1) {
                        // d(input)/dx = identity
                        for (std::size_t p = 0; p < d; ++p) gAj[p] += dsbj[p];
                    } else {
                        for (std::size_t k = 0; k < m; ++k) {
                            double acc = 0.0;
                            for (std::size_t p = 0; p < d; ++p) acc += dsbj[p] * dhin[k * d + p];
                            gAj[k] += acc;
                        }
                    }
                }
                gb[j] += sb;
            }

            if (l == 1) break;
            for (std::size_t k = 0; k < m; ++k) {
                hbar_prev_[k] = 0.0;
                if (dual)
                    for (std::size_t p = 0; p < d; ++p) dhbar_prev_[k * d + p] = 0.0;
            }
            for (std::size_t j = 0; j < n; ++j) {
                const double* row = A + j * m;
                const double sb = sbar_[j];
                for (std::size_t k = 0; k < m; ++k) {
                    hbar_prev_[k] += row[k] * sb;
                    if (dual)
                        for (std::size_t p = 0; p < d; ++p) dhbar_prev_[k * d + p] += row[k] * dsbar_[j * d + p];
                }
            }
            std::swap(hbar_, hbar_prev_);
            if (dual) std::swap(dhbar_, dhbar_prev_);
        }
    }

private:
    void check_input(std::span<const double> x) const {
        if (x.size() != arch_.input_dim()) throw DimensionMismatch("network input", arch_.input_dim(), x.size());
    }

    double output_value() const {
        const std::size_t D = arch_.depth();
        const std::size_t m = arch_.width(D - 1);
        const double* A = params_.theta.data() + arch_.weight_offset(D);
        double u = params_.theta[arch_.bias_offset(D)];
        for (std::size_t k = 0; k < m; ++k) u += A[k] * h_[D - 1][k];
        return u;
    }

    const NetworkArch& arch_;
    const NetworkParams& params_;
    std::vector<std::vector<double>> s_, h_, rho1_, rho2_, ds_, dh_;
    std::vector<double> hbar_, dhbar_, sbar_, dsbar_, hbar_prev_, dhbar_prev_;
    std::vector<double> grad_, x_;
};

/// f_D(x): affine + activation for layers 1..D-1, affine output layer.
inline double forward(const NetworkArch& arch, const NetworkParams& params, std::span<const double> x) {
    NetworkEvaluator ev(arch, params);
    return ev.value(x);
}

inline EvalResult forward_with_input_grad(const NetworkArch& arch, const NetworkParams& params,
                                          std::span<const double> x) {
    NetworkEvaluator ev(arch, params);
    EvalResult r;
    r.value = ev.forward(x);
    r.gradient.assign(ev.gradient().begin(), ev.gradient().end());
    return r;
}

/// A network bound to its weights, usable wherever a scalar field is expected.
/// Holds an evaluator workspace, so one instance must not be shared across threads.
class NetworkField {
public:
    NetworkField(const NetworkArch& arch, const NetworkParams& params)
        : arch_(arch), params_(params), ev_(arch_, params_) {}
    NetworkField(const NetworkField& o) : arch_(o.arch_), params_(o.params_), ev_(arch_, params_) {}
    NetworkField& operator=(const NetworkField&) = delete;

    std::size_t dimension() const { return arch_.input_dim(); }
    double value(std::span<const double> x) const { return ev_.value(x); }
    EvalResult value_and_gradient(std::span<const double> x) const {
        EvalResult r;
        r.value = ev_.forward(x);
        r.gradient.assign(ev_.gradient().begin(), ev_.gradient().end());
        return r;
    }

    const NetworkArch& arch() const { return arch_; }
    const NetworkParams& params() const { return params_; }

private:
    NetworkArch arch_;
    NetworkParams params_;
    mutable NetworkEvaluator ev_;
};

}  // namespace drm
