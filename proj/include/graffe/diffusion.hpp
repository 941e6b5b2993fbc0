#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "graffe/graph.hpp"
#include "graffe/ops.hpp"
#include "graffe/rng.hpp"
#include "graffe/tensor.hpp"

namespace graffe {

enum class ScheduleKind { linear, quad, sigmoid, inverted };

inline std::string to_string(ScheduleKind k) {
    switch (k) {
        case ScheduleKind::linear: return "linear";
        case ScheduleKind::quad: return "quad";
        case ScheduleKind::sigmoid: return "sigmoid";
        case ScheduleKind::inverted: return "inverted";
    }
    return "?";
}

inline ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "quad") return ScheduleKind::quad;
    if (s == "sigmoid") return ScheduleKind::sigmoid;
    if (s == "inverted") return ScheduleKind::inverted;
    throw ConfigError("unknown noise schedule kind: " + s);
}

/// Discrete variance-preserving schedule: alpha_t^2 + sigma_t^2 = 1 with
/// alpha strictly decreasing from a near-clean start (alpha_1 >= 0.999) to a
/// near-pure-noise end (alpha_T <= 0.05).
///
/// Construction (T=1000 is the reference configuration):
///  - linear: beta_t ramps from 1e-4 to beta_max, alpha_bar_t = prod(1-beta_s).
///  - quad:   beta_t = (sqrt(beta_min) + (t-1)/(T-1)*(sqrt(beta_max)-sqrt(beta_min)))^2.
///    For T != 1000 beta_max is rescaled by 1000/T (clamped below 1) so the
///    endpoint bounds hold at every T.
///  - sigmoid: s(tau) = sigmoid(-k*(2*tau-1)), k = 6, affinely anchored so
///    alpha_bar_1 = 1 - 1e-4 and alpha_bar_T = sigmoid(-k)/sigmoid(k).
///  - inverted: the sigmoid curve complement-reversed, 1 - alpha_bar_{T-t+1},
///    rescaled to the same endpoints.
class NoiseSchedule {
public:
    NoiseSchedule(ScheduleKind kind, std::int64_t t_count) : kind_(kind), t_(t_count) {
        if (t_count < 2) throw ConfigError("noise schedule needs T >= 2");
        std::vector<double> abar(static_cast<std::size_t>(t_count));
        const double beta_min = 1e-4;
        const double beta_max = std::min(0.999, 0.02 * 1000.0 / static_cast<double>(t_count));
        switch (kind) {
            case ScheduleKind::linear: {
                double prod = 1.0;
                for (std::int64_t t = 1; t <= t_count; ++t) {
                    double beta = beta_min + (beta_max - beta_min) * static_cast<double>(t - 1) / static_cast<double>(t_count - 1);
                    prod *= 1.0 - beta;
                    abar[static_cast<std::size_t>(t - 1)] = prod;
                }
                break;
            }
            case ScheduleKind::quad: {
                double prod = 1.0;
                const double r0 = std::sqrt(beta_min), r1 = std::sqrt(beta_max);
                for (std::int64_t t = 1; t <= t_count; ++t) {
                    double r = r0 + (r1 - r0) * static_cast<double>(t - 1) / static_cast<double>(t_count - 1);
                    prod *= 1.0 - r * r;
                    abar[static_cast<std::size_t>(t - 1)] = prod;
                }
                break;
            }
            case ScheduleKind::sigmoid: {
                abar = sigmoid_curve(t_count);
                break;
            }
            case ScheduleKind::inverted: {
                std::vector<double> sig = sigmoid_curve(t_count);
                const double hi = sig.front(), lo = sig.back();
                std::vector<double> raw(static_cast<std::size_t>(t_count));
                for (std::int64_t t = 0; t < t_count; ++t)
                    raw[static_cast<std::size_t>(t)] = 1.0 - sig[static_cast<std::size_t>(t_count - 1 - t)];
                const double rhi = raw.front(), rlo = raw.back();
                for (auto& v : raw) v = lo + (hi - lo) * (v - rlo) / (rhi - rlo);
                abar = std::move(raw);
                break;
            }
        }
        alpha_.resize(abar.size());
        sigma_.resize(abar.size());
        for (std::size_t i = 0; i < abar.size(); ++i) {
            alpha_[i] = std::sqrt(abar[i]);
            sigma_[i] = std::sqrt(1.0 - abar[i]);
        }
    }

    ScheduleKind kind() const { return kind_; }
    std::int64_t timesteps() const { return t_; }

    double alpha(std::int64_t t) const { return alpha_[check_t(t)]; }
    double sigma(std::int64_t t) const { return sigma_[check_t(t)]; }
    double alpha_bar(std::int64_t t) const { return alpha_[check_t(t)] * alpha_[check_t(t)]; }

    const std::vector<double>& alphas() const { return alpha_; }
    const std::vector<double>& sigmas() const { return sigma_; }

    /// Drift coefficient of the corresponding SDE, f = d log alpha / dt with
    /// normalized time tau = t/T; central differences inside, one-sided at ends.
    double sde_f(std::int64_t t) const {
        std::size_t i = check_t(t);
        const double dt = 1.0 / static_cast<double>(t_);
        double lo = std::log(alpha_[i > 0 ? i - 1 : i]);
        double hi = std::log(alpha_[i + 1 < alpha_.size() ? i + 1 : i]);
        double span = (i > 0 && i + 1 < alpha_.size()) ? 2.0 * dt : dt;
        return (hi - lo) / span;
    }

    /// Diffusion coefficient squared, g^2 = d(sigma^2)/dt - 2 f sigma^2.
    double sde_g2(std::int64_t t) const {
        std::size_t i = check_t(t);
        const double dt = 1.0 / static_cast<double>(t_);
        double lo = sigma_[i > 0 ? i - 1 : i], hi = sigma_[i + 1 < sigma_.size() ? i + 1 : i];
        double span = (i > 0 && i + 1 < sigma_.size()) ? 2.0 * dt : dt;
        double dsigma2 = (hi * hi - lo * lo) / span;
        return dsigma2 - 2.0 * sde_f(t) * sigma_[i] * sigma_[i];
    }

    void export_csv(const std::filesystem::path& path) const {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        out.precision(17);
        out << "t,alpha,sigma\n";
        for (std::int64_t t = 1; t <= t_; ++t) out << t << ',' << alpha(t) << ',' << sigma(t) << "\n";
    }

private:
    static std::vector<double> sigmoid_curve(std::int64_t t_count) {
        const double k = 6.0;
        auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
        auto s = [&](double tau) { return sig(-k * (2.0 * tau - 1.0)); };
        const double hi = 1.0 - 1e-4;
        const double lo = sig(-k) / sig(k);
        const double s1 = s(1.0 / static_cast<double>(t_count)), sT = s(1.0);
        std::vector<double> abar(static_cast<std::size_t>(t_count));
        for (std::int64_t t = 1; t <= t_count; ++t) {
            double v = s(static_cast<double>(t) / static_cast<double>(t_count));
            abar[static_cast<std::size_t>(t - 1)] = lo + (hi - lo) * (v - sT) / (s1 - sT);
        }
        return abar;
    }

    std::size_t check_t(std::int64_t t) const {
        if (t < 1 || t > t_)
            throw ConfigError("timestep " + std::to_string(t) + " outside [1, " + std::to_string(t_) + "]");
        return static_cast<std::size_t>(t - 1);
    }

    ScheduleKind kind_;
    std::int64_t t_;
    std::vector<double> alpha_, sigma_;
};

// ---------------------------------------------------------------------------
// timestep sampling
// ---------------------------------------------------------------------------

/// Independent uniform draw on {1..T} per node.
inline std::vector<std::int64_t> sample_timesteps_per_node(const NoiseSchedule& sched, std::int64_t n,
                                                           RngState& rng) {
    std::vector<std::int64_t> t(static_cast<std::size_t>(n));
    for (auto& v : t) v = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(sched.timesteps()))) + 1;
    return t;
}

/// One uniform draw per graph, broadcast to that graph's nodes.
inline std::vector<std::int64_t> sample_timesteps_per_graph(const NoiseSchedule& sched, const GraphBatch& batch,
                                                            RngState& rng) {
    std::vector<std::int64_t> t(static_cast<std::size_t>(batch.merged.n));
    for (std::int64_t g = 0; g < batch.graph_count(); ++g) {
        std::int64_t draw = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(sched.timesteps()))) + 1;
        for (std::int64_t v = batch.offsets[static_cast<std::size_t>(g)]; v < batch.offsets[static_cast<std::size_t>(g + 1)]; ++v)
            t[static_cast<std::size_t>(v)] = draw;
    }
    return t;
}

// ---------------------------------------------------------------------------
// forward noising
// ---------------------------------------------------------------------------

/// x_t = alpha_t * x0 + sigma_t * eps, reconstructible from its parts.
template <class T>
struct NoisySample {
    std::vector<T> xt;
    std::vector<T> eps;
    std::vector<std::int64_t> t;  // per row
};

template <class T>
NoisySample<T> noise_with_eps(const std::vector<T>& x0, std::int64_t n, std::int64_t d,
                              const std::vector<std::int64_t>& t, const NoiseSchedule& sched,
                              std::vector<T> eps) {
    if (static_cast<std::int64_t>(t.size()) != n) throw ShapeError("noise", "timestep vector length must equal rows");
    if (eps.size() != x0.size()) throw ShapeError("noise", "eps size must match x0");
    NoisySample<T> out;
    out.t = t;
    out.eps = std::move(eps);
    out.xt.resize(x0.size());
    for (std::int64_t i = 0; i < n; ++i) {
        const T a = static_cast<T>(sched.alpha(t[static_cast<std::size_t>(i)]));
        const T s = static_cast<T>(sched.sigma(t[static_cast<std::size_t>(i)]));
        for (std::int64_t j = 0; j < d; ++j) {
            std::size_t idx = static_cast<std::size_t>(i * d + j);
            out.xt[idx] = a * x0[idx] + s * out.eps[idx];
        }
    }
    return out;
}

template <class T>
NoisySample<T> noise(const std::vector<T>& x0, std::int64_t n, std::int64_t d,
                     const std::vector<std::int64_t>& t, const NoiseSchedule& sched, RngState& rng) {
    std::vector<T> eps(x0.size());
    for (auto& e : eps) e = static_cast<T>(rng.next_normal());
    return noise_with_eps(x0, n, d, t, sched, std::move(eps));
}

// ---------------------------------------------------------------------------
// data-prediction loss
// ---------------------------------------------------------------------------

/// Optional per-timestep weighting; empty table means lambda(t) = 1.
struct LambdaTable {
    std::vector<double> values;  // size T when non-empty

    double at(std::int64_t t) const {
        if (values.empty()) return 1.0;
        return values[static_cast<std::size_t>(t - 1)];
    }
};

/// Mean over node rows of lambda(t_i) * ||pred_i - x0_i||^2, on the tape.
template <class T>
Tensor<T> dsm_loss(const Tensor<T>& pred, const Tensor<T>& x0, const std::vector<std::int64_t>& t,
                   const LambdaTable& lambda = {}) {
    if (pred.shape() != x0.shape()) throw ShapeError("dsm_loss", pred.shape(), x0.shape());
    if (static_cast<std::int64_t>(t.size()) != pred.rows())
        throw ShapeError("dsm_loss", "timestep vector length must equal rows");
    std::vector<T> w(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) w[i] = static_cast<T>(lambda.at(t[i]));
    return weighted_row_sqnorm_mean(pred, x0, std::move(w));
}

/// Value-only variant used by evaluation code paths.
template <class T>
double dsm_loss_value(const std::vector<T>& pred, const std::vector<T>& x0, std::int64_t n, std::int64_t d,
                      const std::vector<std::int64_t>& t, const LambdaTable& lambda = {}) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            double dlt = static_cast<double>(pred[static_cast<std::size_t>(i * d + j)]) -
                         static_cast<double>(x0[static_cast<std::size_t>(i * d + j)]);
            row += dlt * dlt;
        }
        acc += lambda.at(t[static_cast<std::size_t>(i)]) * row;
    }
    return acc / static_cast<double>(n);
}

}  // namespace graffe
