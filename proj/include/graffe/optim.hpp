#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "graffe/tensor.hpp"

namespace graffe {

enum class OptMode { adam, adamw };

inline std::string to_string(OptMode m) { return m == OptMode::adam ? "adam" : "adamw"; }

inline OptMode opt_mode_from_string(const std::string& s) {
    if (s == "adam" || s == "Adam") return OptMode::adam;
    if (s == "adamw" || s == "AdamW") return OptMode::adamw;
    throw ConfigError("unknown optimizer mode: " + s);
}

struct OptimizerConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    OptMode mode = OptMode::adam;
};

struct StepResult {
    bool applied = true;
    std::string note;
};

/// cosine annealing: lr_min + 0.5*(lr_max - lr_min)*(1 + cos(pi*step/total)).
inline double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min) {
    if (total <= 0) throw ConfigError("cosine_lr: total must be positive");
    if (step < 0 || step > total)
        throw ConfigError("cosine_lr: step " + std::to_string(step) + " outside [0, " + std::to_string(total) + "]");
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) / static_cast<double>(total)));
}

/// Adam / AdamW over a fixed parameter list. Moments mirror parameter shapes;
/// the step count advances only on applied steps.
template <class T>
class Optimizer {
public:
    Optimizer(std::vector<Tensor<T>> params, OptimizerConfig cfg = {})
        : cfg_(cfg), params_(std::move(params)) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(params_[i].values().size(), T(0));
            v_[i].assign(params_[i].values().size(), T(0));
        }
    }

    const OptimizerConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return step_count_; }
    const std::vector<Tensor<T>>& params() const { return params_; }

    /// One update; validates all gradients first. Any non-finite gradient
    /// skips the whole step and reports which parameter tripped.
    StepResult step(double lr) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (!params_[i].has_grad())
                throw AutodiffError("optimizer_step: parameter " + std::to_string(i) + " has no gradient");
            for (T g : params_[i].grad_view())
                if (!std::isfinite(static_cast<double>(g)))
                    return {false, "non-finite gradient in parameter " + std::to_string(i) + "; step skipped"};
        }
        ++step_count_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].values();
            const auto& gr = params_[i].grad_view();
            auto& m = m_[i];
            auto& v = v_[i];
            for (std::size_t j = 0; j < p.size(); ++j) {
                double g = static_cast<double>(gr[j]);
                if (cfg_.mode == OptMode::adam && cfg_.weight_decay != 0.0)
                    g += cfg_.weight_decay * static_cast<double>(p[j]);
                double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * g;
                double vj = cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * g * g;
                m[j] = static_cast<T>(mj);
                v[j] = static_cast<T>(vj);
                double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
                if (cfg_.mode == OptMode::adamw && cfg_.weight_decay != 0.0)
                    update += cfg_.weight_decay * static_cast<double>(p[j]);
                p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * update);
            }
        }
        return {};
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    // Serialization access for checkpoints.
    std::vector<std::vector<T>>& first_moments() { return m_; }
    std::vector<std::vector<T>>& second_moments() { return v_; }
    std::int64_t& mutable_step_count() { return step_count_; }

private:
    OptimizerConfig cfg_;
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    std::int64_t step_count_ = 0;
};

/// Euclidean norm of all gradients in the list.
template <class T>
double global_grad_norm(const std::vector<Tensor<T>>& params) {
    double acc = 0.0;
    for (const auto& p : params) {
        if (!p.has_grad()) continue;
        for (T g : p.grad_view()) acc += static_cast<double>(g) * static_cast<double>(g);
    }
    return std::sqrt(acc);
}

/// Scales gradients in place so the global norm does not exceed max_norm.
template <class T>
double clip_global_grad_norm(std::vector<Tensor<T>>& params, double max_norm) {
    double norm = global_grad_norm(params);
    if (norm > max_norm && norm > 0.0) {
        const T s = static_cast<T>(max_norm / norm);
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (auto& g : p.grad()) g *= s;
        }
    }
    return norm;
}

}  // namespace graffe
