#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "graffe/config.hpp"
#include "graffe/diffusion.hpp"
#include "graffe/nn.hpp"
#include "graffe/optim.hpp"
#include "graffe/rng.hpp"

namespace graffe {

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature (weight exp(-u^2))
// ---------------------------------------------------------------------------

struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;  // sum to sqrt(pi)
};

/// Golub-Welsch on the Hermite Jacobi matrix; cached per order.
inline const GaussHermite& gauss_hermite(int order) {
    static std::map<int, GaussHermite> cache;
    auto it = cache.find(order);
    if (it != cache.end()) return it->second;
    Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
    for (int i = 1; i < order; ++i) {
        double b = std::sqrt(static_cast<double>(i) / 2.0);
        jacobi(i, i - 1) = b;
        jacobi(i - 1, i) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
    GaussHermite gh;
    gh.nodes.resize(static_cast<std::size_t>(order));
    gh.weights.resize(static_cast<std::size_t>(order));
    const double sqrt_pi = std::sqrt(3.14159265358979323846);
    for (int i = 0; i < order; ++i) {
        gh.nodes[static_cast<std::size_t>(i)] = solver.eigenvalues()(i);
        double v0 = solver.eigenvectors()(0, i);
        gh.weights[static_cast<std::size_t>(i)] = sqrt_pi * v0 * v0;
    }
    return cache.emplace(order, std::move(gh)).first->second;
}

/// E[f(eps)] for eps ~ N(0, I_d) via a tensor-product Gauss-Hermite grid.
inline double gauss_expectation(int dim, int order, const std::function<double(const double*)>& f) {
    const GaussHermite& gh = gauss_hermite(order);
    const double norm = std::pow(std::sqrt(3.14159265358979323846), -dim);
    const double sqrt2 = std::sqrt(2.0);
    std::vector<int> idx(static_cast<std::size_t>(dim), 0);
    std::vector<double> eps(static_cast<std::size_t>(dim), 0.0);
    double total = 0.0;
    while (true) {
        double w = 1.0;
        for (int k = 0; k < dim; ++k) {
            w *= gh.weights[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
            eps[static_cast<std::size_t>(k)] = sqrt2 * gh.nodes[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
        }
        total += w * f(eps.data());
        int k = 0;
        for (; k < dim; ++k) {
            if (++idx[static_cast<std::size_t>(k)] < order) break;
            idx[static_cast<std::size_t>(k)] = 0;
        }
        if (k == dim) break;
    }
    return total * norm;
}

// ---------------------------------------------------------------------------
// toys
// ---------------------------------------------------------------------------

/// Discrete clean-data distribution on k support points in up to three
/// dimensions, with an arbitrary feature map on the support (the feature's
/// preimage cells are what conditioning restricts to).
struct DiscreteToy {
    std::int64_t d = 1;
    std::int64_t k = 2;
    std::vector<double> points;         // k x d
    std::vector<double> probs;          // k, positive, sums to one
    std::vector<std::int64_t> feature;  // k, cell index of E_phi(x_i)

    const double* point(std::int64_t i) const { return points.data() + i * d; }

    void validate() const {
        if (d < 1 || d > 3) throw ConfigError("toy: dimension must be 1..3");
        if (k < 1 || k > 16) throw ConfigError("toy: support size must be 1..16");
        if (static_cast<std::int64_t>(points.size()) != k * d) throw ConfigError("toy: points size mismatch");
        if (static_cast<std::int64_t>(probs.size()) != k) throw ConfigError("toy: probs size mismatch");
        if (static_cast<std::int64_t>(feature.size()) != k) throw ConfigError("toy: feature size mismatch");
        double sum = 0.0;
        for (double p : probs) {
            if (p <= 0.0) throw ConfigError("toy: probabilities must be positive");
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("toy: probabilities must sum to one");
    }

    std::int64_t cell_count() const {
        std::int64_t mx = 0;
        for (auto c : feature) mx = std::max(mx, c + 1);
        return mx;
    }

    static DiscreteToy random(std::int64_t d, std::int64_t k, std::int64_t cells, RngState& rng) {
        DiscreteToy toy;
        toy.d = d;
        toy.k = k;
        toy.points.resize(static_cast<std::size_t>(k * d));
        for (auto& v : toy.points) v = rng.next_normal();
        toy.probs.resize(static_cast<std::size_t>(k));
        double sum = 0.0;
        for (auto& p : toy.probs) {
            p = 0.2 + rng.next_uniform();
            sum += p;
        }
        for (auto& p : toy.probs) p /= sum;
        // exact renormalization so the 1e-12 invariant holds
        double resum = 0.0;
        for (std::size_t i = 0; i + 1 < toy.probs.size(); ++i) resum += toy.probs[i];
        toy.probs.back() = 1.0 - resum;
        toy.feature.resize(static_cast<std::size_t>(k));
        for (auto& c : toy.feature) c = static_cast<std::int64_t>(rng.next_uniform_int(static_cast<std::uint64_t>(cells)));
        toy.feature[0] = 0;  // keep cell ids anchored at zero
        toy.validate();
        return toy;
    }
};

/// (alpha, sigma) pair of one timestep.
struct NoiseLevel {
    double alpha = 1.0;
    double sigma = 0.0;

    static NoiseLevel at(const NoiseSchedule& sched, std::int64_t t) { return {sched.alpha(t), sched.sigma(t)}; }
};

/// Scalar Gaussian instance with closed forms: x0 ~ N(0, v), feature
/// y = x0 + eta with eta ~ N(0, s2), x_t = alpha x0 + sigma eps.
struct GaussianToy {
    double prior_var = 1.0;
    double feature_noise_var = 1.0;
    double alpha = 0.5;
    double sigma = 0.8660254037844386;
};

// ---------------------------------------------------------------------------
// posterior statistics
// ---------------------------------------------------------------------------

struct Posterior {
    std::vector<double> weights;  // k
    std::vector<double> mean;     // d
    std::vector<double> cov;      // d x d
    double trace_cov = 0.0;
};

/// Exact posterior over the toy support given x_t, restricted to support
/// points where `allowed` is true (all points when empty). Log-sum-exp keeps
/// far-from-support queries from underflowing.
inline Posterior posterior_stats(const DiscreteToy& toy, const NoiseLevel& lvl, const double* x_t,
                                 const std::vector<bool>& allowed = {}) {
    const std::int64_t k = toy.k, d = toy.d;
    std::vector<double> logw(static_cast<std::size_t>(k), -std::numeric_limits<double>::infinity());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::int64_t i = 0; i < k; ++i) {
        if (!allowed.empty() && !allowed[static_cast<std::size_t>(i)]) continue;
        double sq = 0.0;
        for (std::int64_t j = 0; j < d; ++j) {
            double c = x_t[j] - lvl.alpha * toy.point(i)[j];
            sq += c * c;
        }
        logw[static_cast<std::size_t>(i)] = std::log(toy.probs[static_cast<std::size_t>(i)]) - sq / (2.0 * lvl.sigma * lvl.sigma);
        mx = std::max(mx, logw[static_cast<std::size_t>(i)]);
    }
    Posterior post;
    post.weights.assign(static_cast<std::size_t>(k), 0.0);
    double z = 0.0;
    for (std::int64_t i = 0; i < k; ++i) {
        if (std::isinf(logw[static_cast<std::size_t>(i)])) continue;
        double w = std::exp(logw[static_cast<std::size_t>(i)] - mx);
        post.weights[static_cast<std::size_t>(i)] = w;
        z += w;
    }
    for (auto& w : post.weights) w /= z;
    post.mean.assign(static_cast<std::size_t>(d), 0.0);
    for (std::int64_t i = 0; i < k; ++i)
        for (std::int64_t j = 0; j < d; ++j)
            post.mean[static_cast<std::size_t>(j)] += post.weights[static_cast<std::size_t>(i)] * toy.point(i)[j];
    post.cov.assign(static_cast<std::size_t>(d * d), 0.0);
    for (std::int64_t i = 0; i < k; ++i) {
        double w = post.weights[static_cast<std::size_t>(i)];
        if (w == 0.0) continue;
        for (std::int64_t a = 0; a < d; ++a)
            for (std::int64_t b = 0; b < d; ++b)
                post.cov[static_cast<std::size_t>(a * d + b)] +=
                    w * (toy.point(i)[a] - post.mean[static_cast<std::size_t>(a)]) *
                    (toy.point(i)[b] - post.mean[static_cast<std::size_t>(b)]);
    }
    for (std::int64_t a = 0; a < d; ++a) post.trace_cov += post.cov[static_cast<std::size_t>(a * d + a)];
    return post;
}

// ---------------------------------------------------------------------------
// oracle: minimum achievable denoising loss
// ---------------------------------------------------------------------------

struct QuadratureControl {
    int order = 64;
    int max_order = 256;
    double rel_tol = 1e-6;
    // Values below this scale converge by absolute difference instead
    // (rel_tol * abs_scale, i.e. 1e-10); a vanishing integral has no
    // meaningful relative error.
    double abs_scale = 1e-4;
};

class QuadratureError : public Error {
public:
    explicit QuadratureError(const std::string& msg) : Error(msg) {}
};

namespace theory_detail {

/// E over (x0, x_t) of the posterior covariance trace, with the posterior
/// optionally restricted to the feature cell of the drawn x0.
inline double expected_trace_cov(const DiscreteToy& toy, const NoiseLevel& lvl, bool conditioned, int order) {
    double total = 0.0;
    std::vector<bool> allowed;
    for (std::int64_t i = 0; i < toy.k; ++i) {
        if (conditioned) {
            allowed.assign(static_cast<std::size_t>(toy.k), false);
            for (std::int64_t j = 0; j < toy.k; ++j)
                if (toy.feature[static_cast<std::size_t>(j)] == toy.feature[static_cast<std::size_t>(i)])
                    allowed[static_cast<std::size_t>(j)] = true;
        }
        const double* xi = toy.point(i);
        double term = gauss_expectation(static_cast<int>(toy.d), order, [&](const double* eps) {
            double x_t[3];
            for (std::int64_t j = 0; j < toy.d; ++j) x_t[j] = lvl.alpha * xi[j] + lvl.sigma * eps[j];
            return posterior_stats(toy, lvl, x_t, allowed).trace_cov;
        });
        total += toy.probs[static_cast<std::size_t>(i)] * term;
    }
    return total;
}

}  // namespace theory_detail

/// Minimum of the denoising objective at one noise level: the expected
/// posterior covariance trace, computed by Gauss-Hermite quadrature with
/// order escalation. error_estimate (when requested) is the relative
/// difference between the last two orders.
inline double min_dsm_oracle(const DiscreteToy& toy, const NoiseLevel& lvl, bool conditioned,
                             QuadratureControl ctl = {}, double* error_estimate = nullptr) {
    toy.validate();
    auto rel_change = [&ctl](double cur, double prev) {
        return std::abs(cur - prev) / std::max(std::abs(cur), ctl.abs_scale);
    };
    double prev = theory_detail::expected_trace_cov(toy, lvl, conditioned, ctl.order / 2);
    double cur = theory_detail::expected_trace_cov(toy, lvl, conditioned, ctl.order);
    double rel = rel_change(cur, prev);
    int order = ctl.order;
    while (rel > ctl.rel_tol && order < ctl.max_order) {
        order *= 2;
        prev = cur;
        cur = theory_detail::expected_trace_cov(toy, lvl, conditioned, order);
        rel = rel_change(cur, prev);
    }
    if (rel > ctl.rel_tol)
        throw QuadratureError("min_dsm_oracle did not converge at order " + std::to_string(order) +
                              " (relative change " + std::to_string(rel) + ")");
    if (error_estimate) *error_estimate = rel;
    return cur;
}

/// Monte-Carlo estimate of the denoising loss of an arbitrary predictor,
/// together with its standard error.
struct McLoss {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Predictor evaluated on a whole block of queries at once.
using BatchPredictor = std::function<void(const double* x_t, std::int64_t rows, double* out)>;

inline McLoss mc_dsm_loss_batch(const DiscreteToy& toy, const NoiseLevel& lvl, const BatchPredictor& predictor,
                                std::int64_t samples, RngState& rng, std::int64_t block = 8192) {
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> xt, x0, pred;
    for (std::int64_t done = 0; done < samples;) {
        std::int64_t rows = std::min(block, samples - done);
        xt.resize(static_cast<std::size_t>(rows * toy.d));
        x0.resize(static_cast<std::size_t>(rows * toy.d));
        pred.resize(static_cast<std::size_t>(rows * toy.d));
        for (std::int64_t r = 0; r < rows; ++r) {
            double u = rng.next_uniform();
            std::int64_t i = 0;
            double acc = toy.probs[0];
            while (i + 1 < toy.k && u > acc) acc += toy.probs[static_cast<std::size_t>(++i)];
            for (std::int64_t j = 0; j < toy.d; ++j) {
                x0[static_cast<std::size_t>(r * toy.d + j)] = toy.point(i)[j];
                xt[static_cast<std::size_t>(r * toy.d + j)] = lvl.alpha * toy.point(i)[j] + lvl.sigma * rng.next_normal();
            }
        }
        predictor(xt.data(), rows, pred.data());
        for (std::int64_t r = 0; r < rows; ++r) {
            double sq = 0.0;
            for (std::int64_t j = 0; j < toy.d; ++j) {
                double c = pred[static_cast<std::size_t>(r * toy.d + j)] - x0[static_cast<std::size_t>(r * toy.d + j)];
                sq += c * c;
            }
            sum += sq;
            sumsq += sq * sq;
        }
        done += rows;
    }
    McLoss out;
    out.mean = sum / static_cast<double>(samples);
    double var = sumsq / static_cast<double>(samples) - out.mean * out.mean;
    out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
    return out;
}

inline McLoss mc_dsm_loss(const DiscreteToy& toy, const NoiseLevel& lvl,
                          const std::function<void(const double*, double*)>& predictor, std::int64_t samples,
                          RngState& rng) {
    double sum = 0.0, sumsq = 0.0;
    double x_t[3], pred[3];
    for (std::int64_t s = 0; s < samples; ++s) {
        double u = rng.next_uniform();
        std::int64_t i = 0;
        double acc = toy.probs[0];
        while (i + 1 < toy.k && u > acc) acc += toy.probs[static_cast<std::size_t>(++i)];
        const double* xi = toy.point(i);
        for (std::int64_t j = 0; j < toy.d; ++j) x_t[j] = lvl.alpha * xi[j] + lvl.sigma * rng.next_normal();
        predictor(x_t, pred);
        double sq = 0.0;
        for (std::int64_t j = 0; j < toy.d; ++j) {
            double c = pred[j] - xi[j];
            sq += c * c;
        }
        sum += sq;
        sumsq += sq * sq;
    }
    McLoss out;
    out.mean = sum / static_cast<double>(samples);
    double var = sumsq / static_cast<double>(samples) - out.mean * out.mean;
    out.std_error = std::sqrt(std::max(var, 0.0) / static_cast<double>(samples));
    return out;
}

// ---------------------------------------------------------------------------
// reports
// ---------------------------------------------------------------------------

/// One verified inequality: pass iff slack >= -tolerance.
struct BoundReport {
    std::string name;
    double left = 0.0;
    double right = 0.0;
    double slack = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string method;
    double error_estimate = 0.0;

    Json to_json() const {
        return Json{{"name", name},           {"left", left},
                    {"right", right},         {"slack", slack},
                    {"tolerance", tolerance}, {"pass", pass},
                    {"method", method},       {"error_estimate", error_estimate}};
    }
};

/// Minimum-loss identity: a predictor's loss never undercuts the oracle, and
/// the analytic posterior mean achieves it. left = achieved loss,
/// right = oracle, slack = left - right.
inline BoundReport check_theorem1_batch(const DiscreteToy& toy, const NoiseLevel& lvl,
                                        const BatchPredictor& predictor, bool expect_optimal,
                                        std::int64_t mc_samples, RngState& rng) {
    BoundReport rep;
    rep.name = "theorem1";
    double quad_err = 0.0;
    rep.right = min_dsm_oracle(toy, lvl, false, {}, &quad_err);
    McLoss mc = mc_dsm_loss_batch(toy, lvl, predictor, mc_samples, rng);
    rep.left = mc.mean;
    rep.slack = rep.left - rep.right;
    rep.error_estimate = mc.std_error + quad_err * std::abs(rep.right);
    rep.tolerance = 0.01 * std::abs(rep.right);
    if (expect_optimal) {
        rep.pass = std::abs(rep.slack) <= rep.tolerance + 3.0 * mc.std_error;
        rep.method = "quadrature-oracle vs monte-carlo loss of the analytic posterior mean";
    } else {
        rep.pass = rep.slack >= -(rep.tolerance + 3.0 * mc.std_error);
        rep.method = "quadrature-oracle lower bound vs monte-carlo loss";
    }
    return rep;
}

inline BoundReport check_theorem1(const DiscreteToy& toy, const NoiseLevel& lvl,
                                  const std::function<void(const double*, double*)>& predictor,
                                  bool expect_optimal, std::int64_t mc_samples, RngState& rng) {
    BoundReport rep;
    rep.name = "theorem1";
    double quad_err = 0.0;
    rep.right = min_dsm_oracle(toy, lvl, false, {}, &quad_err);
    McLoss mc = mc_dsm_loss(toy, lvl, predictor, mc_samples, rng);
    rep.left = mc.mean;
    rep.slack = rep.left - rep.right;
    rep.error_estimate = mc.std_error + quad_err * std::abs(rep.right);
    rep.tolerance = 0.01 * std::abs(rep.right);
    if (expect_optimal) {
        rep.pass = std::abs(rep.slack) <= rep.tolerance + 3.0 * mc.std_error;
        rep.method = "quadrature-oracle vs monte-carlo loss of the analytic posterior mean";
    } else {
        rep.pass = rep.slack >= -(rep.tolerance + 3.0 * mc.std_error);
        rep.method = "quadrature-oracle lower bound vs monte-carlo loss";
    }
    return rep;
}

/// Conditioning never raises the minimum: conditioned oracle <= unconditioned.
/// left = conditioned, right = unconditioned, slack = right - left. Both
/// integrals are evaluated on the same escalating quadrature grid so their
/// shared smooth part cancels exactly in the slack.
inline BoundReport check_theorem2(const DiscreteToy& toy, const NoiseLevel& lvl, double tolerance = 1e-10,
                                  QuadratureControl ctl = {}) {
    toy.validate();
    BoundReport rep;
    rep.name = "theorem2";
    auto rel_change = [&ctl](double cur, double prev) {
        return std::abs(cur - prev) / std::max(std::abs(cur), ctl.abs_scale);
    };
    int order = ctl.order;
    double c_prev = theory_detail::expected_trace_cov(toy, lvl, true, ctl.order / 2);
    double u_prev = theory_detail::expected_trace_cov(toy, lvl, false, ctl.order / 2);
    double c_cur = theory_detail::expected_trace_cov(toy, lvl, true, order);
    double u_cur = theory_detail::expected_trace_cov(toy, lvl, false, order);
    while ((rel_change(c_cur, c_prev) > ctl.rel_tol || rel_change(u_cur, u_prev) > ctl.rel_tol) &&
           order < ctl.max_order) {
        order *= 2;
        c_prev = c_cur;
        u_prev = u_cur;
        c_cur = theory_detail::expected_trace_cov(toy, lvl, true, order);
        u_cur = theory_detail::expected_trace_cov(toy, lvl, false, order);
    }
    double rel = std::max(rel_change(c_cur, c_prev), rel_change(u_cur, u_prev));
    if (rel > ctl.rel_tol)
        throw QuadratureError("check_theorem2 did not converge at order " + std::to_string(order));
    rep.left = c_cur;
    rep.right = u_cur;
    rep.slack = rep.right - rep.left;
    rep.tolerance = tolerance;
    rep.pass = rep.slack >= -tolerance;
    rep.error_estimate = rel * std::max(std::abs(rep.right), ctl.abs_scale);
    rep.method = "preimage-cell quadrature on a shared grid, order " + std::to_string(order);
    return rep;
}

/// Maximum-entropy bound: Gaussian entropy at fixed covariance trace never
/// exceeds the isotropic value, with equality only at (trace/n) I.
/// The candidate covariance arrives as a dense n x n SPD matrix.
inline BoundReport check_lemma3(double trace, std::int64_t n, const std::vector<double>& cov,
                                double tolerance = 1e-9) {
    BoundReport rep;
    rep.name = "lemma3";
    Eigen::Map<const Eigen::MatrixXd> sigma(cov.data(), n, n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
    double log_det = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
        double ev = solver.eigenvalues()(i);
        if (ev <= 0.0) throw ConfigError("lemma3: candidate covariance is not positive definite");
        log_det += std::log(ev);
    }
    const double two_pi = 2.0 * 3.14159265358979323846;
    rep.left = 0.5 * (static_cast<double>(n) + static_cast<double>(n) * std::log(two_pi) + log_det);
    rep.right = 0.5 * static_cast<double>(n) * (1.0 + std::log(two_pi * trace / static_cast<double>(n)));
    rep.slack = rep.right - rep.left;
    rep.tolerance = tolerance;
    rep.pass = rep.slack >= -tolerance;
    rep.method = "closed-form Gaussian entropy vs isotropic maximum";
    return rep;
}

namespace theory_detail {

inline double cond_var_given_xt(const GaussianToy& g) {
    return g.prior_var * g.sigma * g.sigma / (g.alpha * g.alpha * g.prior_var + g.sigma * g.sigma);
}

inline double cond_var_given_xt_y(const GaussianToy& g) {
    return 1.0 / (1.0 / g.prior_var + g.alpha * g.alpha / (g.sigma * g.sigma) + 1.0 / g.feature_noise_var);
}

}  // namespace theory_detail

/// Conditional-information bound in its closed-form scalar Gaussian instance.
/// left = I(x0; y | x_t); right = -log(minimal loss) + log(1/(2 pi e)) +
/// log(2 pi e Var[x0|x_t]). With the optimal predictor the right side equals
/// exactly twice the conditional information, so slack = right - left equals
/// the conditional information itself and its non-negativity is the bound.
inline BoundReport check_theorem3(const GaussianToy& g, double tolerance = 1e-9) {
    BoundReport rep;
    rep.name = "theorem3";
    const double v1 = theory_detail::cond_var_given_xt(g);
    const double v2 = theory_detail::cond_var_given_xt_y(g);
    const double info = 0.5 * std::log(v1 / v2);
    const double min_loss = v2;
    const double two_pi_e = 2.0 * 3.14159265358979323846 * std::exp(1.0);
    rep.left = info;
    rep.right = -std::log(min_loss) + std::log(1.0 / two_pi_e) + std::log(two_pi_e * v1);
    rep.slack = rep.right - rep.left;
    rep.tolerance = tolerance;
    // the slack must be the conditional mutual information (identity) and
    // non-negative (the bound)
    rep.pass = rep.slack >= -tolerance && std::abs(rep.slack - info) <= tolerance;
    rep.error_estimate = std::abs(rep.slack - info);
    rep.method = "closed-form Gaussian conditional information";
    return rep;
}

/// At the pure-noise endpoint the conditional information equals the
/// unconditional information: x_T carries nothing about x0.
inline BoundReport check_remark(double prior_var, double feature_noise_var, double alpha_end,
                                double tolerance) {
    BoundReport rep;
    rep.name = "remark";
    GaussianToy g;
    g.prior_var = prior_var;
    g.feature_noise_var = feature_noise_var;
    g.alpha = alpha_end;
    g.sigma = std::sqrt(1.0 - alpha_end * alpha_end);
    const double v1 = theory_detail::cond_var_given_xt(g);
    const double v2 = theory_detail::cond_var_given_xt_y(g);
    rep.left = 0.5 * std::log(v1 / v2);                                  // I(x0; y | x_T)
    rep.right = 0.5 * std::log(1.0 + prior_var / feature_noise_var);     // I(x0; y)
    rep.slack = rep.left - rep.right;
    rep.tolerance = tolerance;
    rep.pass = std::abs(rep.slack) <= tolerance;
    rep.method = "closed-form Gaussian information at the noise endpoint";
    return rep;
}

// ---------------------------------------------------------------------------
// trained-predictor utility for the theorem-1 check
// ---------------------------------------------------------------------------

/// Small dense net trained to predict x0 from x_t at one noise level.
class ToyDenoiser {
public:
    ToyDenoiser(std::int64_t dim, std::int64_t width, RngState& rng)
        : dim_(dim), l1_(dim, width, rng), l2_(width, width, rng), l3_(width, dim, rng) {}

    Tensor<double> forward(const Tensor<double>& x) const {
        return l3_.forward(tanh_op(l2_.forward(tanh_op(l1_.forward(x)))));
    }

    std::vector<Tensor<double>> params() const { return {l1_.w, l1_.b, l2_.w, l2_.b, l3_.w, l3_.b}; }

    /// Adam with a cosine-decayed rate from `lr` down to lr/100.
    void train(const DiscreteToy& toy, const NoiseLevel& lvl, std::int64_t steps, std::int64_t batch,
               double lr, RngState& rng) {
        Optimizer<double> opt(params());
        for (std::int64_t s = 0; s < steps; ++s) {
            double step_lr = cosine_lr(s, steps, lr, lr * 1e-2);
            std::vector<double> xt(static_cast<std::size_t>(batch * toy.d));
            std::vector<double> x0(static_cast<std::size_t>(batch * toy.d));
            for (std::int64_t b = 0; b < batch; ++b) {
                double u = rng.next_uniform();
                std::int64_t i = 0;
                double acc = toy.probs[0];
                while (i + 1 < toy.k && u > acc) acc += toy.probs[static_cast<std::size_t>(++i)];
                for (std::int64_t j = 0; j < toy.d; ++j) {
                    x0[static_cast<std::size_t>(b * toy.d + j)] = toy.point(i)[j];
                    xt[static_cast<std::size_t>(b * toy.d + j)] =
                        lvl.alpha * toy.point(i)[j] + lvl.sigma * rng.next_normal();
                }
            }
            auto ps = params();
            for (auto& p : ps) p.zero_grad();
            auto pred = forward(Tensor<double>::from_values({batch, toy.d}, std::move(xt)));
            auto target = Tensor<double>::from_values({batch, toy.d}, std::move(x0));
            // row squared-norm mean matches the oracle's loss convention
            auto loss = weighted_row_sqnorm_mean(pred, target, std::vector<double>(static_cast<std::size_t>(batch), 1.0));
            loss.backward();
            opt.step(step_lr);
        }
    }

    std::function<void(const double*, double*)> as_predictor() const {
        return [this](const double* x_t, double* out) {
            NoGradGuard guard;
            std::vector<double> in(x_t, x_t + dim_);
            auto y = forward(Tensor<double>::from_values({1, dim_}, std::move(in)));
            for (std::int64_t j = 0; j < dim_; ++j) out[j] = y.values()[static_cast<std::size_t>(j)];
        };
    }

    BatchPredictor as_batch_predictor() const {
        return [this](const double* x_t, std::int64_t rows, double* out) {
            NoGradGuard guard;
            std::vector<double> in(x_t, x_t + rows * dim_);
            auto y = forward(Tensor<double>::from_values({rows, dim_}, std::move(in)));
            std::copy(y.values().begin(), y.values().end(), out);
        };
    }

private:
    std::int64_t dim_;
    Linear<double> l1_, l2_, l3_;
};

/// The analytic optimum: posterior mean of the toy given x_t.
inline std::function<void(const double*, double*)> posterior_mean_predictor(const DiscreteToy& toy,
                                                                            const NoiseLevel& lvl) {
    return [&toy, lvl](const double* x_t, double* out) {
        Posterior p = posterior_stats(toy, lvl, x_t);
        for (std::int64_t j = 0; j < toy.d; ++j) out[j] = p.mean[static_cast<std::size_t>(j)];
    };
}

inline BatchPredictor posterior_mean_batch_predictor(const DiscreteToy& toy, const NoiseLevel& lvl) {
    return [&toy, lvl](const double* x_t, std::int64_t rows, double* out) {
        for (std::int64_t r = 0; r < rows; ++r) {
            Posterior p = posterior_stats(toy, lvl, x_t + r * toy.d);
            for (std::int64_t j = 0; j < toy.d; ++j) out[r * toy.d + j] = p.mean[static_cast<std::size_t>(j)];
        }
    };
}

}  // namespace graffe
