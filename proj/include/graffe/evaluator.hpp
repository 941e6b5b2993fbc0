#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "graffe/config.hpp"
#include "graffe/graph.hpp"
#include "graffe/ops.hpp"
#include "graffe/rng.hpp"

namespace graffe {

/// Accuracy summary over probe repetitions; mean and std are always
/// recomputable from the per-run list.
struct ProbeReport {
    double mean = 0.0;    // percent
    double stddev = 0.0;  // percent, population convention
    std::vector<double> runs;
    Json hyper = Json::object();
    std::string checkpoint_id;

    static ProbeReport from_runs(std::vector<double> runs_in) {
        ProbeReport r;
        r.runs = std::move(runs_in);
        if (r.runs.empty()) return r;
        double s = 0.0;
        for (double v : r.runs) s += v;
        r.mean = s / static_cast<double>(r.runs.size());
        double var = 0.0;
        for (double v : r.runs) var += (v - r.mean) * (v - r.mean);
        r.stddev = std::sqrt(var / static_cast<double>(r.runs.size()));
        return r;
    }

    Json to_json() const {
        return Json{{"mean", mean}, {"std", stddev}, {"runs", runs}, {"config", hyper}, {"checkpoint", checkpoint_id}};
    }

    /// Single line for sweep aggregation: checkpoint,mean,std,n_runs.
    std::string to_csv_row() const {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%zu", checkpoint_id.c_str(), mean, stddev, runs.size());
        return std::string(buf);
    }
};

struct ProbeOptions {
    std::vector<double> l2_grid{1e-4, 1e-3, 1e-2, 1e-1};
    std::int64_t steps = 800;
    double lr = 0.2;
};

namespace probe_detail {

/// Per-column standardization fitted on a row subset, applied to all rows.
inline std::vector<double> standardize_columns(const std::vector<double>& x, std::int64_t n, std::int64_t d,
                                               const std::vector<std::int64_t>& fit_rows) {
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0), sd(static_cast<std::size_t>(d), 0.0);
    for (auto r : fit_rows)
        for (std::int64_t j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += x[static_cast<std::size_t>(r * d + j)];
    for (auto& m : mean) m /= static_cast<double>(fit_rows.size());
    for (auto r : fit_rows)
        for (std::int64_t j = 0; j < d; ++j) {
            double c = x[static_cast<std::size_t>(r * d + j)] - mean[static_cast<std::size_t>(j)];
            sd[static_cast<std::size_t>(j)] += c * c;
        }
    for (auto& v : sd) v = std::sqrt(v / static_cast<double>(fit_rows.size()) + 1e-8);
    std::vector<double> out(x.size());
    for (std::int64_t r = 0; r < n; ++r)
        for (std::int64_t j = 0; j < d; ++j)
            out[static_cast<std::size_t>(r * d + j)] =
                (x[static_cast<std::size_t>(r * d + j)] - mean[static_cast<std::size_t>(j)]) / sd[static_cast<std::size_t>(j)];
    return out;
}

inline std::vector<double> gather(const std::vector<double>& x, std::int64_t d,
                                  const std::vector<std::int64_t>& rows) {
    std::vector<double> out(rows.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy(x.begin() + rows[i] * d, x.begin() + (rows[i] + 1) * d, out.begin() + static_cast<std::int64_t>(i) * d);
    return out;
}

struct LogisticFit {
    Tensor<double> w, b;  // (d x C), (C)
};

/// Multinomial logistic regression: single linear map, softmax cross
/// entropy, full-batch gradient descent with an L2 penalty on the weights.
inline LogisticFit fit_logistic(const std::vector<double>& x_train, std::int64_t n, std::int64_t d,
                                const std::vector<std::int64_t>& y_train, std::int64_t classes, double l2,
                                std::uint64_t seed, const ProbeOptions& opt) {
    RngState rng(RngState(seed).split(0x70726f6265ULL));
    std::vector<double> w0(static_cast<std::size_t>(d * classes));
    for (auto& v : w0) v = 0.01 * rng.next_normal();
    LogisticFit fit;
    fit.w = Tensor<double>::parameter({d, classes}, std::move(w0));
    fit.b = Tensor<double>::parameter({classes}, std::vector<double>(static_cast<std::size_t>(classes), 0.0));
    auto x = Tensor<double>::from_values({n, d}, x_train);
    for (std::int64_t s = 0; s < opt.steps; ++s) {
        fit.w.zero_grad();
        fit.b.zero_grad();
        auto logits = add_bias(matmul(x, fit.w), fit.b);
        auto loss = add(softmax_xent(logits, y_train), scale(sumsq(fit.w), l2 * 0.5));
        loss.backward();
        for (std::size_t i = 0; i < fit.w.values().size(); ++i) fit.w.values()[i] -= opt.lr * fit.w.grad()[i];
        for (std::size_t i = 0; i < fit.b.values().size(); ++i) fit.b.values()[i] -= opt.lr * fit.b.grad()[i];
    }
    fit.w.zero_grad();
    fit.b.zero_grad();
    return fit;
}

/// Percent accuracy; argmax ties resolve to the lowest class index.
inline double accuracy(const LogisticFit& fit, const std::vector<double>& x, std::int64_t n, std::int64_t d,
                       const std::vector<std::int64_t>& y) {
    NoGradGuard guard;
    auto logits = add_bias(matmul(Tensor<double>::from_values({n, d}, x), fit.w), fit.b);
    const std::int64_t c = logits.cols();
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t best = 0;
        double best_v = logits(i, 0);
        for (std::int64_t j = 1; j < c; ++j)
            if (logits(i, j) > best_v) {
                best_v = logits(i, j);
                best = j;
            }
        if (best == y[static_cast<std::size_t>(i)]) ++hits;
    }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(n);
}

/// One probe repetition: fit at each grid point on the training rows, select
/// by validation accuracy (first best wins), report test accuracy.
inline double probe_once(const std::vector<double>& z_std, std::int64_t n, std::int64_t d,
                         const std::vector<std::int64_t>& labels, std::int64_t classes,
                         const std::vector<std::int64_t>& train_rows, const std::vector<std::int64_t>& val_rows,
                         const std::vector<std::int64_t>& test_rows, std::uint64_t seed, const ProbeOptions& opt) {
    auto x_train = gather(z_std, d, train_rows);
    auto x_val = gather(z_std, d, val_rows);
    auto x_test = gather(z_std, d, test_rows);
    std::vector<std::int64_t> y_train, y_val, y_test;
    for (auto r : train_rows) y_train.push_back(labels[static_cast<std::size_t>(r)]);
    for (auto r : val_rows) y_val.push_back(labels[static_cast<std::size_t>(r)]);
    for (auto r : test_rows) y_test.push_back(labels[static_cast<std::size_t>(r)]);

    double best_val = -1.0;
    double best_test = 0.0;
    for (double l2 : opt.l2_grid) {
        auto fit = fit_logistic(x_train, static_cast<std::int64_t>(train_rows.size()), d, y_train, classes, l2, seed, opt);
        double val_acc = accuracy(fit, x_val, static_cast<std::int64_t>(val_rows.size()), d, y_val);
        if (val_acc > best_val) {
            best_val = val_acc;
            best_test = accuracy(fit, x_test, static_cast<std::int64_t>(test_rows.size()), d, y_test);
        }
    }
    return best_test;
}

}  // namespace probe_detail

/// Split-based node probe: for each seed fit the logistic probe on the train
/// split, choose the L2 strength on the validation split, report test
/// accuracy. (n x h) embeddings arrive as a flat row-major array.
inline ProbeReport linear_probe_node(const std::vector<double>& z, std::int64_t n, std::int64_t h,
                                     const std::vector<std::int64_t>& labels, const std::vector<Split>& split,
                                     std::int64_t seeds = 20, const ProbeOptions& opt = {}) {
    if (static_cast<std::int64_t>(labels.size()) != n || static_cast<std::int64_t>(split.size()) != n)
        throw ShapeError("linear_probe_node", "labels/split length must equal row count");
    std::vector<std::int64_t> train_rows, val_rows, test_rows;
    for (std::int64_t i = 0; i < n; ++i) {
        switch (split[static_cast<std::size_t>(i)]) {
            case Split::train: train_rows.push_back(i); break;
            case Split::val: val_rows.push_back(i); break;
            case Split::test: test_rows.push_back(i); break;
            default: break;
        }
    }
    if (train_rows.empty() || val_rows.empty() || test_rows.empty())
        throw ConfigError("linear_probe_node: empty split partition");
    std::int64_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
    auto z_std = probe_detail::standardize_columns(z, n, h, train_rows);

    std::vector<double> runs;
    for (std::int64_t s = 0; s < seeds; ++s)
        runs.push_back(probe_detail::probe_once(z_std, n, h, labels, classes, train_rows, val_rows, test_rows,
                                                static_cast<std::uint64_t>(s), opt));
    ProbeReport report = ProbeReport::from_runs(std::move(runs));
    report.hyper = {{"protocol", "split"},   {"seeds", seeds},        {"l2_grid", opt.l2_grid},
                    {"steps", opt.steps},    {"lr", opt.lr},          {"classes", classes},
                    {"std", "population"},   {"standardized", true}};
    return report;
}

/// Stratified k-fold cross validation repeated `runs` times with distinct
/// shuffles; the classifier matches the node probe. Classes smaller than the
/// fold count degrade to best effort with a logged warning.
inline ProbeReport cv_probe_graph(const std::vector<double>& z, std::int64_t b, std::int64_t h,
                                  const std::vector<std::int64_t>& labels, std::int64_t folds, std::int64_t runs,
                                  RngState rng, const ProbeOptions& opt = {}) {
    if (b < folds) throw ConfigError("cv_probe_graph: need at least as many graphs as folds");
    std::int64_t classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::map<std::int64_t, std::int64_t> class_count;
    for (auto l : labels) ++class_count[l];
    for (auto [cls, count] : class_count)
        if (count < folds)
            log_warning("cv_probe_graph: class " + std::to_string(cls) + " has " + std::to_string(count) +
                        " members, fewer than " + std::to_string(folds) + " folds; stratification is best-effort");

    std::vector<double> fold_accs;
    for (std::int64_t run = 0; run < runs; ++run) {
        RngState run_rng = rng.split(static_cast<std::uint64_t>(run));
        // stratified fold assignment: shuffle within each class, deal round-robin
        std::vector<std::int64_t> fold_of(static_cast<std::size_t>(b), 0);
        std::int64_t dealt = 0;
        for (auto [cls, count] : class_count) {
            (void)count;
            std::vector<std::int64_t> members;
            for (std::int64_t i = 0; i < b; ++i)
                if (labels[static_cast<std::size_t>(i)] == cls) members.push_back(i);
            for (std::int64_t i = static_cast<std::int64_t>(members.size()) - 1; i > 0; --i) {
                auto j = static_cast<std::int64_t>(run_rng.next_uniform_int(static_cast<std::uint64_t>(i + 1)));
                std::swap(members[static_cast<std::size_t>(i)], members[static_cast<std::size_t>(j)]);
            }
            for (auto m : members) fold_of[static_cast<std::size_t>(m)] = (dealt++) % folds;
        }
        for (std::int64_t fold = 0; fold < folds; ++fold) {
            std::vector<std::int64_t> fit_rows, test_rows;
            for (std::int64_t i = 0; i < b; ++i)
                (fold_of[static_cast<std::size_t>(i)] == fold ? test_rows : fit_rows).push_back(i);
            // hold out a stratified tenth of the fit rows for the L2 choice
            std::vector<std::int64_t> train_rows, val_rows;
            std::map<std::int64_t, std::int64_t> seen;
            for (auto r : fit_rows) {
                std::int64_t k = seen[labels[static_cast<std::size_t>(r)]]++;
                (k % 10 == 9 ? val_rows : train_rows).push_back(r);
            }
            if (val_rows.empty()) val_rows = train_rows;
            auto z_std = probe_detail::standardize_columns(z, b, h, train_rows);
            fold_accs.push_back(probe_detail::probe_once(z_std, b, h, labels, classes, train_rows, val_rows,
                                                         test_rows, static_cast<std::uint64_t>(run * folds + fold),
                                                         opt));
        }
    }
    ProbeReport report = ProbeReport::from_runs(std::move(fold_accs));
    report.hyper = {{"protocol", "stratified-cv"}, {"folds", folds},  {"runs", runs},
                    {"l2_grid", opt.l2_grid},      {"steps", opt.steps}, {"lr", opt.lr},
                    {"classes", classes},          {"std", "population"}};
    return report;
}

}  // namespace graffe
