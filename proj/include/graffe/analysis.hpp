#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "graffe/evaluator.hpp"
#include "graffe/trainer.hpp"

namespace graffe {

// ---------------------------------------------------------------------------
// rank correlation
// ---------------------------------------------------------------------------

struct CorrelationReport {
    bool defined = false;
    double spearman = 0.0;
    std::vector<std::pair<double, double>> points;  // (-log loss, accuracy)

    Json to_json() const {
        Json pts = Json::array();
        for (auto [x, y] : points) pts.push_back({{"neg_log_loss", x}, {"accuracy", y}});
        return Json{{"defined", defined}, {"spearman", spearman}, {"points", pts}};
    }
};

namespace analysis_detail {

inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace analysis_detail

/// Spearman rank correlation with average ranks on ties; undefined when
/// either series is constant.
inline std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    auto constant = [](const std::vector<double>& v) {
        for (double e : v)
            if (e != v.front()) return false;
        return true;
    };
    if (constant(x) || constant(y)) return std::nullopt;
    auto rx = analysis_detail::average_ranks(x);
    auto ry = analysis_detail::average_ranks(y);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(rx.size());
    my /= static_cast<double>(ry.size());
    double num = 0, dx = 0, dy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        num += (rx[i] - mx) * (ry[i] - my);
        dx += (rx[i] - mx) * (rx[i] - mx);
        dy += (ry[i] - my) * (ry[i] - my);
    }
    if (dx == 0 || dy == 0) return std::nullopt;
    return num / std::sqrt(dx * dy);
}

// ---------------------------------------------------------------------------
// held-out denoising-loss curves
// ---------------------------------------------------------------------------

struct LossCurve {
    std::string label;
    std::vector<std::int64_t> t_grid;
    std::vector<double> loss;

    double mean() const {
        double s = 0;
        for (double v : loss) s += v;
        return loss.empty() ? 0.0 : s / static_cast<double>(loss.size());
    }
};

inline void export_curves_csv(const std::vector<LossCurve>& curves, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "t";
    for (const auto& c : curves) out << ',' << c.label;
    out << "\n";
    out.precision(12);
    for (std::size_t i = 0; i < curves.front().t_grid.size(); ++i) {
        out << curves.front().t_grid[i];
        for (const auto& c : curves) out << ',' << c.loss[i];
        out << "\n";
    }
}

/// Mean denoising loss of a node-task decoder on a row subset over a fixed
/// timestep grid, with `reps` fresh noise draws per grid point. The condition
/// rows are supplied per evaluated row by `z_rows`.
template <class T>
LossCurve eval_dsm_curve(const GraphUNet<T>& unet, const std::vector<T>& x0_rows, std::int64_t n_rows,
                         std::int64_t d, const Tensor<T>& z_rows, const std::vector<std::int64_t>& t_grid,
                         const NoiseSchedule& sched, int reps, std::uint64_t seed, const std::string& label) {
    NoGradGuard guard;
    LossCurve curve;
    curve.label = label;
    curve.t_grid = t_grid;
    Graph dummy;  // mlp mode ignores the graph structure
    dummy.n = n_rows;
    dummy.d = d;
    dummy.adj.offsets.assign(static_cast<std::size_t>(n_rows + 1), 0);
    for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
        RngState rng = RngState(seed).split(0xc04feULL + gi);
        std::vector<std::int64_t> t(static_cast<std::size_t>(n_rows), t_grid[gi]);
        double acc = 0.0;
        for (int r = 0; r < reps; ++r) {
            auto ns = noise(x0_rows, n_rows, d, t, sched, rng);
            auto pred = unet.forward(Tensor<T>::from_values({n_rows, d}, std::move(ns.xt)), t, z_rows, dummy);
            acc += dsm_loss_value(pred.values(), x0_rows, n_rows, d, t);
        }
        curve.loss.push_back(acc / reps);
    }
    return curve;
}

// ---------------------------------------------------------------------------
// conditioning comparison (three decoders, identical budgets)
// ---------------------------------------------------------------------------

enum class ConditionSource { none, label, representation };

inline std::string to_string(ConditionSource c) {
    switch (c) {
        case ConditionSource::none: return "vanilla";
        case ConditionSource::label: return "label";
        default: return "representation";
    }
}

struct ConditionComparison {
    std::vector<LossCurve> curves;  // vanilla, label, representation
    bool ordering_holds = false;    // representation < label < vanilla on the grid mean
};

/// Trains three identically budgeted node-task decoders that differ only in
/// their conditioning signal, then evaluates held-out denoising loss over a
/// timestep grid: no condition, a learnable per-class label embedding, and
/// the jointly trained encoder representation.
template <class T>
ConditionComparison condition_comparison(const Graph& g, const TrainConfig& base_cfg,
                                         const std::vector<std::int64_t>& t_grid, int eval_reps = 8,
                                         std::uint64_t eval_seed = 17) {
    if (!g.has_node_labels) throw ConfigError("condition_comparison: dataset has no node labels");
    TrainConfig cfg = base_cfg;
    cfg.validate();
    const std::int64_t n = g.n, d = g.d, h = cfg.encoder.hidden;
    NoiseSchedule sched(cfg.schedule, cfg.timesteps);
    std::int64_t classes = *std::max_element(g.node_labels.begin(), g.node_labels.end()) + 1;

    std::vector<T> x0(g.x.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = static_cast<T>(g.x[i]);

    std::vector<std::int64_t> heldout;
    for (std::int64_t i = 0; i < n; ++i)
        if (!g.split.empty() && g.split[static_cast<std::size_t>(i)] == Split::test) heldout.push_back(i);
    if (heldout.empty())
        for (std::int64_t i = 0; i < n; ++i) heldout.push_back(i);
    std::vector<T> x0_held(heldout.size() * static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < heldout.size(); ++i)
        std::copy(x0.begin() + heldout[i] * d, x0.begin() + (heldout[i] + 1) * d,
                  x0_held.begin() + static_cast<std::int64_t>(i) * d);

    ConditionComparison out;

    // -- vanilla and label variants share a bespoke decoder-only loop
    for (ConditionSource source : {ConditionSource::none, ConditionSource::label}) {
        RngState init_rng = RngState(cfg.seed).split(0xdecULL + static_cast<std::uint64_t>(source));
        GraphUNet<T> unet(cfg.decoder, d, h, init_rng);
        Tensor<T> label_emb;
        ParamList<T> cond_params;
        if (source == ConditionSource::label) {
            label_emb = fan_in_uniform<T>({classes, h}, h, init_rng);
            cond_params.push_back({"label_embedding", label_emb});
        }
        OptimizerConfig ocfg;
        ocfg.mode = cfg.optimizer;
        Optimizer<T> dec_opt(tensors_of(unet.params()), ocfg);
        std::unique_ptr<Optimizer<T>> cond_opt;
        if (!cond_params.empty()) cond_opt = std::make_unique<Optimizer<T>>(tensors_of(cond_params), ocfg);

        RngState rng = RngState(cfg.seed).split(0x7261696eULL);
        std::vector<std::int64_t> node_labels = g.node_labels;
        for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            double lr = cosine_lr(epoch, std::max<std::int64_t>(cfg.epochs, 1), cfg.lr_decoder, cfg.lr_min);
            auto t = sample_timesteps_per_node(sched, n, rng);
            auto ns = noise(x0, n, d, t, sched, rng);
            Tensor<T> z = source == ConditionSource::none
                              ? Tensor<T>::zeros({n, h})
                              : gather_rows(label_emb, node_labels);
            auto pred = unet.forward(Tensor<T>::from_values({n, d}, std::move(ns.xt)), t, z,
                                     g, nullptr);
            auto loss = dsm_loss(pred, Tensor<T>::from_values({n, d}, x0), t, cfg.lambda);
            if (!std::isfinite(static_cast<double>(loss.item()))) continue;
            loss.backward();
            auto all = tensors_of(unet.params());
            for (const auto& p : cond_params) all.push_back(p.tensor);
            clip_global_grad_norm(all, cfg.clip_norm);
            dec_opt.step(lr);
            if (cond_opt) cond_opt->step(lr * cfg.lr_encoder() / cfg.lr_decoder);
            for (auto& p : all) p.zero_grad();
        }

        Tensor<T> z_held;
        if (source == ConditionSource::none) {
            z_held = Tensor<T>::zeros({static_cast<std::int64_t>(heldout.size()), h});
        } else {
            std::vector<std::int64_t> held_labels;
            for (auto r : heldout) held_labels.push_back(node_labels[static_cast<std::size_t>(r)]);
            NoGradGuard guard;
            z_held = gather_rows(label_emb, held_labels);
        }
        out.curves.push_back(eval_dsm_curve(unet, x0_held, static_cast<std::int64_t>(heldout.size()), d, z_held,
                                            t_grid, sched, eval_reps, eval_seed, to_string(source)));
    }

    // -- full model: encoder representation conditioning
    {
        Trainer<T> trainer(cfg, g);
        for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) trainer.train_epoch();
        NoGradGuard guard;
        auto rep = trainer.model().embed(g);
        auto z_held = gather_rows(rep.z, heldout);
        out.curves.push_back(eval_dsm_curve(trainer.model().unet, x0_held,
                                            static_cast<std::int64_t>(heldout.size()), d, z_held, t_grid, sched,
                                            eval_reps, eval_seed, to_string(ConditionSource::representation)));
    }

    double vanilla = out.curves[0].mean(), label = out.curves[1].mean(), repr = out.curves[2].mean();
    out.ordering_holds = repr < label && label < vanilla;
    return out;
}

// ---------------------------------------------------------------------------
// loss / accuracy correlation across checkpoints
// ---------------------------------------------------------------------------

/// Evaluation-time mean denoising loss of a full model on a node graph over
/// a timestep grid (encoder runs clean, decoder denoises fresh draws).
template <class T>
double model_eval_dsm_loss(const Model<T>& model, const Graph& g, const std::vector<std::int64_t>& t_grid,
                           const NoiseSchedule& sched, int reps, std::uint64_t seed) {
    NoGradGuard guard;
    auto rep = model.embed(g);
    std::vector<T> x0(g.x.size());
    for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = static_cast<T>(g.x[i]);
    auto curve = eval_dsm_curve(model.unet, x0, g.n, g.d, rep.z, t_grid, sched, reps, seed, "model");
    return curve.mean();
}

/// Pairs (-log mean denoising loss, probe accuracy) across a checkpoint
/// series and their Spearman rank correlation.
inline CorrelationReport loss_accuracy_correlation(const std::vector<std::filesystem::path>& checkpoints,
                                                   const Graph& g, const std::vector<std::int64_t>& t_grid,
                                                   int eval_reps = 4, std::int64_t probe_seeds = 3,
                                                   const ProbeOptions& probe_opt = {}) {
    if (!g.has_node_labels || g.split.empty())
        throw ConfigError("loss_accuracy_correlation: needs labels and splits");
    CorrelationReport report;
    std::vector<double> neg_log_loss, accuracy;
    for (const auto& path : checkpoints) {
        Checkpoint ck = load_checkpoint(path);
        if (ck.config.precision != Precision::f32)
            throw ConfigError("loss_accuracy_correlation expects f32 checkpoints");
        auto model = Model<float>::build(ck.config, g.d);
        model.load_params(ck.arrays);
        NoiseSchedule sched(ck.config.schedule, ck.config.timesteps);
        double loss = model_eval_dsm_loss(model, g, t_grid, sched, eval_reps, 23);
        auto rep = model.embed(g);
        std::vector<double> z(rep.z.values().begin(), rep.z.values().end());
        auto probe = linear_probe_node(z, g.n, rep.z.cols(), g.node_labels, g.split, probe_seeds, probe_opt);
        neg_log_loss.push_back(-std::log(loss));
        accuracy.push_back(probe.mean);
        report.points.emplace_back(-std::log(loss), probe.mean);
    }
    auto rho = spearman(neg_log_loss, accuracy);
    report.defined = rho.has_value();
    report.spearman = rho.value_or(0.0);
    return report;
}

}  // namespace graffe
