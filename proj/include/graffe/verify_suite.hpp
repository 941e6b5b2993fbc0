#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "graffe/decoder.hpp"
#include "graffe/encoder.hpp"
#include "graffe/theory.hpp"
#include "graffe/trainer.hpp"

namespace graffe {

struct SuiteResult {
    std::string name;
    bool pass = false;
    std::string detail;  // short human-readable summary
    std::vector<BoundReport> reports;

    Json to_json() const {
        Json arr = Json::array();
        for (const auto& r : reports) arr.push_back(r.to_json());
        return Json{{"name", name}, {"pass", pass}, {"detail", detail}, {"reports", arr}};
    }
};

struct VerifyOptions {
    std::uint64_t seed = 20240601;
    std::int64_t theorem1_toys = 10;
    std::int64_t theorem1_mc_samples = 250000;
    std::int64_t theorem1_mlp_steps = 16000;
    std::int64_t theorem2_cases = 100;
    std::int64_t lemma3_cases = 100;
    bool train_mlp = true;
};

namespace verify_detail {

inline void write_suite_files(const SuiteResult& res, const std::filesystem::path& out_dir,
                              const std::string& csv_header, const std::vector<std::string>& csv_rows) {
    if (out_dir.empty()) return;
    std::filesystem::create_directories(out_dir);
    {
        std::ofstream out(out_dir / (res.name + ".json"));
        out << res.to_json().dump(2) << "\n";
    }
    {
        std::ofstream out(out_dir / (res.name + "_sweep.csv"));
        out << csv_header << "\n";
        for (const auto& row : csv_rows) out << row << "\n";
    }
}

inline std::vector<NoiseLevel> acceptance_levels() {
    NoiseSchedule sched(ScheduleKind::linear, 1000);
    return {NoiseLevel::at(sched, 100), NoiseLevel::at(sched, 500), NoiseLevel::at(sched, 900)};
}

/// Toys for the minimum-loss checks: unit-scale supports keep the posterior
/// widths comparable to the acceptance noise levels so the quadrature
/// converges at the configured orders.
inline DiscreteToy suite_toy(std::int64_t d, std::int64_t k, std::int64_t cells, RngState& rng) {
    DiscreteToy toy = DiscreteToy::random(d, k, cells, rng);
    for (auto& p : toy.points) p *= 0.9;
    return toy;
}

}  // namespace verify_detail

/// Criterion: the analytic posterior mean achieves the oracle minimum within
/// 1% relative, and a trained 64-wide net lands within 5% above it and never
/// below oracle - 1%, across randomized toys and three noise levels.
inline SuiteResult run_theorem1_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    SuiteResult res;
    res.name = "theorem1";
    res.pass = true;
    RngState rng(opt.seed);
    auto levels = verify_detail::acceptance_levels();
    std::vector<std::string> rows;
    double worst_analytic = 0.0, worst_trained = 0.0;
    for (std::int64_t ti = 0; ti < opt.theorem1_toys; ++ti) {
        DiscreteToy toy = verify_detail::suite_toy(ti % 2 == 0 ? 1 : 2, 4 + (ti % 3) * 4, 3, rng);
        for (std::size_t li = 0; li < levels.size(); ++li) {
            const NoiseLevel& lvl = levels[li];
            RngState mc_rng = rng.split(1000 + ti * 10 + static_cast<std::int64_t>(li));
            auto analytic = check_theorem1_batch(toy, lvl, posterior_mean_batch_predictor(toy, lvl), true,
                                                 opt.theorem1_mc_samples, mc_rng);
            analytic.name = "theorem1/analytic/toy" + std::to_string(ti) + "/level" + std::to_string(li);
            res.pass = res.pass && analytic.pass;
            worst_analytic = std::max(worst_analytic, std::abs(analytic.slack) / std::abs(analytic.right));
            res.reports.push_back(analytic);
            std::ostringstream row;
            row.precision(12);
            row << ti << ',' << li << ",analytic," << analytic.left << ',' << analytic.right << ','
                << analytic.slack << ',' << (analytic.pass ? 1 : 0);
            rows.push_back(row.str());

            if (opt.train_mlp) {
                RngState train_rng = rng.split(2000 + ti * 10 + static_cast<std::int64_t>(li));
                ToyDenoiser net(toy.d, 64, train_rng);
                // one-dimensional targets converge with a shorter budget
                std::int64_t steps = toy.d == 1 ? (2 * opt.theorem1_mlp_steps) / 3 : opt.theorem1_mlp_steps;
                net.train(toy, lvl, steps, 128, 2e-3, train_rng);
                RngState eval_rng = rng.split(3000 + ti * 10 + static_cast<std::int64_t>(li));
                auto trained = check_theorem1_batch(toy, lvl, net.as_batch_predictor(), false,
                                                    opt.theorem1_mc_samples, eval_rng);
                trained.name = "theorem1/trained/toy" + std::to_string(ti) + "/level" + std::to_string(li);
                bool within_five_pct = trained.left <= trained.right * 1.05 + 3.0 * trained.error_estimate;
                trained.pass = trained.pass && within_five_pct;
                res.pass = res.pass && trained.pass;
                worst_trained = std::max(worst_trained, trained.slack / std::abs(trained.right));
                res.reports.push_back(trained);
                std::ostringstream row2;
                row2.precision(12);
                row2 << ti << ',' << li << ",trained," << trained.left << ',' << trained.right << ','
                     << trained.slack << ',' << (trained.pass ? 1 : 0);
                rows.push_back(row2.str());
            }
        }
    }
    std::ostringstream detail;
    detail.precision(3);
    detail << "worst analytic deviation " << worst_analytic * 100 << "%, worst trained excess "
           << worst_trained * 100 << "%";
    res.detail = detail.str();
    verify_detail::write_suite_files(res, out_dir, "toy,level,predictor,loss,oracle,slack,pass", rows);
    return res;
}

/// Criterion: the conditioned minimum never exceeds the unconditioned one
/// (slack >= -1e-10), strictly positive gap for non-trivial partitions.
inline SuiteResult run_theorem2_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    SuiteResult res;
    res.name = "theorem2";
    res.pass = true;
    RngState rng(opt.seed + 1);
    NoiseSchedule sched(ScheduleKind::linear, 1000);
    std::vector<std::string> rows;
    double min_slack = std::numeric_limits<double>::infinity();
    for (std::int64_t c = 0; c < opt.theorem2_cases; ++c) {
        DiscreteToy toy = verify_detail::suite_toy(c % 2 == 0 ? 1 : 2, 4 + (c % 3) * 2, 2 + (c % 3), rng);
        auto lvl = NoiseLevel::at(sched, 200 + (c % 7) * 100);
        auto rep = check_theorem2(toy, lvl);
        rep.name = "theorem2/case" + std::to_string(c);
        bool nontrivial = toy.cell_count() > 1;
        if (nontrivial && rep.slack <= 0.0) rep.pass = false;
        res.pass = res.pass && rep.pass;
        min_slack = std::min(min_slack, rep.slack);
        res.reports.push_back(rep);
        std::ostringstream row;
        row.precision(12);
        row << c << ',' << toy.d << ',' << toy.k << ',' << toy.cell_count() << ',' << rep.left << ','
            << rep.right << ',' << rep.slack << ',' << (rep.pass ? 1 : 0);
        rows.push_back(row.str());
    }
    std::ostringstream detail;
    detail.precision(6);
    detail << opt.theorem2_cases << " cases, min slack " << min_slack;
    res.detail = detail.str();
    verify_detail::write_suite_files(res, out_dir, "case,d,k,cells,conditioned,unconditioned,slack,pass", rows);
    return res;
}

/// Criterion: closed-form Gaussian sweep; the bound slack equals the
/// conditional information (identity to 1e-9) and is non-negative everywhere.
inline SuiteResult run_theorem3_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    (void)opt;
    SuiteResult res;
    res.name = "theorem3";
    res.pass = true;
    NoiseSchedule sched(ScheduleKind::linear, 1000);
    std::vector<std::string> rows;
    int points = 0;
    for (double frac : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        auto lvl = NoiseLevel::at(sched, static_cast<std::int64_t>(frac * 1000));
        for (double s2 : {0.01, 0.1, 1.0, 10.0}) {
            GaussianToy g;
            g.prior_var = 1.0;
            g.feature_noise_var = s2;
            g.alpha = lvl.alpha;
            g.sigma = lvl.sigma;
            auto rep = check_theorem3(g);
            rep.name = "theorem3/t" + std::to_string(frac) + "/s2_" + std::to_string(s2);
            res.pass = res.pass && rep.pass && rep.slack >= 0.0;
            res.reports.push_back(rep);
            std::ostringstream row;
            row.precision(12);
            row << frac << ',' << s2 << ',' << rep.left << ',' << rep.right << ',' << rep.slack << ','
                << (rep.pass ? 1 : 0);
            rows.push_back(row.str());
            ++points;
        }
    }
    res.detail = std::to_string(points) + " grid points, identity within 1e-9";
    verify_detail::write_suite_files(res, out_dir, "t_frac,s2,info,bound_rhs,slack,pass", rows);
    return res;
}

/// Criterion: random same-trace covariances never exceed the isotropic
/// entropy bound; the isotropic case achieves equality to 1e-12.
inline SuiteResult run_lemma3_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    SuiteResult res;
    res.name = "lemma3";
    res.pass = true;
    RngState rng(opt.seed + 2);
    std::vector<std::string> rows;
    for (std::int64_t c = 0; c < opt.lemma3_cases; ++c) {
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_uniform_int(4));
        Eigen::MatrixXd b(n, n);
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < n; ++j) b(i, j) = rng.next_normal();
        Eigen::MatrixXd sigma = b * b.transpose() + 0.05 * Eigen::MatrixXd::Identity(n, n);
        const double trace = 0.5 + 3.0 * rng.next_uniform();
        sigma *= trace / sigma.trace();
        std::vector<double> cov(sigma.data(), sigma.data() + n * n);
        auto rep = check_lemma3(trace, n, cov);
        rep.name = "lemma3/case" + std::to_string(c);
        res.pass = res.pass && rep.pass;
        res.reports.push_back(rep);
        std::ostringstream row;
        row.precision(12);
        row << c << ',' << n << ',' << trace << ',' << rep.slack << ',' << (rep.pass ? 1 : 0);
        rows.push_back(row.str());
    }
    // equality case
    for (std::int64_t n : {1, 2, 5}) {
        const double trace = 1.7;
        std::vector<double> cov(static_cast<std::size_t>(n * n), 0.0);
        for (std::int64_t i = 0; i < n; ++i) cov[static_cast<std::size_t>(i * n + i)] = trace / static_cast<double>(n);
        auto rep = check_lemma3(trace, n, cov, 1e-12);
        rep.name = "lemma3/isotropic" + std::to_string(n);
        bool equality = std::abs(rep.slack) <= 1e-12;
        rep.pass = rep.pass && equality;
        res.pass = res.pass && rep.pass;
        res.reports.push_back(rep);
        rows.push_back("isotropic," + std::to_string(n) + ",1.7," + std::to_string(rep.slack) + "," +
                       (rep.pass ? std::string("1") : std::string("0")));
    }
    res.detail = std::to_string(opt.lemma3_cases) + " random covariances plus isotropic equality";
    verify_detail::write_suite_files(res, out_dir, "case,n,trace,slack,pass", rows);
    return res;
}

/// Criterion: at the pure-noise endpoint the conditional and unconditional
/// information coincide (exactly at alpha = 0, within 1e-3 at alpha = 0.01).
inline SuiteResult run_remark_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    (void)opt;
    SuiteResult res;
    res.name = "remark";
    res.pass = true;
    std::vector<std::string> rows;
    struct Case {
        double v, s2, alpha, tol;
    };
    for (const Case& c : {Case{1.0, 1.0, 0.0, 0.0}, Case{1.0, 1.0, 0.01, 1e-3}, Case{2.0, 0.5, 0.0, 0.0},
                          Case{2.0, 0.5, 0.01, 1e-3}, Case{0.5, 4.0, 0.01, 1e-3}}) {
        auto rep = check_remark(c.v, c.s2, c.alpha, c.tol);
        rep.name = "remark/v" + std::to_string(c.v) + "/alpha" + std::to_string(c.alpha);
        res.pass = res.pass && rep.pass;
        res.reports.push_back(rep);
        std::ostringstream row;
        row.precision(12);
        row << c.v << ',' << c.s2 << ',' << c.alpha << ',' << rep.left << ',' << rep.right << ',' << rep.slack
            << ',' << (rep.pass ? 1 : 0);
        rows.push_back(row.str());
    }
    // closed-form anchor: I(x; f(x)) = 0.5 log 2 at v = s2 = 1
    auto anchor = check_remark(1.0, 1.0, 0.0, 0.0);
    bool anchor_ok = std::abs(anchor.right - 0.5 * std::log(2.0)) <= 1e-12;
    res.pass = res.pass && anchor_ok;
    res.detail = "endpoint identity holds; unconditional information anchor at 0.5 log 2";
    verify_detail::write_suite_files(res, out_dir, "v,s2,alpha,cond_info,uncond_info,slack,pass", rows);
    return res;
}

/// Criterion: finite-difference relative error at 64-bit stays within 1e-4
/// for every layer kind and for the composed models.
inline SuiteResult run_gradient_suite(const VerifyOptions& opt, const std::filesystem::path& out_dir = {}) {
    SuiteResult res;
    res.name = "gradients";
    res.pass = true;
    std::vector<std::string> rows;
    RngState data_rng(opt.seed + 3);
    Graph g = [&] {
        std::vector<std::pair<std::int64_t, std::int64_t>> edges{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {0, 3}, {1, 4}};
        std::vector<double> feats(6 * 4);
        for (auto& f : feats) f = data_rng.next_normal();
        return make_graph(6, 4, std::move(feats), edges);
    }();
    auto batch = batch_graphs({g});
    auto record = [&](const std::string& name, double err) {
        BoundReport rep;
        rep.name = "gradients/" + name;
        rep.left = err;
        rep.right = 1e-4;
        rep.slack = 1e-4 - err;
        rep.tolerance = 0.0;
        rep.pass = err <= 1e-4;
        rep.method = "central finite differences, step 1e-5, 64-bit";
        res.pass = res.pass && rep.pass;
        res.reports.push_back(rep);
        std::ostringstream row;
        row.precision(6);
        row << name << ',' << err << ',' << (rep.pass ? 1 : 0);
        rows.push_back(row.str());
    };

    {  // GAT layer
        RngState rng(opt.seed + 10);
        GatLayer<double> layer(4, 8, 2, false, 0.0, rng);
        auto ix = detail::attention_index(g);
        std::vector<double> fv(g.x.begin(), g.x.end());
        auto h = Tensor<double>::from_values({g.n, g.d}, fv);
        ParamList<double> params;
        layer.collect(params, "gat");
        auto f = [&]() {
            RngState r(0);
            return sumsq(layer.forward(h, ix, false, r));
        };
        record("gat_layer", finite_diff_check(f, tensors_of(params), 1e-5));
    }
    {  // GIN layer
        RngState rng(opt.seed + 11);
        GinLayer<double> layer(4, 8, rng);
        std::vector<double> fv(g.x.begin(), g.x.end());
        auto h = Tensor<double>::from_values({g.n, g.d}, fv);
        ParamList<double> params;
        layer.collect(params, "gin");
        auto f = [&]() { return sumsq(layer.forward(h, g)); };
        record("gin_layer", finite_diff_check(f, tensors_of(params), 1e-5));
    }
    {  // UNet block via a depth-1 mlp decoder
        RngState rng(opt.seed + 12);
        DecoderConfig cfg;
        cfg.depth = 1;
        cfg.base = 8;
        cfg.layer_kind = DecoderLayerKind::mlp;
        cfg.fusion = FusionKind::sum;
        cfg.time_width = 4;
        GraphUNet<double> unet(cfg, 4, 3, rng);
        for (const auto& p : unet.params())
            if (p.name.find("fuse") != std::string::npos) {
                auto tensor = p.tensor;
                for (auto& v : tensor.values()) v = rng.next_normal() * 0.1;
            }
        RngState xr(opt.seed + 13);
        auto x = Tensor<double>::from_values({g.n, 4}, xr.normal(static_cast<std::size_t>(g.n * 4)));
        auto z = Tensor<double>::from_values({g.n, 3}, xr.normal(static_cast<std::size_t>(g.n * 3)));
        std::vector<std::int64_t> t(static_cast<std::size_t>(g.n), 7);
        auto f = [&]() { return sumsq(unet.forward(x, t, z, g)); };
        record("unet_block", finite_diff_check(f, tensors_of(unet.params()), 1e-5));
    }
    {  // AdaNorm fusion
        RngState rng(opt.seed + 14);
        AdaNorm<double> an(4, 3, 5);
        auto wt = an.t_proj.w;
        for (auto& v : wt.values()) v = rng.next_normal() * 0.2;
        auto wz = an.z_proj.w;
        for (auto& v : wz.values()) v = rng.next_normal() * 0.2;
        RngState xr(opt.seed + 15);
        auto h = Tensor<double>::from_values({5, 5}, xr.normal(25));
        auto te = Tensor<double>::from_values({5, 4}, xr.normal(20));
        auto z = Tensor<double>::from_values({5, 3}, xr.normal(15));
        ParamList<double> params;
        an.collect(params, "adanorm");
        auto f = [&]() { return sumsq(an.forward(h, te, z)); };
        record("ada_norm", finite_diff_check(f, tensors_of(params), 1e-5));
    }
    {  // time embedding
        RngState rng(opt.seed + 16);
        TimeEmbed<double> te(8, rng);
        ParamList<double> params;
        te.collect(params, "time");
        std::vector<std::int64_t> t{1, 9, 40, 999};
        auto f = [&]() { return sumsq(te.forward(t)); };
        record("time_embed", finite_diff_check(f, tensors_of(params), 1e-5));
    }
    {  // full node-task model
        TrainConfig cfg;
        cfg.task = TaskType::node;
        cfg.encoder.layer_kind = LayerKind::gat;
        cfg.encoder.layers = 2;
        cfg.encoder.hidden = 8;
        cfg.encoder.heads = 2;
        cfg.decoder.depth = 1;
        cfg.decoder.base = 8;
        cfg.decoder.time_width = 4;
        cfg.timesteps = 50;
        cfg.seed = opt.seed + 17;
        cfg.precision = Precision::f64;
        auto model = Model<double>::build(cfg, g.d);
        NoiseSchedule sched(cfg.schedule, cfg.timesteps);
        std::vector<double> x0(g.x.begin(), g.x.end());
        std::vector<std::int64_t> t{3, 17, 25, 33, 41, 49};
        RngState nrng(opt.seed + 18);
        auto ns = noise(x0, g.n, g.d, t, sched, nrng);
        auto xt = Tensor<double>::from_values({g.n, g.d}, ns.xt);
        auto x0t = Tensor<double>::from_values({g.n, g.d}, x0);
        auto f = [&]() {
            RngState r(0);
            auto rep = model.encoder.encode(g, 0.0, r, false);
            auto pred = model.unet.forward(xt, t, rep.z, g);
            return dsm_loss(pred, x0t, t);
        };
        record("full_model_node", finite_diff_check(f, tensors_of(model.all_params()), 1e-5));
    }
    {  // full graph-task model
        TrainConfig cfg;
        cfg.task = TaskType::graph;
        cfg.encoder.layer_kind = LayerKind::gin;
        cfg.encoder.layers = 2;
        cfg.encoder.hidden = 8;
        cfg.decoder.depth = 1;
        cfg.decoder.base = 8;
        cfg.decoder.layer_kind = DecoderLayerKind::gnn;
        cfg.decoder.fusion = FusionKind::adanorm;
        cfg.decoder.time_width = 4;
        cfg.timesteps = 50;
        cfg.seed = opt.seed + 19;
        cfg.precision = Precision::f64;
        auto model = Model<double>::build(cfg, g.d);
        NoiseSchedule sched(cfg.schedule, cfg.timesteps);
        std::vector<double> x0(g.x.begin(), g.x.end());
        std::vector<std::int64_t> t(static_cast<std::size_t>(g.n), 21);
        RngState nrng(opt.seed + 20);
        auto ns = noise(x0, g.n, g.d, t, sched, nrng);
        auto xt = Tensor<double>::from_values({g.n, g.d}, ns.xt);
        auto x0t = Tensor<double>::from_values({g.n, g.d}, x0);
        auto f = [&]() {
            RngState r(0);
            auto rep = model.encoder.encode(batch, 0.0, r, false);
            auto pred = model.unet.forward(xt, t, rep.readout, batch.merged, &batch.graph_id);
            return dsm_loss(pred, x0t, t);
        };
        record("full_model_graph", finite_diff_check(f, tensors_of(model.all_params()), 1e-5));
    }

    double worst = 0.0;
    for (const auto& r : res.reports) worst = std::max(worst, r.left);
    std::ostringstream detail;
    detail.precision(3);
    detail << "worst relative error " << worst;
    res.detail = detail.str();
    verify_detail::write_suite_files(res, out_dir, "layer,max_rel_error,pass", rows);
    return res;
}

/// All five theorem-level suites plus the gradient suite.
inline std::vector<SuiteResult> run_all_suites(const VerifyOptions& opt,
                                               const std::filesystem::path& out_dir = {}) {
    return {run_theorem1_suite(opt, out_dir), run_theorem2_suite(opt, out_dir),
            run_theorem3_suite(opt, out_dir), run_lemma3_suite(opt, out_dir),
            run_remark_suite(opt, out_dir),   run_gradient_suite(opt, out_dir)};
}

}  // namespace graffe
