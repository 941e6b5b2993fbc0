#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "graffe/checkpoint.hpp"
#include "graffe/config.hpp"
#include "graffe/dataset_io.hpp"
#include "graffe/decoder.hpp"
#include "graffe/diffusion.hpp"
#include "graffe/encoder.hpp"
#include "graffe/optim.hpp"

namespace graffe {

/// Encoder plus conditional decoder built from one config. The decoder's
/// condition width always equals the encoder hidden width.
template <class T>
struct Model {
    TrainConfig cfg;
    std::int64_t in_dim = 0;
    Encoder<T> encoder;
    GraphUNet<T> unet;

    static Model build(const TrainConfig& cfg, std::int64_t in_dim) {
        cfg.validate();
        Model m;
        m.cfg = cfg;
        m.in_dim = in_dim;
        RngState init_rng = RngState(cfg.seed).split(0x696e6974ULL);
        m.encoder = Encoder<T>(cfg.encoder, in_dim, init_rng);
        m.unet = GraphUNet<T>(cfg.decoder, in_dim, cfg.encoder.hidden, init_rng);
        return m;
    }

    ParamList<T> encoder_params() const { return encoder.params("encoder"); }
    ParamList<T> decoder_params() const { return unet.params("decoder"); }

    ParamList<T> all_params() const {
        ParamList<T> out = encoder_params();
        auto dec = decoder_params();
        out.insert(out.end(), dec.begin(), dec.end());
        return out;
    }

    void store_params(CheckpointArrays& arrays) const {
        for (const auto& p : all_params()) {
            std::vector<double> data(p.tensor.values().size());
            for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<double>(p.tensor.values()[i]);
            arrays.add("param." + p.name, p.tensor.shape(), std::move(data));
        }
    }

    void load_params(const CheckpointArrays& arrays) {
        for (auto& p : all_params()) {
            const auto& e = arrays.at("param." + p.name);
            if (e.shape != p.tensor.shape())
                throw IoError("checkpoint: shape mismatch for " + p.name + ": " + shape_str(e.shape) + " vs " +
                              shape_str(p.tensor.shape()));
            auto tensor = p.tensor;
            for (std::size_t i = 0; i < e.data.size(); ++i) tensor.values()[i] = static_cast<T>(e.data[i]);
        }
    }

    /// Frozen-encoder inference: no masking, no dropout, deterministic.
    Representation<T> embed(const Graph& g) const {
        RngState unused(0);
        NoGradGuard guard;
        return encoder.encode(g, 0.0, unused, false);
    }

    Representation<T> embed(const GraphBatch& batch) const {
        RngState unused(0);
        NoGradGuard guard;
        return encoder.encode(batch, 0.0, unused, false);
    }
};

struct EpochEvent {
    std::int64_t epoch = 0;       // 1-based, 0 for the initialization snapshot
    double loss = 0.0;            // mean accepted-step loss of this epoch
    bool checkpoint_due = false;  // cadence or final epoch
};

/// Joint self-supervised training of encoder and decoder. One RNG stream
/// drives masking, dropout, timestep draws, noise and batch shuffles, so a
/// reloaded checkpoint continues bitwise identically at fixed precision.
template <class T>
class Trainer {
public:
    Trainer(const TrainConfig& cfg, Graph graph)
        : cfg_(cfg), node_graph_(std::move(graph)), rng_(RngState(cfg.seed).split(0x747261696eULL)) {
        if (cfg.task != TaskType::node) throw ConfigError("trainer: node-task constructor used for graph task");
        init_model();
    }

    Trainer(const TrainConfig& cfg, std::vector<Graph> graphs)
        : cfg_(cfg), graphs_(std::move(graphs)), rng_(RngState(cfg.seed).split(0x747261696eULL)) {
        if (cfg.task != TaskType::graph) throw ConfigError("trainer: graph-task constructor used for node task");
        init_model();
    }

    /// Loads the dataset named by the config.
    static Trainer from_config(const TrainConfig& cfg) {
        if (cfg.task == TaskType::node) return Trainer(cfg, load_node_dataset(cfg.dataset_path));
        auto graphs = load_graph_dataset(cfg.dataset_path);
        std::int64_t cap = cfg.degree_cap > 0 ? cfg.degree_cap : max_degree(graphs);
        return Trainer(cfg, degree_onehot(std::move(graphs), cap));
    }

    static Trainer resume(const Checkpoint& ck, Graph graph) {
        Trainer t(ck.config, std::move(graph));
        t.restore(ck);
        return t;
    }

    static Trainer resume(const Checkpoint& ck, std::vector<Graph> graphs) {
        Trainer t(ck.config, std::move(graphs));
        t.restore(ck);
        return t;
    }

    static Trainer resume_from_config_data(const Checkpoint& ck) {
        if (ck.config.task == TaskType::node) return resume(ck, load_node_dataset(ck.config.dataset_path));
        auto graphs = load_graph_dataset(ck.config.dataset_path);
        std::int64_t cap = ck.config.degree_cap > 0 ? ck.config.degree_cap : max_degree(graphs);
        return resume(ck, degree_onehot(std::move(graphs), cap));
    }

    const TrainConfig& config() const { return cfg_; }
    const Model<T>& model() const { return model_; }
    Model<T>& model() { return model_; }
    std::int64_t epoch() const { return epoch_; }
    const std::vector<double>& loss_trace() const { return loss_trace_; }
    std::int64_t skipped_steps() const { return skipped_steps_; }
    const Graph& node_graph() const { return node_graph_; }
    const std::vector<Graph>& graphs() const { return graphs_; }

    double current_lr_decoder() const {
        return cosine_lr(std::min(epoch_, cfg_.epochs), std::max<std::int64_t>(cfg_.epochs, 1), cfg_.lr_decoder,
                         cfg_.lr_min);
    }

    /// Encoder learning rate: the decoder rate scaled by the configured
    /// ratio (2x unless overridden), so the ratio holds at every step.
    double current_lr_encoder() const { return current_lr_decoder() * cfg_.lr_encoder() / cfg_.lr_decoder; }

    /// Runs one epoch; returns the mean accepted-step loss, or nothing if
    /// every step of the epoch was skipped for a non-finite loss.
    std::optional<double> train_epoch() {
        double lr_d = current_lr_decoder();
        double lr_e = current_lr_encoder();
        double total = 0.0;
        std::int64_t accepted = 0;
        if (cfg_.task == TaskType::node) {
            auto loss = train_step(node_graph_, nullptr, lr_d, lr_e);
            if (loss) {
                total += *loss;
                ++accepted;
            }
        } else {
            std::vector<std::int64_t> order = shuffled_graph_order();
            for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(cfg_.batch_size)) {
                std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(cfg_.batch_size));
                std::vector<Graph> chunk;
                chunk.reserve(hi - lo);
                for (std::size_t i = lo; i < hi; ++i) chunk.push_back(graphs_[static_cast<std::size_t>(order[i])]);
                GraphBatch batch = batch_graphs(chunk);
                auto loss = train_step(batch.merged, &batch, lr_d, lr_e);
                if (loss) {
                    total += *loss;
                    ++accepted;
                }
            }
        }
        ++epoch_;
        if (accepted == 0) return std::nullopt;
        double mean = total / static_cast<double>(accepted);
        loss_trace_.push_back(mean);
        return mean;
    }

    /// Full run with checkpoint emission: an initialization checkpoint, one
    /// every `checkpoint_every` epochs when configured, and a final one.
    /// Returns the list of written checkpoint paths.
    std::vector<std::filesystem::path> run(const std::filesystem::path& out_dir,
                                           const std::function<void(const EpochEvent&)>& on_epoch = {}) {
        std::filesystem::create_directories(out_dir);
        std::vector<std::filesystem::path> written;
        auto emit = [&](const std::string& tag) {
            auto path = out_dir / ("checkpoint-" + tag + ".bin");
            save_checkpoint(snapshot(), path);
            written.push_back(path);
        };
        if (epoch_ == 0) emit("init");
        while (epoch_ < cfg_.epochs) {
            auto loss = train_epoch();
            EpochEvent ev;
            ev.epoch = epoch_;
            ev.loss = loss.value_or(std::numeric_limits<double>::quiet_NaN());
            ev.checkpoint_due =
                (cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0) || epoch_ == cfg_.epochs;
            if (ev.checkpoint_due) emit("epoch" + std::to_string(epoch_));
            if (on_epoch) on_epoch(ev);
        }
        export_loss_trace_csv(loss_trace_, out_dir / "loss_trace.csv");
        return written;
    }

    Checkpoint snapshot() const {
        Checkpoint ck;
        ck.config = cfg_;
        ck.epoch = epoch_;
        ck.rng = rng_;
        ck.loss_trace = loss_trace_;
        ck.encoder_step_count = enc_opt_->step_count();
        ck.decoder_step_count = dec_opt_->step_count();
        model_.store_params(ck.arrays);
        store_moments(*enc_opt_, model_.encoder_params(), "enc", ck.arrays);
        store_moments(*dec_opt_, model_.decoder_params(), "dec", ck.arrays);
        return ck;
    }

private:
    void init_model() {
        cfg_.validate();
        std::int64_t in_dim = cfg_.task == TaskType::node ? node_graph_.d : graphs_.at(0).d;
        model_ = Model<T>::build(cfg_, in_dim);
        OptimizerConfig ocfg;
        ocfg.mode = cfg_.optimizer;
        ocfg.weight_decay = cfg_.weight_decay;
        enc_opt_ = std::make_unique<Optimizer<T>>(tensors_of(model_.encoder_params()), ocfg);
        dec_opt_ = std::make_unique<Optimizer<T>>(tensors_of(model_.decoder_params()), ocfg);
        if (cfg_.task == TaskType::node) {
            x0_cache_.resize(node_graph_.x.size());
            for (std::size_t i = 0; i < x0_cache_.size(); ++i) x0_cache_[i] = static_cast<T>(node_graph_.x[i]);
        }
        schedule_ = std::make_unique<NoiseSchedule>(cfg_.schedule, cfg_.timesteps);
    }

    void restore(const Checkpoint& ck) {
        model_.load_params(ck.arrays);
        load_moments(*enc_opt_, model_.encoder_params(), "enc", ck.arrays);
        load_moments(*dec_opt_, model_.decoder_params(), "dec", ck.arrays);
        enc_opt_->mutable_step_count() = ck.encoder_step_count;
        dec_opt_->mutable_step_count() = ck.decoder_step_count;
        rng_ = ck.rng;
        epoch_ = ck.epoch;
        loss_trace_ = ck.loss_trace;
    }

    static void store_moments(Optimizer<T>& opt, const ParamList<T>& params, const std::string& tag,
                              CheckpointArrays& arrays) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto conv = [](const std::vector<T>& v) {
                std::vector<double> out(v.size());
                for (std::size_t k = 0; k < v.size(); ++k) out[k] = static_cast<double>(v[k]);
                return out;
            };
            arrays.add("adam_m." + tag + "." + params[i].name, params[i].tensor.shape(), conv(opt.first_moments()[i]));
            arrays.add("adam_v." + tag + "." + params[i].name, params[i].tensor.shape(), conv(opt.second_moments()[i]));
        }
    }

    static void load_moments(Optimizer<T>& opt, const ParamList<T>& params, const std::string& tag,
                             const CheckpointArrays& arrays) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& m = arrays.at("adam_m." + tag + "." + params[i].name);
            const auto& v = arrays.at("adam_v." + tag + "." + params[i].name);
            for (std::size_t k = 0; k < m.data.size(); ++k) opt.first_moments()[i][k] = static_cast<T>(m.data[k]);
            for (std::size_t k = 0; k < v.data.size(); ++k) opt.second_moments()[i][k] = static_cast<T>(v.data[k]);
        }
    }

    std::vector<std::int64_t> shuffled_graph_order() {
        std::vector<std::int64_t> order(graphs_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);
        for (std::int64_t i = static_cast<std::int64_t>(order.size()) - 1; i > 0; --i) {
            auto j = static_cast<std::int64_t>(rng_.next_uniform_int(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        return order;
    }

    /// One optimization step on a graph (full graph for node tasks, merged
    /// mini-batch for graph tasks). Encoder sees masked features; the decoder
    /// denoises the clean features conditioned on (t, z).
    std::optional<double> train_step(const Graph& g, const GraphBatch* batch, double lr_d, double lr_e) {
        Representation<T> rep = batch != nullptr ? model_.encoder.encode(*batch, cfg_.mask_ratio, rng_, true)
                                                 : model_.encoder.encode(g, cfg_.mask_ratio, rng_, true);
        std::vector<std::int64_t> t = batch != nullptr ? sample_timesteps_per_graph(*schedule_, *batch, rng_)
                                                       : sample_timesteps_per_node(*schedule_, g.n, rng_);
        const std::vector<T>* x0ptr;
        std::vector<T> x0_local;
        if (cfg_.task == TaskType::node) {
            x0ptr = &x0_cache_;
        } else {
            x0_local.resize(g.x.size());
            for (std::size_t i = 0; i < x0_local.size(); ++i) x0_local[i] = static_cast<T>(g.x[i]);
            x0ptr = &x0_local;
        }
        auto ns = noise(*x0ptr, g.n, g.d, t, *schedule_, rng_);
        auto x0 = Tensor<T>::from_values({g.n, g.d}, *x0ptr);
        auto xt = Tensor<T>::from_values({g.n, g.d}, std::move(ns.xt));
        Tensor<T> pred = batch != nullptr ? model_.unet.forward(xt, t, rep.readout, g, &batch->graph_id)
                                          : model_.unet.forward(xt, t, rep.z, g, nullptr);
        Tensor<T> loss = dsm_loss(pred, x0, t, cfg_.lambda);
        double loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value)) {
            log_warning("non-finite loss at epoch " + std::to_string(epoch_ + 1) + "; step skipped");
            ++skipped_steps_;
            zero_all_grads();
            return std::nullopt;
        }
        loss.backward();
        auto all = tensors_of(model_.all_params());
        bool finite = true;
        for (const auto& p : all) {
            if (!p.has_grad()) continue;
            for (T gv : p.grad_view())
                if (!std::isfinite(static_cast<double>(gv))) finite = false;
        }
        if (!finite) {
            // skip both groups together so their step counts stay in lockstep
            log_warning("non-finite gradient at epoch " + std::to_string(epoch_ + 1) + "; step skipped");
            ++skipped_steps_;
            zero_all_grads();
            return std::nullopt;
        }
        clip_global_grad_norm(all, cfg_.clip_norm);
        enc_opt_->step(lr_e);
        dec_opt_->step(lr_d);
        zero_all_grads();
        return loss_value;
    }

    void zero_all_grads() {
        for (auto& p : model_.all_params()) p.tensor.zero_grad();
    }

    TrainConfig cfg_;
    Graph node_graph_;
    std::vector<Graph> graphs_;
    std::vector<T> x0_cache_;
    Model<T> model_;
    std::unique_ptr<Optimizer<T>> enc_opt_, dec_opt_;
    std::unique_ptr<NoiseSchedule> schedule_;
    RngState rng_;
    std::int64_t epoch_ = 0;
    std::vector<double> loss_trace_;
    std::int64_t skipped_steps_ = 0;
};

}  // namespace graffe
