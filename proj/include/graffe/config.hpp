#pragma once

#include <json.hpp>

#include <optional>
#include <string>

#include "graffe/decoder.hpp"
#include "graffe/diffusion.hpp"
#include "graffe/encoder.hpp"
#include "graffe/optim.hpp"

namespace graffe {

using Json = nlohmann::json;

enum class TaskType { node, graph };

inline std::string to_string(TaskType t) { return t == TaskType::node ? "node" : "graph"; }
inline TaskType task_type_from_string(const std::string& s) {
    if (s == "node") return TaskType::node;
    if (s == "graph") return TaskType::graph;
    throw ConfigError("unknown task type: " + s);
}

enum class Precision { f32, f64 };

inline std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }
inline Precision precision_from_string(const std::string& s) {
    if (s == "f32") return Precision::f32;
    if (s == "f64") return Precision::f64;
    throw ConfigError("unknown precision: " + s);
}

/// Everything a training run needs; serializes to/from JSON and is embedded
/// verbatim in checkpoints.
struct TrainConfig {
    std::string dataset_path;
    TaskType task = TaskType::node;

    EncoderConfig encoder;
    DecoderConfig decoder;

    ScheduleKind schedule = ScheduleKind::sigmoid;
    std::int64_t timesteps = 1000;
    double mask_ratio = 0.7;
    LambdaTable lambda;

    double lr_decoder = 1e-4;
    std::optional<double> lr_encoder_override;  // defaults to 2x decoder
    double lr_min = 0.0;
    OptMode optimizer = OptMode::adam;
    double weight_decay = 0.0;
    double clip_norm = 1.0;
    std::int64_t epochs = 1000;
    std::int64_t batch_size = 32;  // graph tasks
    std::uint64_t seed = 0;
    Precision precision = Precision::f32;
    std::int64_t checkpoint_every = 0;  // 0 = only initial and final
    std::int64_t degree_cap = 0;        // 0 = dataset max degree

    double lr_encoder() const { return lr_encoder_override.value_or(2.0 * lr_decoder); }
    bool lr_encoder_overridden() const { return lr_encoder_override.has_value(); }

    void validate() const {
        encoder.validate();
        decoder.validate();
        if (lr_decoder <= 0) throw ConfigError("trainer: decoder learning rate must be positive");
        if (epochs < 0) throw ConfigError("trainer: epochs must be non-negative");
        if (batch_size < 1) throw ConfigError("trainer: batch size must be positive");
        if (mask_ratio < 0 || mask_ratio > 1) throw ConfigError("trainer: mask ratio must lie in [0,1]");
        if (!lambda.values.empty() && static_cast<std::int64_t>(lambda.values.size()) != timesteps)
            throw ConfigError("trainer: lambda table length must equal T");
        if (task == TaskType::node && decoder.layer_kind != DecoderLayerKind::mlp)
            throw ConfigError("trainer: node tasks use the mlp decoder with sum fusion");
        if (task == TaskType::graph && decoder.layer_kind != DecoderLayerKind::gnn)
            throw ConfigError("trainer: graph tasks use the gnn decoder with adanorm fusion");
    }
};

namespace detail {

inline void check_known_keys(const Json& j, std::initializer_list<const char*> known,
                             const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown config key: " + (scope.empty() ? it.key() : scope + "." + it.key()));
    }
}

}  // namespace detail

inline Json to_json(const TrainConfig& c) {
    Json j;
    j["dataset"] = {{"path", c.dataset_path}, {"task", to_string(c.task)}};
    j["encoder"] = {{"layer_kind", to_string(c.encoder.layer_kind)}, {"layers", c.encoder.layers},
                    {"hidden", c.encoder.hidden},                    {"heads", c.encoder.heads},
                    {"feat_drop", c.encoder.feat_drop},              {"att_drop", c.encoder.att_drop},
                    {"readout", to_string(c.encoder.readout)}};
    j["decoder"] = {{"depth", c.decoder.depth},
                    {"base", c.decoder.base},
                    {"layer_kind", to_string(c.decoder.layer_kind)},
                    {"fusion", to_string(c.decoder.fusion)},
                    {"time_width", c.decoder.time_width}};
    j["diffusion"] = {{"schedule", to_string(c.schedule)},
                      {"timesteps", c.timesteps},
                      {"mask_ratio", c.mask_ratio},
                      {"lambda", c.lambda.values}};
    j["trainer"] = {{"lr_decoder", c.lr_decoder},
                    {"lr_min", c.lr_min},
                    {"optimizer", to_string(c.optimizer)},
                    {"weight_decay", c.weight_decay},
                    {"clip_norm", c.clip_norm},
                    {"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"seed", c.seed},
                    {"precision", to_string(c.precision)},
                    {"checkpoint_every", c.checkpoint_every},
                    {"degree_cap", c.degree_cap}};
    if (c.lr_encoder_override) j["trainer"]["lr_encoder"] = *c.lr_encoder_override;
    return j;
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    detail::check_known_keys(j, {"dataset", "encoder", "decoder", "diffusion", "trainer"}, "");
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        detail::check_known_keys(d, {"path", "task"}, "dataset");
        if (d.contains("path")) c.dataset_path = d.at("path").get<std::string>();
        if (d.contains("task")) c.task = task_type_from_string(d.at("task").get<std::string>());
    }
    if (j.contains("encoder")) {
        const auto& e = j.at("encoder");
        detail::check_known_keys(e, {"layer_kind", "layers", "hidden", "heads", "feat_drop", "att_drop", "readout"},
                                 "encoder");
        if (e.contains("layer_kind")) c.encoder.layer_kind = layer_kind_from_string(e.at("layer_kind").get<std::string>());
        if (e.contains("layers")) c.encoder.layers = e.at("layers").get<std::int64_t>();
        if (e.contains("hidden")) c.encoder.hidden = e.at("hidden").get<std::int64_t>();
        if (e.contains("heads")) c.encoder.heads = e.at("heads").get<std::int64_t>();
        if (e.contains("feat_drop")) c.encoder.feat_drop = e.at("feat_drop").get<double>();
        if (e.contains("att_drop")) c.encoder.att_drop = e.at("att_drop").get<double>();
        if (e.contains("readout")) c.encoder.readout = readout_kind_from_string(e.at("readout").get<std::string>());
    }
    if (j.contains("decoder")) {
        const auto& d = j.at("decoder");
        detail::check_known_keys(d, {"depth", "base", "layer_kind", "fusion", "time_width"}, "decoder");
        if (d.contains("depth")) c.decoder.depth = d.at("depth").get<std::int64_t>();
        if (d.contains("base")) c.decoder.base = d.at("base").get<std::int64_t>();
        if (d.contains("layer_kind"))
            c.decoder.layer_kind = decoder_layer_kind_from_string(d.at("layer_kind").get<std::string>());
        if (d.contains("fusion")) c.decoder.fusion = fusion_kind_from_string(d.at("fusion").get<std::string>());
        if (d.contains("time_width")) c.decoder.time_width = d.at("time_width").get<std::int64_t>();
    }
    if (j.contains("diffusion")) {
        const auto& d = j.at("diffusion");
        detail::check_known_keys(d, {"schedule", "timesteps", "mask_ratio", "lambda"}, "diffusion");
        if (d.contains("schedule")) c.schedule = schedule_kind_from_string(d.at("schedule").get<std::string>());
        if (d.contains("timesteps")) c.timesteps = d.at("timesteps").get<std::int64_t>();
        if (d.contains("mask_ratio")) c.mask_ratio = d.at("mask_ratio").get<double>();
        if (d.contains("lambda")) c.lambda.values = d.at("lambda").get<std::vector<double>>();
    }
    if (j.contains("trainer")) {
        const auto& t = j.at("trainer");
        detail::check_known_keys(t,
                                 {"lr_decoder", "lr_encoder", "lr_min", "optimizer", "weight_decay", "clip_norm",
                                  "epochs", "batch_size", "seed", "precision", "checkpoint_every", "degree_cap"},
                                 "trainer");
        if (t.contains("lr_decoder")) c.lr_decoder = t.at("lr_decoder").get<double>();
        if (t.contains("lr_encoder")) c.lr_encoder_override = t.at("lr_encoder").get<double>();
        if (t.contains("lr_min")) c.lr_min = t.at("lr_min").get<double>();
        if (t.contains("optimizer")) c.optimizer = opt_mode_from_string(t.at("optimizer").get<std::string>());
        if (t.contains("weight_decay")) c.weight_decay = t.at("weight_decay").get<double>();
        if (t.contains("clip_norm")) c.clip_norm = t.at("clip_norm").get<double>();
        if (t.contains("epochs")) c.epochs = t.at("epochs").get<std::int64_t>();
        if (t.contains("batch_size")) c.batch_size = t.at("batch_size").get<std::int64_t>();
        if (t.contains("seed")) c.seed = t.at("seed").get<std::uint64_t>();
        if (t.contains("precision")) c.precision = precision_from_string(t.at("precision").get<std::string>());
        if (t.contains("checkpoint_every")) c.checkpoint_every = t.at("checkpoint_every").get<std::int64_t>();
        if (t.contains("degree_cap")) c.degree_cap = t.at("degree_cap").get<std::int64_t>();
    }
    return c;
}

/// Applies one dotted-key override ("trainer.lr_decoder=2e-4") onto a JSON
/// config. The key path must already exist or match a known schema key;
/// anything else is rejected with the offending key named.
inline void apply_override(Json& j, const std::string& dotted_key, const std::string& value) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : dotted_key) {
        if (ch == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    parts.push_back(cur);
    if (parts.empty()) throw ConfigError("empty override key");

    Json* node = &j;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->contains(parts[i])) {
            // allow introducing a known top-level section
            Json probe = Json::object();
            probe[parts[i]] = Json::object();
            (*node)[parts[i]] = Json::object();
        }
        node = &(*node)[parts[i]];
        if (!node->is_object()) throw ConfigError("override key path crosses a non-object: " + dotted_key);
    }

    Json parsed;
    try {
        parsed = Json::parse(value);
    } catch (...) {
        parsed = value;  // plain strings need no quotes on the command line
    }
    (*node)[parts.back()] = parsed;
    // reject unknown keys by round-tripping through the typed config
    train_config_from_json(j);
}

}  // namespace graffe
