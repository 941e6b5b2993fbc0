#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "graffe/config.hpp"
#include "graffe/rng.hpp"

namespace graffe {

/// On-disk checkpoint: an 8-byte magic and version, a JSON header holding the
/// config snapshot, scalar training state and an array manifest
/// (name, shape, offset, count), then the raw little-endian arrays.
struct CheckpointArrays {
    struct Entry {
        std::string name;
        Shape shape;
        std::vector<double> data;  // held as double in memory; width on disk follows precision
    };
    std::vector<Entry> entries;
    std::map<std::string, std::size_t> index;

    void add(const std::string& name, Shape shape, std::vector<double> data) {
        index[name] = entries.size();
        entries.push_back({name, std::move(shape), std::move(data)});
    }

    const Entry& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw IoError("checkpoint: missing array '" + name + "'");
        return entries[it->second];
    }

    bool has(const std::string& name) const { return index.count(name) > 0; }
};

struct Checkpoint {
    TrainConfig config;
    std::int64_t epoch = 0;
    RngState rng;
    std::vector<double> loss_trace;
    std::int64_t encoder_step_count = 0;
    std::int64_t decoder_step_count = 0;
    CheckpointArrays arrays;
};

namespace detail {

constexpr char kCheckpointMagic[8] = {'G', 'R', 'A', 'F', 'F', 'E', 'C', '1'};

template <class T>
void write_array(std::ofstream& out, const std::vector<double>& data) {
    std::vector<T> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) buf[i] = static_cast<T>(data[i]);
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(T)));
}

template <class T>
std::vector<double> read_array(std::ifstream& in, std::size_t count) {
    std::vector<T> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(T)));
    if (!in) throw IoError("checkpoint: truncated array payload");
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(buf[i]);
    return out;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path.string());

    const std::size_t elem = ck.config.precision == Precision::f32 ? sizeof(float) : sizeof(double);
    Json manifest = Json::array();
    std::uint64_t offset = 0;
    for (const auto& e : ck.arrays.entries) {
        manifest.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}, {"count", e.data.size()}});
        offset += e.data.size() * elem;
    }
    Json header;
    header["format_version"] = 1;
    header["config"] = to_json(ck.config);
    header["epoch"] = ck.epoch;
    header["rng"] = {{"seed", ck.rng.seed}, {"counter", ck.rng.counter}};
    header["loss_trace"] = ck.loss_trace;
    header["optimizer"] = {{"encoder_step_count", ck.encoder_step_count},
                           {"decoder_step_count", ck.decoder_step_count}};
    header["manifest"] = manifest;
    std::string header_text = header.dump();

    out.write(detail::kCheckpointMagic, 8);
    std::uint64_t len = header_text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& e : ck.arrays.entries) {
        if (ck.config.precision == Precision::f32)
            detail::write_array<float>(out, e.data);
        else
            detail::write_array<double>(out, e.data);
    }
    if (!out) throw IoError("checkpoint write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    std::string header_text(len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(len));
    if (!in) throw IoError("checkpoint: truncated header");
    Json header = Json::parse(header_text);
    if (header.at("format_version").get<int>() != 1) throw IoError("unsupported checkpoint format version");

    Checkpoint ck;
    ck.config = train_config_from_json(header.at("config"));
    ck.epoch = header.at("epoch").get<std::int64_t>();
    ck.rng.seed = header.at("rng").at("seed").get<std::uint64_t>();
    ck.rng.counter = header.at("rng").at("counter").get<std::uint64_t>();
    ck.loss_trace = header.at("loss_trace").get<std::vector<double>>();
    ck.encoder_step_count = header.at("optimizer").at("encoder_step_count").get<std::int64_t>();
    ck.decoder_step_count = header.at("optimizer").at("decoder_step_count").get<std::int64_t>();

    for (const auto& m : header.at("manifest")) {
        std::size_t count = m.at("count").get<std::size_t>();
        std::vector<double> data = ck.config.precision == Precision::f32
                                       ? detail::read_array<float>(in, count)
                                       : detail::read_array<double>(in, count);
        ck.arrays.add(m.at("name").get<std::string>(), m.at("shape").get<Shape>(), std::move(data));
    }
    return ck;
}

inline void export_loss_trace_csv(const std::vector<double>& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i) out << (i + 1) << ',' << trace[i] << "\n";
}

}  // namespace graffe
