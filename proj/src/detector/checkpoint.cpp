#include "involve/detector/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "involve/errors.h"

namespace involve::detector {

namespace {

constexpr char kMagic[8] = {'I', 'N', 'V', 'W', 'T', 'S', '0', '1'};

static_assert(std::endian::native == std::endian::little,
              "weights.bin is written in host order; big-endian hosts are unsupported");

nlohmann::json shape_json(const EncoderShape& s) {
    return {{"vocab_size", s.vocab_size}, {"max_len", s.max_len}, {"hidden", s.hidden},
            {"layers", s.layers},         {"heads", s.heads},     {"ffn", s.ffn}};
}

EncoderShape shape_from_json(const nlohmann::json& j) {
    EncoderShape s;
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.max_len = j.at("max_len").get<std::size_t>();
    s.hidden = j.at("hidden").get<std::size_t>();
    s.layers = j.at("layers").get<std::size_t>();
    s.heads = j.at("heads").get<std::size_t>();
    s.ffn = j.at("ffn").get<std::size_t>();
    return s;
}

void write_checkpoint_files(const std::filesystem::path& dir, const Detector& detector,
                            const TrainingState* state) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory " + dir.string());

    const auto params = detector.model().params();
    {
        std::ofstream out(dir / "weights.bin", std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / "weights.bin").string());
        const std::uint64_t count = params.size();
        out.write(kMagic, sizeof kMagic);
        out.write(reinterpret_cast<const char*>(&count), sizeof count);
        out.write(reinterpret_cast<const char*>(params.data()),
                  static_cast<std::streamsize>(params.size() * sizeof(double)));
        if (!out) throw IoError("short write to " + (dir / "weights.bin").string());
    }

    nlohmann::json meta = {{"format", "involve-checkpoint/1"},
                           {"config", to_json(detector.config())},
                           {"shape", shape_json(detector.model().shape())}};
    if (state != nullptr) {
        meta["best_epoch"] = state->best_epoch;
        meta["best_metric"] = state->best_metric;
        meta["epochs_run"] = state->epoch;
        meta["train_size"] = state->train_size;
        meta["val_size"] = state->val_size;
    }
    {
        std::ofstream out(dir / "config.json", std::ios::trunc);
        if (!out) throw IoError("cannot write " + (dir / "config.json").string());
        out << meta.dump(2) << '\n';
    }
    if (state != nullptr) write_training_curve(dir / "training_curve.csv", state->curve);
}

}  // namespace

void write_training_curve(const std::filesystem::path& path, const std::vector<EpochStats>& curve) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_total,train_mse,train_ce,val_total,val_mse,val_ce\n";
    for (const auto& e : curve) {
        out << fmt::format("{},{:.17g},{:.17g},{:.17g}", e.epoch, e.train.total, e.train.mse,
                           e.train.ce);
        if (e.val) {
            out << fmt::format(",{:.17g},{:.17g},{:.17g}\n", e.val->total, e.val->mse, e.val->ce);
        } else {
            out << ",,,\n";
        }
    }
}

void save_checkpoint(const std::filesystem::path& dir, const Detector& detector,
                     const TrainingState& state) {
    write_checkpoint_files(dir, detector, &state);
}

void save_checkpoint(const std::filesystem::path& dir, const Detector& detector) {
    write_checkpoint_files(dir, detector, nullptr);
}

Detector load_checkpoint(const std::filesystem::path& dir) {
    nlohmann::json meta;
    {
        std::ifstream in(dir / "config.json");
        if (!in) throw ModelLoadError("no checkpoint at " + dir.string());
        try {
            meta = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            throw ModelLoadError("corrupt checkpoint config: " + std::string(e.what()));
        }
    }
    DetectorConfig config;
    EncoderShape shape;
    try {
        if (meta.at("format").get<std::string>() != "involve-checkpoint/1") {
            throw ModelLoadError("unsupported checkpoint format");
        }
        config = config_from_json(meta.at("config"));
        shape = shape_from_json(meta.at("shape"));
    } catch (const nlohmann::json::exception& e) {
        throw ModelLoadError("corrupt checkpoint config: " + std::string(e.what()));
    } catch (const ConfigError& e) {
        throw ModelLoadError(std::string("corrupt checkpoint config: ") + e.what());
    }
    require_encoder(config.encoder);

    std::ifstream in(dir / "weights.bin", std::ios::binary);
    if (!in) throw ModelLoadError("missing weights in " + dir.string());
    char magic[sizeof kMagic];
    std::uint64_t count = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw ModelLoadError("bad weights header in " + dir.string());
    }
    std::error_code ec;
    const auto bytes = std::filesystem::file_size(dir / "weights.bin", ec);
    if (ec || bytes != sizeof kMagic + sizeof count + count * sizeof(double)) {
        throw ModelLoadError("weights size does not match its header in " + dir.string());
    }
    std::vector<double> params(count);
    in.read(reinterpret_cast<char*>(params.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw ModelLoadError("truncated weights in " + dir.string());
    try {
        return Detector(config, DualHeadModel(shape, std::move(params)));
    } catch (const ConfigError& e) {
        throw ModelLoadError(e.what());
    }
}

}  // namespace involve::detector
