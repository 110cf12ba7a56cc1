#include "facecorr/checkpoint.hpp"

#include "facecorr/error.hpp"

#include "json.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace facecorr {

namespace {

using nlohmann::json;

constexpr char kMagic[] = "FACECORR-CKPT1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

json weights_to_json(const LossWeights& w) {
    return json{{"lambda_normal", w.lambda_normal},
                {"lambda_edge", w.lambda_edge},
                {"lambda_lap", w.lambda_lap},
                {"epsilon", w.epsilon},
                {"counterpart_mode", to_string(w.counterpart_mode)},
                {"cone_half_angle", w.cone_half_angle},
                {"ray_max_t", w.ray_max_t}};
}

LossWeights weights_from_json(const json& j) {
    LossWeights w;
    w.lambda_normal = j.at("lambda_normal").get<double>();
    w.lambda_edge = j.at("lambda_edge").get<double>();
    w.lambda_lap = j.at("lambda_lap").get<double>();
    w.epsilon = j.at("epsilon").get<double>();
    const auto mode = j.at("counterpart_mode").get<std::string>();
    require(mode == "closest_vertex" || mode == "normal_ray", ErrorCode::Io,
            "unknown counterpart mode '" + mode + "' in checkpoint");
    w.counterpart_mode = mode == "closest_vertex" ? CounterpartMode::ClosestVertex : CounterpartMode::NormalRay;
    w.cone_half_angle = j.at("cone_half_angle").get<double>();
    w.ray_max_t = j.at("ray_max_t").get<double>();
    return w;
}

json arch_to_json(const ArchConfig& a) {
    return json{{"points", a.points},
                {"latent_id", a.latent_id},
                {"latent_exp", a.latent_exp},
                {"encoder_widths", a.encoder_widths},
                {"decoder_hidden", a.decoder_hidden}};
}

ArchConfig arch_from_json(const json& j) {
    ArchConfig a;
    a.points = j.at("points").get<int>();
    a.latent_id = j.at("latent_id").get<int>();
    a.latent_exp = j.at("latent_exp").get<int>();
    a.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
    a.decoder_hidden = j.at("decoder_hidden").get<int>();
    return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const ShapeModel& model, const CheckpointInfo& info) {
    const auto params = model.parameter_values();

    json manifest;
    manifest["format_version"] = info.format_version;
    manifest["arch"] = arch_to_json(info.arch);
    manifest["seed"] = info.seed;
    manifest["phase"] = info.phase;
    manifest["epoch"] = info.epoch;
    manifest["weights"] = weights_to_json(info.weights);
    json plist = json::array();
    for (const auto& [name, tensor] : params)
        plist.push_back(json{{"name", name}, {"rows", tensor->rows}, {"cols", tensor->cols}});
    manifest["params"] = plist;

    const std::string text = manifest.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) fail_io("cannot open '" + path + "' for writing");
    out.write(kMagic, kMagicLen);
    const uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [name, tensor] : params) {
        (void)name;
        out.write(reinterpret_cast<const char*>(tensor->data.data()),
                  static_cast<std::streamsize>(tensor->data.size() * 8));
    }
    if (!out) fail_io("failed writing checkpoint '" + path + "'");
}

ShapeModel load_checkpoint(const std::string& path, CheckpointInfo* info_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail_io("cannot open checkpoint '" + path + "'");

    char magic[kMagicLen];
    in.read(magic, kMagicLen);
    require(in && std::memcmp(magic, kMagic, kMagicLen) == 0, ErrorCode::Io,
            "'" + path + "' is not a facecorr checkpoint");
    uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 8);
    require(static_cast<bool>(in), ErrorCode::Io, "truncated checkpoint manifest length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    require(static_cast<bool>(in), ErrorCode::Io, "truncated checkpoint manifest");

    json manifest;
    try {
        manifest = json::parse(text);
    } catch (const std::exception& e) {
        fail_io("checkpoint manifest is not valid JSON: " + std::string(e.what()));
    }

    CheckpointInfo info;
    info.format_version = manifest.at("format_version").get<int>();
    require(info.format_version == 1, ErrorCode::Io,
            "unsupported checkpoint format version " + std::to_string(info.format_version));
    info.arch = arch_from_json(manifest.at("arch"));
    info.seed = manifest.at("seed").get<uint64_t>();
    info.phase = manifest.at("phase").get<int>();
    info.epoch = manifest.at("epoch").get<int>();
    info.weights = weights_from_json(manifest.at("weights"));

    ShapeModel model(info.arch, info.seed);
    auto params = model.parameters();
    const auto& plist = manifest.at("params");
    require(plist.size() == params.size(), ErrorCode::Io,
            "checkpoint declares " + std::to_string(plist.size()) + " parameter blocks, model has " +
                std::to_string(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& decl = plist.at(i);
        require(decl.at("name").get<std::string>() == params[i].name, ErrorCode::Io,
                "checkpoint parameter order mismatch at block " + std::to_string(i));
        require(decl.at("rows").get<int>() == params[i].value->rows &&
                    decl.at("cols").get<int>() == params[i].value->cols,
                ErrorCode::Io, "checkpoint shape mismatch for '" + params[i].name + "'");
        in.read(reinterpret_cast<char*>(params[i].value->data.data()),
                static_cast<std::streamsize>(params[i].value->data.size() * 8));
        require(static_cast<bool>(in), ErrorCode::Io, "truncated parameter block '" + params[i].name + "'");
    }
    in.peek();
    require(in.eof(), ErrorCode::Io, "trailing bytes after the declared parameter blocks");

    if (info_out) *info_out = info;
    return model;
}

}  // namespace facecorr
