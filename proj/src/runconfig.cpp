#include "facecorr/runconfig.hpp"

#include "facecorr/error.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace facecorr {

namespace {

struct KeyDoc {
    const char* key;
    const char* doc;
};

constexpr KeyDoc kSchema[] = {
    {"config_version", "format version; must be 1"},
    {"seed", "master RNG seed (unsigned integer)"},
    {"points", "template / decoder vertex count"},
    {"latent_id", "identity latent dimension"},
    {"latent_exp", "expression latent dimension"},
    {"encoder_widths", "comma-separated per-point MLP widths"},
    {"decoder_hidden", "decoder hidden width"},
    {"lr", "initial Adam learning rate"},
    {"lr_halve_every", "halve the learning rate every this many epochs"},
    {"batch_size", "samples per optimizer step"},
    {"epochs_synthetic", "synthetic-only epochs per phase"},
    {"epochs_mixed", "mixed-data epochs per phase"},
    {"lambda_normal", "normal loss weight"},
    {"lambda_edge", "edge-length loss weight"},
    {"lambda_lap", "mouth Laplacian weight"},
    {"epsilon", "flying-vertex squared-distance cutoff"},
    {"counterpart_mode", "auto | closest_vertex | normal_ray"},
    {"cone_half_angle_deg", "normal-ray cone half angle in degrees"},
    {"ray_max_t", "normal-ray reach along the ray"},
    {"switch_window", "smoothing window for the saturation trigger"},
    {"switch_patience", "consecutive stalled epochs before switching"},
    {"switch_min_improvement", "relative improvement counted as progress"},
    {"template_bias_init", "seed the identity decoder bias with the template (true/false)"},
};

bool known_key(const std::string& key) {
    for (const auto& kd : kSchema)
        if (key == kd.key) return true;
    return false;
}

}  // namespace

TrainConfig read_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_io("cannot open run config '" + path + "'");

    TrainConfig cfg;
    bool saw_version = false;
    std::string line;
    int lineno = 0;

    auto config_fail = [&](const std::string& msg) {
        fail_config(path + ":" + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream iss(line);
        std::string key, value;
        if (!(iss >> key)) continue;
        if (!(iss >> value)) config_fail("key '" + key + "' has no value");
        std::string extra;
        if (iss >> extra) config_fail("trailing token '" + extra + "' after value");
        if (!known_key(key)) config_fail("unknown key '" + key + "'");

        auto as_int = [&]() {
            try {
                size_t pos;
                const long v = std::stol(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(value);
                return static_cast<int>(v);
            } catch (const std::exception&) {
                config_fail("value of '" + key + "' must be an integer, got '" + value + "'");
            }
            return 0;
        };
        auto as_u64 = [&]() {
            try {
                size_t pos;
                const unsigned long long v = std::stoull(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(value);
                return static_cast<uint64_t>(v);
            } catch (const std::exception&) {
                config_fail("value of '" + key + "' must be a non-negative integer, got '" + value + "'");
            }
            return uint64_t{0};
        };
        auto as_double = [&]() {
            try {
                size_t pos;
                const double v = std::stod(value, &pos);
                if (pos != value.size()) throw std::invalid_argument(value);
                return v;
            } catch (const std::exception&) {
                config_fail("value of '" + key + "' must be a number, got '" + value + "'");
            }
            return 0.0;
        };
        auto as_bool = [&]() {
            if (value == "true") return true;
            if (value == "false") return false;
            config_fail("value of '" + key + "' must be true or false, got '" + value + "'");
            return false;
        };

        if (key == "config_version") {
            if (as_int() != 1) config_fail("unsupported config version '" + value + "'");
            saw_version = true;
        } else if (key == "seed") {
            cfg.seed = as_u64();
        } else if (key == "points") {
            cfg.arch.points = as_int();
        } else if (key == "latent_id") {
            cfg.arch.latent_id = as_int();
        } else if (key == "latent_exp") {
            cfg.arch.latent_exp = as_int();
        } else if (key == "encoder_widths") {
            std::vector<int> widths;
            std::istringstream ws(value);
            std::string tok;
            while (std::getline(ws, tok, ',')) {
                try {
                    widths.push_back(std::stoi(tok));
                } catch (const std::exception&) {
                    config_fail("encoder_widths must be a comma-separated integer list");
                }
            }
            if (widths.empty()) config_fail("encoder_widths is empty");
            cfg.arch.encoder_widths = widths;
        } else if (key == "decoder_hidden") {
            cfg.arch.decoder_hidden = as_int();
        } else if (key == "lr") {
            cfg.lr_init = as_double();
        } else if (key == "lr_halve_every") {
            cfg.lr_halve_every = as_int();
        } else if (key == "batch_size") {
            cfg.batch_size = as_int();
        } else if (key == "epochs_synthetic") {
            cfg.epochs_synthetic = as_int();
        } else if (key == "epochs_mixed") {
            cfg.epochs_mixed = as_int();
        } else if (key == "lambda_normal") {
            cfg.weights.lambda_normal = as_double();
        } else if (key == "lambda_edge") {
            cfg.weights.lambda_edge = as_double();
        } else if (key == "lambda_lap") {
            cfg.weights.lambda_lap = as_double();
        } else if (key == "epsilon") {
            cfg.weights.epsilon = as_double();
        } else if (key == "counterpart_mode") {
            if (value == "auto") {
                cfg.auto_switch = true;
                cfg.weights.counterpart_mode = CounterpartMode::ClosestVertex;
            } else if (value == "closest_vertex") {
                cfg.auto_switch = false;
                cfg.weights.counterpart_mode = CounterpartMode::ClosestVertex;
            } else if (value == "normal_ray") {
                cfg.auto_switch = false;
                cfg.weights.counterpart_mode = CounterpartMode::NormalRay;
            } else {
                config_fail("counterpart_mode must be auto, closest_vertex or normal_ray");
            }
        } else if (key == "cone_half_angle_deg") {
            cfg.weights.cone_half_angle = as_double() * M_PI / 180.0;
        } else if (key == "ray_max_t") {
            cfg.weights.ray_max_t = as_double();
        } else if (key == "switch_window") {
            cfg.switch_window = as_int();
        } else if (key == "switch_patience") {
            cfg.switch_patience = as_int();
        } else if (key == "switch_min_improvement") {
            cfg.switch_min_improvement = as_double();
        } else if (key == "template_bias_init") {
            cfg.template_bias_init = as_bool();
        }
    }
    if (!saw_version) fail_config(path + ": missing 'config_version 1' record");
    validate(cfg);
    return cfg;
}

void write_run_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) fail_io("cannot open '" + path + "' for writing");
    char buf[256];
    out << "config_version 1\n";
    out << "seed " << cfg.seed << "\n";
    out << "points " << cfg.arch.points << "\n";
    out << "latent_id " << cfg.arch.latent_id << "\n";
    out << "latent_exp " << cfg.arch.latent_exp << "\n";
    out << "encoder_widths ";
    for (size_t i = 0; i < cfg.arch.encoder_widths.size(); ++i)
        out << (i ? "," : "") << cfg.arch.encoder_widths[i];
    out << "\n";
    out << "decoder_hidden " << cfg.arch.decoder_hidden << "\n";
    std::snprintf(buf, sizeof buf, "lr %.17g\n", cfg.lr_init);
    out << buf;
    out << "lr_halve_every " << cfg.lr_halve_every << "\n";
    out << "batch_size " << cfg.batch_size << "\n";
    out << "epochs_synthetic " << cfg.epochs_synthetic << "\n";
    out << "epochs_mixed " << cfg.epochs_mixed << "\n";
    std::snprintf(buf, sizeof buf, "lambda_normal %.17g\nlambda_edge %.17g\nlambda_lap %.17g\nepsilon %.17g\n",
                  cfg.weights.lambda_normal, cfg.weights.lambda_edge, cfg.weights.lambda_lap, cfg.weights.epsilon);
    out << buf;
    out << "counterpart_mode "
        << (cfg.auto_switch ? "auto" : to_string(cfg.weights.counterpart_mode)) << "\n";
    std::snprintf(buf, sizeof buf, "cone_half_angle_deg %.17g\nray_max_t %.17g\n",
                  cfg.weights.cone_half_angle * 180.0 / M_PI, cfg.weights.ray_max_t);
    out << buf;
    out << "switch_window " << cfg.switch_window << "\n";
    out << "switch_patience " << cfg.switch_patience << "\n";
    std::snprintf(buf, sizeof buf, "switch_min_improvement %.17g\n", cfg.switch_min_improvement);
    out << buf;
    out << "template_bias_init " << (cfg.template_bias_init ? "true" : "false") << "\n";
    if (!out) fail_io("failed writing '" + path + "'");
}

std::string run_config_schema() {
    std::string out;
    for (const auto& kd : kSchema) {
        out += kd.key;
        out += ": ";
        out += kd.doc;
        out += "\n";
    }
    return out;
}

}  // namespace facecorr
