#include "crend/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace crend {

namespace {

struct KeyBinding {
    std::function<std::string(const TrainConfig&)> read;
    std::function<void(TrainConfig&, const std::string&)> write;
};

template <typename T>
T parse_value(const std::string& key, const std::string& text);

template <>
double parse_value<double>(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text +
                                    "' as a number");
    }
}

template <>
int parse_value<int>(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text +
                                    "' as an integer");
    }
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument(text);
        return static_cast<std::uint64_t>(v);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text +
                                    "' as an unsigned integer");
    }
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + text +
                                "' as a boolean");
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename T>
KeyBinding bind(const std::string& key, T TrainConfig::* field) {
    return {
        [field](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, double>) return format_double(c.*field);
            else if constexpr (std::is_same_v<T, bool>) return std::string(c.*field ? "true" : "false");
            else return std::to_string(c.*field);
        },
        [key, field](TrainConfig& c, const std::string& v) { c.*field = parse_value<T>(key, v); },
    };
}

template <typename Sub, typename T>
KeyBinding bind_nested(const std::string& key, Sub TrainConfig::* sub, T Sub::* field) {
    return {
        [sub, field](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, double>) return format_double(c.*sub.*field);
            else return std::to_string(c.*sub.*field);
        },
        [key, sub, field](TrainConfig& c, const std::string& v) {
            c.*sub.*field = parse_value<T>(key, v);
        },
    };
}

using Registry = std::vector<std::pair<std::string, KeyBinding>>;

const Registry& registry() {
    static const Registry reg = [] {
        Registry r;
        auto add = [&r](const std::string& key, KeyBinding b) {
            r.emplace_back(key, std::move(b));
        };
        add("lr", bind("lr", &TrainConfig::lr));
        add("lr_decay_factor", bind("lr_decay_factor", &TrainConfig::lr_decay_factor));
        add("lr_decay_every", bind("lr_decay_every", &TrainConfig::lr_decay_every));
        add("weight_decay", bind("weight_decay", &TrainConfig::weight_decay));
        add("batch_size", bind("batch_size", &TrainConfig::batch_size));
        add("epochs", bind("epochs", &TrainConfig::epochs));
        add("seed", bind("seed", &TrainConfig::seed));
        add("threads", bind("threads", &TrainConfig::threads));
        add("branch_supervision", bind("branch_supervision", &TrainConfig::branch_supervision));
        add("render_targets_from_prediction",
            bind("render_targets_from_prediction", &TrainConfig::render_targets_from_prediction));
        add("lambda_render", bind_nested("lambda_render", &TrainConfig::renderer,
                                         &RendererConfig::loss_weight));
        add("image_size",
            bind_nested("image_size", &TrainConfig::generator, &GeneratorConfig::image_size));
        add("grid_size",
            bind_nested("grid_size", &TrainConfig::generator, &GeneratorConfig::grid_size));
        add("backbone_channels", bind_nested("backbone_channels", &TrainConfig::generator,
                                             &GeneratorConfig::backbone_channels));
        add("fused_channels", bind_nested("fused_channels", &TrainConfig::generator,
                                          &GeneratorConfig::fused_channels));
        add("k_vertices",
            bind_nested("k_vertices", &TrainConfig::generator, &GeneratorConfig::num_vertices));
        add("gcn_layers",
            bind_nested("gcn_layers", &TrainConfig::generator, &GeneratorConfig::gcn_layers));
        add("gcn_hidden",
            bind_nested("gcn_hidden", &TrainConfig::generator, &GeneratorConfig::gcn_hidden));
        add("refine_iterations", bind_nested("refine_iterations", &TrainConfig::generator,
                                             &GeneratorConfig::refine_iterations));
        add("train_points_per_vertex",
            bind_nested("train_points_per_vertex", &TrainConfig::renderer,
                        &RendererConfig::train_samples_per_vertex));
        add("train_offset_range", bind_nested("train_offset_range", &TrainConfig::renderer,
                                              &RendererConfig::train_offset_range));
        add("grid_n",
            bind_nested("grid_n", &TrainConfig::renderer, &RendererConfig::test_grid_side));
        add("square_s",
            bind_nested("square_s", &TrainConfig::renderer, &RendererConfig::test_square_size));
        add("threshold",
            bind_nested("threshold", &TrainConfig::renderer, &RendererConfig::fg_threshold));
        return r;
    }();
    return reg;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

void TrainConfig::validate() const {
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("TrainConfig: epochs must be >= 0");
    if (lr_decay_every < 1) throw std::invalid_argument("TrainConfig: lr_decay_every must be >= 1");
    generator.validate();
    renderer.validate();
}

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> k;
        for (const auto& [key, binding] : registry()) k.push_back(key);
        return k;
    }();
    return keys;
}

void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& [name, binding] : registry()) {
        if (name == key) {
            binding.write(cfg, value);
            return;
        }
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

TrainConfig parse_config_text(const std::string& text, const std::string& context) {
    std::istringstream in(text);
    TrainConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(context + " line " + std::to_string(line_no) +
                                        ": expected 'key = value', got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        try {
            apply_config_entry(cfg, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(context + " line " + std::to_string(line_no) + ": " +
                                        e.what());
        }
    }
    return cfg;
}

TrainConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config_file: cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str(), path);
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    for (const auto& [key, binding] : registry()) {
        out += key;
        out += " = ";
        out += binding.read(cfg);
        out += "\n";
    }
    return out;
}

}  // namespace crend
