#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crend/generator.hpp"
#include "crend/renderer.hpp"

namespace crend {

struct TrainConfig {
    double lr = 3e-4;
    double lr_decay_factor = 0.1;
    int lr_decay_every = 10;
    double weight_decay = 1e-5;
    int batch_size = 8;
    int epochs = 30;
    std::uint64_t seed = 42;
    int threads = 0;  // 0: one worker per hardware core (capped at 8)
    bool branch_supervision = false;
    bool render_targets_from_prediction = false;
    GeneratorConfig generator;
    RendererConfig renderer;

    void validate() const;
};

// Canonical key order; also the checkpoint snapshot layout.
const std::vector<std::string>& config_keys();

// Applies one `key = value` assignment. Throws naming the key when it is
// unknown or the value does not parse.
void apply_config_entry(TrainConfig& cfg, const std::string& key, const std::string& value);

// Line-based `key = value` file; blank lines and '#' comments are ignored.
TrainConfig parse_config_file(const std::string& path);

// Same grammar, from an in-memory string (`context` names the source in
// error messages).
TrainConfig parse_config_text(const std::string& text, const std::string& context);

// Serializes every key in canonical order (parse_config round-trips it).
std::string config_to_text(const TrainConfig& cfg);

}  // namespace crend
