#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gamcn/gan.hpp"
#include "gamcn/metrics.hpp"
#include "gamcn/model.hpp"
#include "gamcn/training.hpp"

namespace gamcn {

struct EvalConfig {
    std::vector<std::size_t> buckets{3, 6, 12};
    std::size_t kl_bins = 50;
    KlOrder kl_order = KlOrder::truth_first;
};

/// Everything a `train` run needs apart from the dataset. `model.vertices`
/// and `model.conditions` are filled from the data at run time.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    GanConfig gan;
    EvalConfig eval;
};

/// key=value lines; unknown keys and malformed values raise ConfigError.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
/// Every key, in a fixed order; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);

/// Model keys only, including vertices and conditions (checkpoint header).
std::string model_config_to_text(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text, const std::string& source);

}  // namespace gamcn
