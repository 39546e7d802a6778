#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gamcn/model.hpp"
#include "gamcn/training.hpp"

namespace gamcn {

/// Binary layout (little-endian host order): magic "GAMCNCKP", u32 version,
/// model config text, graph fingerprint, normalizer, then for every
/// parameter its name, rank, extents and raw doubles.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredParameter {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    ModelConfig config;
    std::uint64_t graph_fingerprint = 0;
    Normalizer normalizer;
    std::vector<StoredParameter> parameters;
};

/// FNV-1a over vertex count, direction flag and adjacency bytes.
std::uint64_t graph_fingerprint(const RoadGraph& graph);

void save_checkpoint(const std::filesystem::path& path, const Gamcn& model, const Normalizer& normalizer,
                     const RoadGraph& graph);
/// Throws LoadError on a truncated or foreign file.
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Rebuilds the model on `graph` and copies the stored values. Throws
/// LoadError when the graph, parameter names or shapes disagree.
Gamcn instantiate(const Checkpoint& ckpt, const RoadGraph& graph);

}  // namespace gamcn
