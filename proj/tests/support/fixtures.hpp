#pragma once

// Small datasets and configurations shared by the test binaries.

#include <vector>

#include "gamcn/data.hpp"
#include "gamcn/model.hpp"

namespace gamcn::testing {

inline TrafficDataset tiny_synth(std::size_t vertices = 6, std::size_t days = 1, double noise = 1.0,
                                 std::uint64_t seed = 1, std::size_t clusters = 2) {
    SynthOptions o;
    o.vertices = vertices;
    o.days = days;
    o.clusters = clusters;
    o.noise_sigma = noise;
    o.seed = seed;
    return synthesize_dataset(o);
}

inline ModelConfig config_for(const TrafficDataset& ds, std::size_t p, std::size_t q, std::size_t d,
                              std::uint64_t seed = 1) {
    ModelConfig c;
    c.vertices = ds.vertices;
    c.conditions = ds.condition_count();
    c.p = p;
    c.q = q;
    c.latent = d;
    c.seed = seed;
    return c;
}

/// The first `count` windows of a list.
inline std::vector<SampleWindow> head(const std::vector<SampleWindow>& windows, std::size_t count) {
    return {windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(std::min(count, windows.size()))};
}

}  // namespace gamcn::testing
