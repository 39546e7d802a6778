#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gamcn/graph.hpp"
#include "gamcn/nn.hpp"
#include "gamcn/spatial.hpp"
#include "gamcn/temporal.hpp"

namespace gamcn {

enum class Ablation {
    full,
    no_spatial,     ///< output from the temporal branch alone
    no_temporal,    ///< spatial branch on the latest input plus a time-embedding term
    attention_off,  ///< multi-path stack aggregated by a learned FC over the slice axis
};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& name);

struct ModelConfig {
    std::size_t vertices = 0;    ///< |V|, taken from the dataset
    std::size_t conditions = 1;  ///< c
    std::size_t p = 12;
    std::size_t q = 12;
    std::size_t latent = 16;     ///< d
    std::size_t mapper_hidden = 10;
    std::size_t hops = 2;        ///< K
    std::size_t layers = 1;
    SpatialVariant spatial = SpatialVariant::lpgcn_a;
    Ablation ablation = Ablation::full;
    bool fallback_zp = false;
    HolidayMode holiday_mode = HolidayMode::sunday;
    std::size_t pgcn_walks = 10;
    std::size_t pgcn_walk_length = 0;
    std::uint64_t seed = 1;

    /// Horizon i uses the spatial output of input i unless fallback is on
    /// or the window is shorter than the horizon.
    bool effective_fallback() const { return fallback_zp || p < q; }
    void validate() const;
};

struct FusionParams {
    Tensor w1;  ///< [d x d]
    Tensor w2;  ///< [d x d]
    Tensor b;   ///< [d]

    FusionParams() = default;
    FusionParams(std::size_t d, Rng& rng);
    void collect(const std::string& prefix, ParameterList& out) const;
};

/// alpha = sigmoid(z W1 + t W2 + b); alpha * z + (1 - alpha) * t.
/// z, t: [m x d]. The gate is written to `gate_out` when given.
Tensor gated_fusion(const Tensor& z, const Tensor& t_att, const FusionParams& params, Tensor* gate_out = nullptr);

/// [m x c] -> [m x d] through the two-layer input mapper.
Tensor map_input(const Tensor& x_t, const TwoLayerMlp& mapper);

/// Intermediate values captured during a forward pass, for invariant checks.
struct ForwardTrace {
    std::vector<Tensor> attention;  ///< per horizon, [n x S]
    Tensor gates;                   ///< [(q n) x d]
    Tensor learned_pmi;             ///< [n x n] when the variant has one
};

class Gamcn {
public:
    /// Throws ConfigError when the spatial variant needs an adjacency the
    /// graph lacks, or the config is inconsistent.
    Gamcn(const ModelConfig& config, const RoadGraph& graph);

    Gamcn(const Gamcn&) = delete;
    Gamcn& operator=(const Gamcn&) = delete;
    Gamcn(Gamcn&&) = default;
    Gamcn& operator=(Gamcn&&) = default;

    const ModelConfig& config() const { return config_; }

    /// window [p x n x c] (normalized units), q horizon timestamps -> [q x n x c].
    Tensor forward(const Tensor& window, std::span<const TimeStamp> horizon_times, ForwardTrace* trace = nullptr) const;

    ParameterList& parameters() { return params_; }
    const ParameterList& parameters() const { return params_; }

    const TwoLayerMlp& input_mapper() const { return input_mapper_; }
    const TwoLayerMlp& output_mapper() const { return output_mapper_; }
    const SpatialLayer* spatial() const { return spatial_.get(); }
    SpatialLayer* spatial() { return spatial_.get(); }
    const MultiPathParams& multi_path() const { return multi_path_; }
    const TimeEmbedParams& time_embedding() const { return time_embed_; }
    const FusionParams& fusion() const { return fusion_; }

    /// Closed-form parameter count for a configuration.
    static std::size_t expected_parameter_count(const ModelConfig& config, bool directed_graph);

private:
    bool has_spatial() const { return config_.ablation != Ablation::no_spatial; }
    bool has_temporal() const { return config_.ablation != Ablation::no_temporal; }
    bool has_attention() const { return config_.ablation != Ablation::attention_off && has_temporal(); }
    bool has_time_embedding() const { return config_.ablation != Ablation::attention_off; }
    bool has_fusion() const { return config_.ablation == Ablation::full || config_.ablation == Ablation::attention_off; }

    ModelConfig config_;
    TwoLayerMlp input_mapper_;
    TwoLayerMlp output_mapper_;
    std::unique_ptr<SpatialLayer> spatial_;
    MultiPathParams multi_path_;
    TimeEmbedParams time_embed_;
    FusionParams fusion_;
    Linear slice_fc_;        ///< attention_off: S -> 1
    Linear time_to_latent_;  ///< no_temporal: S -> d
    ParameterList params_;
};

}  // namespace gamcn
