#include "gamcn/model.hpp"

#include "gamcn/errors.hpp"

namespace gamcn {

std::string to_string(Ablation a) {
    switch (a) {
        case Ablation::full: return "full";
        case Ablation::no_spatial: return "no_spatial";
        case Ablation::no_temporal: return "no_temporal";
        case Ablation::attention_off: return "attention_off";
    }
    return "?";
}

Ablation parse_ablation(const std::string& name) {
    for (auto a : {Ablation::full, Ablation::no_spatial, Ablation::no_temporal, Ablation::attention_off}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown ablation '" + name + "' (expected full, no_spatial, no_temporal, attention_off)");
}

void ModelConfig::validate() const {
    if (vertices == 0) throw ConfigError("model needs at least one vertex");
    if (p < 1 || q < 1 || latent < 1 || conditions < 1 || mapper_hidden < 1 || layers < 1) {
        throw ConfigError("model dimensions p, q, d, c, mapper_hidden and layers must all be >= 1");
    }
    if (ablation != Ablation::no_temporal && p < 2) {
        throw ConfigError("the temporal branch needs p >= 2 (got p = " + std::to_string(p) + ")");
    }
}

FusionParams::FusionParams(std::size_t d, Rng& rng)
    : w1(xavier_uniform(d, d, rng)), w2(xavier_uniform(d, d, rng)), b(Tensor::zeros({d}, true)) {}

void FusionParams::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".w1", w1});
    out.push_back({prefix + ".w2", w2});
    out.push_back({prefix + ".b", b});
}

Tensor gated_fusion(const Tensor& z, const Tensor& t_att, const FusionParams& params, Tensor* gate_out) {
    if (z.shape() != t_att.shape() || z.rank() != 2) {
        throw DimensionError("gated_fusion: spatial " + shape_string(z.shape()) + " and temporal " +
                             shape_string(t_att.shape()) + " must be equal rank-2 shapes");
    }
    const Tensor alpha = sigmoid(add_bias(add(matmul(z, params.w1), matmul(t_att, params.w2)), params.b));
    if (gate_out) *gate_out = alpha;
    return add(mul(alpha, z), mul(add_scalar(scale(alpha, -1.0), 1.0), t_att));
}

Tensor map_input(const Tensor& x_t, const TwoLayerMlp& mapper) {
    if (x_t.rank() != 2 || x_t.dim(1) != mapper.first.in_features()) {
        throw DimensionError("map_input: expected [n x " + std::to_string(mapper.first.in_features()) + "], got " +
                             shape_string(x_t.shape()));
    }
    return mapper(x_t);
}

Gamcn::Gamcn(const ModelConfig& config, const RoadGraph& graph) : config_(config) {
    config_.validate();
    if (graph.vertices() != config_.vertices) {
        throw ConfigError("graph has " + std::to_string(graph.vertices()) + " vertices but the model expects " +
                          std::to_string(config_.vertices));
    }
    const std::size_t n = config_.vertices, d = config_.latent, h = config_.mapper_hidden;
    const std::size_t slices = temporal_slices(config_.p);
    Rng rng(config_.seed);

    input_mapper_ = TwoLayerMlp(config_.conditions, h, d, rng);
    if (has_spatial()) {
        SpatialLayer::Options opt;
        opt.variant = config_.spatial;
        opt.vertices = n;
        opt.latent = d;
        opt.hops = config_.hops;
        opt.layers = config_.layers;
        opt.pgcn_walks = config_.pgcn_walks;
        opt.pgcn_walk_length = config_.pgcn_walk_length;
        opt.walk_seed = config_.seed;
        spatial_ = std::make_unique<SpatialLayer>(opt, graph, rng);
    }
    if (has_temporal()) multi_path_ = MultiPathParams(config_.p, d, rng);
    if (has_time_embedding()) time_embed_ = TimeEmbedParams(n, slices, config_.holiday_mode);
    if (config_.ablation == Ablation::attention_off) slice_fc_ = Linear(slices, 1, rng);
    if (config_.ablation == Ablation::no_temporal) time_to_latent_ = Linear(slices, d, rng);
    if (has_fusion()) fusion_ = FusionParams(d, rng);
    output_mapper_ = TwoLayerMlp(d, h, config_.conditions, rng);

    input_mapper_.collect("input_mapper", params_);
    if (spatial_) spatial_->collect("spatial", params_);
    if (has_temporal()) multi_path_.collect("multi_path", params_);
    if (has_time_embedding()) time_embed_.collect("time_embedding", params_);
    if (config_.ablation == Ablation::attention_off) slice_fc_.collect("slice_fc", params_);
    if (config_.ablation == Ablation::no_temporal) time_to_latent_.collect("time_to_latent", params_);
    if (has_fusion()) fusion_.collect("fusion", params_);
    output_mapper_.collect("output_mapper", params_);
}

std::size_t Gamcn::expected_parameter_count(const ModelConfig& c, bool directed) {
    const std::size_t n = c.vertices, d = c.latent, h = c.mapper_hidden, cond = c.conditions;
    const std::size_t slices = temporal_slices(c.p);
    std::size_t total = (cond * h + h + h * d + d) + (d * h + h + h * cond + cond);
    if (c.ablation != Ablation::no_spatial) {
        const auto v = c.spatial;
        if (v == SpatialVariant::lpgcn || v == SpatialVariant::lpgcn_a) total += n * n;
        if (v != SpatialVariant::dgcn) total += c.layers * d * d;
        if (v == SpatialVariant::dgcn || v == SpatialVariant::lpgcn_a) {
            total += c.layers * (c.hops + 1) * d * d * (directed ? 2 : 1);
        }
    }
    if (c.ablation != Ablation::no_temporal) {
        // kernels j = 2..p of j*d weights plus d biases each
        total += d * (slices - 1) + d * (c.p - 1);
    }
    if (c.ablation != Ablation::attention_off) total += (time_vector_width(c.holiday_mode) + 1) * n * slices;
    if (c.ablation == Ablation::attention_off) total += slices + 1;
    if (c.ablation == Ablation::no_temporal) total += slices * d + d;
    if (c.ablation == Ablation::full || c.ablation == Ablation::attention_off) total += 2 * d * d + d;
    return total;
}

Tensor Gamcn::forward(const Tensor& window, std::span<const TimeStamp> horizon_times, ForwardTrace* trace) const {
    const std::size_t p = config_.p, q = config_.q, n = config_.vertices, c = config_.conditions, d = config_.latent;
    if (window.rank() != 3 || window.dim(0) != p || window.dim(1) != n || window.dim(2) != c) {
        throw ContractError("forward: window must be [" + std::to_string(p) + " x " + std::to_string(n) + " x " +
                            std::to_string(c) + "], got " + shape_string(window.shape()));
    }
    if (horizon_times.size() != q) {
        throw ContractError("forward: expected " + std::to_string(q) + " horizon timestamps, got " +
                            std::to_string(horizon_times.size()));
    }

    const Tensor latent = reshape(input_mapper_(reshape(window, {p * n, c})), {p, n, d});

    // Spatial branch: one output per horizon, [q x n x d].
    Tensor spatial_out;
    if (has_spatial()) {
        const Tensor p_hat = spatial_->learned_pmi_matrix();
        if (trace && p_hat.defined()) trace->learned_pmi = p_hat;
        if (config_.ablation == Ablation::no_temporal) {
            const Tensor z = select(spatial_->forward(reshape(select(latent, p - 1), {1, n, d}), p_hat), 0);
            spatial_out = stack(std::vector<Tensor>(q, z));
        } else {
            std::vector<Tensor> inputs;
            inputs.reserve(q);
            const bool fallback = config_.effective_fallback();
            for (std::size_t i = 0; i < q; ++i) inputs.push_back(select(latent, fallback ? p - 1 : i));
            spatial_out = spatial_->forward(stack(inputs), p_hat);
        }
    }

    // Temporal branch: one output per horizon, [q x n x d].
    Tensor temporal_out;
    const std::size_t slices = temporal_slices(p);
    if (has_temporal()) {
        const Tensor stacked = concat_temporal(latent, multi_path_convolve(latent, multi_path_));
        if (has_attention()) {
            std::vector<Tensor> per_horizon;
            per_horizon.reserve(q);
            for (std::size_t i = 0; i < q; ++i) {
                Tensor weights;
                per_horizon.push_back(
                    temporal_attention(stacked, embed_time(horizon_times[i], time_embed_, config_.holiday_mode), &weights));
                if (trace) trace->attention.push_back(weights);
            }
            temporal_out = stack(per_horizon);
        } else {
            const Tensor fc = broadcast_rows(reshape(slice_fc_.weight, {slices}), n);
            const Tensor mixed = reshape(add_bias(reshape(slice_mix(stacked, fc), {n * d, 1}), slice_fc_.bias), {n, d});
            temporal_out = stack(std::vector<Tensor>(q, mixed));
        }
    }

    Tensor fused;
    switch (config_.ablation) {
        case Ablation::full:
        case Ablation::attention_off: {
            Tensor gate;
            fused = gated_fusion(reshape(spatial_out, {q * n, d}), reshape(temporal_out, {q * n, d}), fusion_,
                                 trace ? &gate : nullptr);
            if (trace) trace->gates = gate;
            break;
        }
        case Ablation::no_spatial: fused = reshape(temporal_out, {q * n, d}); break;
        case Ablation::no_temporal: {
            std::vector<Tensor> embeddings;
            embeddings.reserve(q);
            for (std::size_t i = 0; i < q; ++i) embeddings.push_back(embed_time(horizon_times[i], time_embed_, config_.holiday_mode));
            const Tensor time_term = time_to_latent_(reshape(stack(embeddings), {q * n, slices}));
            fused = add(reshape(spatial_out, {q * n, d}), time_term);
            break;
        }
    }
    return reshape(output_mapper_(fused), {q, n, c});
}

}  // namespace gamcn
