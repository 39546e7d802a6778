#include "gamcn/spatial.hpp"

#include <cmath>

#include "gamcn/errors.hpp"

namespace gamcn {

std::string to_string(SpatialVariant v) {
    switch (v) {
        case SpatialVariant::gcn: return "gcn";
        case SpatialVariant::dgcn: return "dgcn";
        case SpatialVariant::pgcn: return "pgcn";
        case SpatialVariant::lpgcn: return "lpgcn";
        case SpatialVariant::lpgcn_a: return "lpgcn_a";
    }
    return "?";
}

SpatialVariant parse_spatial_variant(const std::string& name) {
    for (auto v : {SpatialVariant::gcn, SpatialVariant::dgcn, SpatialVariant::pgcn, SpatialVariant::lpgcn,
                   SpatialVariant::lpgcn_a}) {
        if (to_string(v) == name) return v;
    }
    throw ConfigError("unknown spatial variant '" + name + "' (expected gcn, dgcn, pgcn, lpgcn, lpgcn_a)");
}

bool needs_adjacency(SpatialVariant v) { return v != SpatialVariant::lpgcn; }

Tensor activate(const Tensor& x, Activation act) { return act == Activation::relu ? relu(x) : x; }

namespace {

// Lifts [n x d] to [1 x n x d] so every conv can run on batches.
struct Batched {
    Tensor x;
    bool lifted = false;

    explicit Batched(const Tensor& in) {
        if (in.rank() == 2) {
            x = reshape(in, {1, in.dim(0), in.dim(1)});
            lifted = true;
        } else if (in.rank() == 3) {
            x = in;
        } else {
            throw DimensionError("spatial conv expects [n x d] or [B x n x d], got " + shape_string(in.shape()));
        }
    }

    Tensor restore(const Tensor& y) const { return lifted ? reshape(y, {y.dim(1), y.dim(2)}) : y; }
};

// Z [B x n x d] times W [d x d] applied to every row.
Tensor right_matmul(const Tensor& z, const Tensor& w) {
    const std::size_t b = z.dim(0), n = z.dim(1), d = z.dim(2);
    if (w.rank() != 2 || w.dim(0) != d) {
        throw DimensionError("spatial weight " + shape_string(w.shape()) + " incompatible with " + shape_string(z.shape()));
    }
    return reshape(matmul(reshape(z, {b * n, d}), w), {b, n, w.dim(1)});
}

Tensor propagate(const Tensor& op, const Tensor& z, const Tensor& w) { return right_matmul(left_matmul(op, z), w); }

}  // namespace

DiffusionSupports diffusion_supports(const RoadGraph& graph, std::size_t hops) {
    auto [qf, qb] = transition_matrices(graph);
    DiffusionSupports s;
    s.forward_powers = matrix_powers(qf, hops);
    if (graph.directed()) s.backward_powers = matrix_powers(qb, hops);
    return s;
}

Tensor init_learned_frequencies(std::size_t n, Rng& rng) {
    std::uniform_int_distribution<int> dist(0, static_cast<int>(n));
    std::vector<double> v(n * n);
    for (auto& x : v) x = static_cast<double>(dist(rng));
    return Tensor({n, n}, std::move(v), true);
}

Tensor gcn_conv(const Tensor& x, const Tensor& normalized_adj, const std::vector<Tensor>& weights, Activation act) {
    Batched in(x);
    Tensor z = in.x;
    for (const auto& w : weights) z = activate(propagate(normalized_adj, z, w), act);
    return in.restore(z);
}

Tensor pgcn_normalize(const Tensor& p_matrix) {
    if (p_matrix.rank() != 2 || p_matrix.dim(0) != p_matrix.dim(1)) {
        throw DimensionError("pgcn_normalize: expected a square matrix, got " + shape_string(p_matrix.shape()));
    }
    const std::size_t n = p_matrix.dim(0);
    const auto p = p_matrix.values();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += p[i * n + j];
        inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 1.0;
    }
    std::vector<double> out(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = inv_sqrt[i] * p[i * n + j] * inv_sqrt[j];
    }
    return Tensor({n, n}, std::move(out));
}

Tensor pgcn_conv(const Tensor& x, const Tensor& p_matrix, const std::vector<Tensor>& weights, Activation act) {
    return gcn_conv(x, pgcn_normalize(p_matrix), weights, act);
}

Tensor lpgcn_conv(const Tensor& x, const LpgcnParams& params, Activation act, const Tensor& p_hat) {
    const Tensor pmi = p_hat.defined() ? p_hat : learned_pmi(params.f_hat);
    Batched in(x);
    Tensor z = in.x;
    for (const auto& w : params.w) z = activate(propagate(pmi, z, w), act);
    return in.restore(z);
}

Tensor lpgcn_diffusion_conv(const Tensor& x, const DiffusionSupports& supports, const LpgcnParams& params,
                            bool pmi_branch, Activation act, const Tensor& p_hat) {
    if (supports.forward_powers.size() != params.hops + 1) {
        throw ConfigError("diffusion supports do not match the configured hop count");
    }
    Tensor pmi;
    if (pmi_branch) pmi = p_hat.defined() ? p_hat : learned_pmi(params.f_hat);
    Batched in(x);
    Tensor z = in.x;
    for (std::size_t h = 0; h < params.layers; ++h) {
        Tensor acc;
        auto accumulate = [&acc](Tensor term) { acc = acc.defined() ? add(acc, term) : std::move(term); };
        for (std::size_t i = 0; i <= params.hops; ++i) {
            // Q^0 = I: skip the identity product.
            accumulate(i == 0 ? right_matmul(z, params.w_f[h][i]) : propagate(supports.forward_powers[i], z, params.w_f[h][i]));
            if (!supports.backward_powers.empty()) {
                accumulate(i == 0 ? right_matmul(z, params.w_b[h][i])
                                  : propagate(supports.backward_powers[i], z, params.w_b[h][i]));
            }
        }
        if (pmi_branch) accumulate(propagate(pmi, z, params.w[h]));
        z = activate(acc, act);
    }
    return in.restore(z);
}

// ---------------------------------------------------------------------------

SpatialLayer::SpatialLayer(const Options& options, const RoadGraph& graph, Rng& rng) : options_(options) {
    const std::size_t n = options.vertices, d = options.latent;
    if (n != graph.vertices()) throw ConfigError("spatial layer vertex count does not match the graph");
    if (d == 0 || options.layers == 0) throw ConfigError("spatial layer needs d >= 1 and at least one layer");
    const auto v = options.variant;
    if (needs_adjacency(v) && !graph.has_adjacency()) {
        throw ConfigError("spatial variant '" + to_string(v) + "' requires an adjacency matrix, but none was provided");
    }
    params_.hops = options.hops;
    params_.layers = options.layers;

    const bool uses_w = v != SpatialVariant::dgcn;
    const bool uses_diffusion = v == SpatialVariant::dgcn || v == SpatialVariant::lpgcn_a;
    const bool uses_fhat = v == SpatialVariant::lpgcn || v == SpatialVariant::lpgcn_a;

    if (uses_fhat) params_.f_hat = init_learned_frequencies(n, rng);
    for (std::size_t h = 0; h < options.layers; ++h) {
        if (uses_w) params_.w.push_back(xavier_uniform(d, d, rng));
        if (uses_diffusion) {
            params_.w_f.emplace_back();
            for (std::size_t i = 0; i <= options.hops; ++i) params_.w_f.back().push_back(xavier_uniform(d, d, rng));
            params_.w_b.emplace_back();
            if (graph.directed()) {
                for (std::size_t i = 0; i <= options.hops; ++i) params_.w_b.back().push_back(xavier_uniform(d, d, rng));
            }
        }
    }

    if (v == SpatialVariant::gcn) normalized_adj_ = normalized_adjacency(graph);
    if (v == SpatialVariant::pgcn) {
        const std::size_t len = options.pgcn_walk_length ? options.pgcn_walk_length : n;
        const auto freq = random_walk_frequencies(graph, len, options.pgcn_walks, options.walk_seed);
        pgcn_matrix_ = pgcn_normalize(pmi_matrix(freq));
    }
    if (uses_diffusion) supports_ = diffusion_supports(graph, options.hops);
}

Tensor SpatialLayer::learned_pmi_matrix() const {
    if (!params_.f_hat.defined()) return {};
    return learned_pmi(params_.f_hat);
}

Tensor SpatialLayer::forward(const Tensor& x, const Tensor& p_hat) const {
    switch (options_.variant) {
        case SpatialVariant::gcn: return gcn_conv(x, normalized_adj_, params_.w);
        case SpatialVariant::pgcn: return gcn_conv(x, pgcn_matrix_, params_.w);
        case SpatialVariant::lpgcn: return lpgcn_conv(x, params_, Activation::relu, p_hat);
        case SpatialVariant::dgcn: return lpgcn_diffusion_conv(x, supports_, params_, false);
        case SpatialVariant::lpgcn_a: return lpgcn_diffusion_conv(x, supports_, params_, true, Activation::relu, p_hat);
    }
    throw ConfigError("unhandled spatial variant");
}

void SpatialLayer::collect(const std::string& prefix, ParameterList& out) const {
    if (params_.f_hat.defined()) out.push_back({prefix + ".f_hat", params_.f_hat});
    for (std::size_t h = 0; h < params_.w.size(); ++h) out.push_back({prefix + ".w" + std::to_string(h), params_.w[h]});
    for (std::size_t h = 0; h < params_.w_f.size(); ++h) {
        for (std::size_t i = 0; i < params_.w_f[h].size(); ++i) {
            out.push_back({prefix + ".w_f" + std::to_string(h) + "_" + std::to_string(i), params_.w_f[h][i]});
        }
        for (std::size_t i = 0; i < params_.w_b[h].size(); ++i) {
            out.push_back({prefix + ".w_b" + std::to_string(h) + "_" + std::to_string(i), params_.w_b[h][i]});
        }
    }
}

}  // namespace gamcn
