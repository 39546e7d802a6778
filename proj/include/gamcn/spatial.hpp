#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gamcn/graph.hpp"
#include "gamcn/nn.hpp"
#include "gamcn/tensor.hpp"

namespace gamcn {

enum class SpatialVariant {
    gcn,      ///< symmetric-normalized A + I
    dgcn,     ///< diffusion over forward/backward transition powers only
    pgcn,     ///< normalized PMI of random-walk co-visits
    lpgcn,    ///< PMI of a learned frequency matrix, no adjacency needed
    lpgcn_a,  ///< diffusion term plus the learned-PMI term
};

std::string to_string(SpatialVariant v);
SpatialVariant parse_spatial_variant(const std::string& name);
bool needs_adjacency(SpatialVariant v);

enum class Activation { relu, identity };

Tensor activate(const Tensor& x, Activation act);

struct LpgcnParams {
    Tensor f_hat;                              ///< [n x n] learned frequencies
    std::vector<Tensor> w;                     ///< per layer [d x d]
    std::vector<std::vector<Tensor>> w_f;      ///< [layer][hop] [d x d]
    std::vector<std::vector<Tensor>> w_b;      ///< [layer][hop]; empty for undirected graphs
    std::size_t hops = 0;
    std::size_t layers = 1;
};

/// Transition powers Q^0..Q^K used by the diffusion term. For undirected
/// graphs `backward_powers` is empty and only the forward term is used.
struct DiffusionSupports {
    std::vector<Tensor> forward_powers;
    std::vector<Tensor> backward_powers;
};

DiffusionSupports diffusion_supports(const RoadGraph& graph, std::size_t hops);

/// F_hat initialized with uniform random integers in [0, n].
Tensor init_learned_frequencies(std::size_t n, Rng& rng);

// All conv functions accept x as [n x d] or a batch [B x n x d] sharing the
// graph operator, and return the same rank.

/// sigma(A_norm Z W) for each configured layer.
Tensor gcn_conv(const Tensor& x, const Tensor& normalized_adj, const std::vector<Tensor>& weights,
                Activation act = Activation::relu);

/// D^-1/2 P D^-1/2 with D_ii = sum_j P_ij, and D_ii := 1 for all-zero rows.
Tensor pgcn_normalize(const Tensor& p_matrix);

Tensor pgcn_conv(const Tensor& x, const Tensor& p_matrix, const std::vector<Tensor>& weights,
                 Activation act = Activation::relu);

/// sigma(P_hat Z W) with P_hat = learned_pmi(F_hat).
/// `p_hat` may be passed in when already computed for this forward pass.
Tensor lpgcn_conv(const Tensor& x, const LpgcnParams& params, Activation act = Activation::relu,
                  const Tensor& p_hat = {});

/// sigma(S + P_hat Z W) with S = sum_i (Qf^i Z Wf_i + Qb^i Z Wb_i).
/// With `pmi_branch` false the P_hat term is dropped (the DGCN form).
Tensor lpgcn_diffusion_conv(const Tensor& x, const DiffusionSupports& supports, const LpgcnParams& params,
                            bool pmi_branch = true, Activation act = Activation::relu, const Tensor& p_hat = {});

/// Owns the constant graph operators and the learnable weights of one
/// spatial variant, so the model can switch variants by configuration.
class SpatialLayer {
public:
    struct Options {
        SpatialVariant variant = SpatialVariant::lpgcn_a;
        std::size_t vertices = 0;
        std::size_t latent = 0;
        std::size_t hops = 2;
        std::size_t layers = 1;
        std::size_t pgcn_walks = 10;
        std::size_t pgcn_walk_length = 0;  ///< 0 means |V|
        std::uint64_t walk_seed = 0;
    };

    /// Throws ConfigError if the variant needs an adjacency the graph lacks.
    SpatialLayer(const Options& options, const RoadGraph& graph, Rng& rng);

    SpatialVariant variant() const { return options_.variant; }

    /// Learned PMI matrix for the current F_hat; undefined for variants without one.
    Tensor learned_pmi_matrix() const;

    /// `p_hat` should come from learned_pmi_matrix() in the same forward pass.
    Tensor forward(const Tensor& x, const Tensor& p_hat = {}) const;

    const LpgcnParams& params() const { return params_; }
    LpgcnParams& params() { return params_; }
    void collect(const std::string& prefix, ParameterList& out) const;

private:
    Options options_;
    LpgcnParams params_;
    Tensor normalized_adj_;
    Tensor pgcn_matrix_;
    DiffusionSupports supports_;
};

}  // namespace gamcn
