#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "gamcn/tensor.hpp"

namespace gamcn {

/// Road network over n vertices. The adjacency matrix is optional: the
/// learned-PMI spatial layer runs without one.
class RoadGraph {
public:
    RoadGraph(std::size_t vertices, bool directed = false);
    /// `weights` is row-major n x n, nonnegative and finite; symmetric when undirected.
    RoadGraph(std::size_t vertices, std::vector<double> weights, bool directed);

    std::size_t vertices() const { return n_; }
    bool directed() const { return directed_; }
    bool has_adjacency() const { return adjacency_.has_value(); }
    /// Throws ConfigError when absent.
    const std::vector<double>& adjacency() const;
    double weight(std::size_t from, std::size_t to) const;

private:
    std::size_t n_;
    bool directed_;
    std::optional<std::vector<double>> adjacency_;
};

/// F(i, j): how often vertex i was visited on walks started at vertex j.
struct FrequencyMatrix {
    std::size_t n = 0;
    std::vector<double> counts;

    double at(std::size_t i, std::size_t j) const { return counts[i * n + j]; }
};

/// D^-1/2 (A + I) D^-1/2 with D the row sums of A + I.
Tensor normalized_adjacency(const RoadGraph& graph);

/// Row-normalized A (forward) and row-normalized A^T (backward).
/// Rows without outgoing weight stay zero.
std::pair<Tensor, Tensor> transition_matrices(const RoadGraph& graph);

/// Q^0 = I, Q^1 = Q, ... for a constant square matrix.
std::vector<Tensor> matrix_powers(const Tensor& q, std::size_t max_power);

/// Weight-proportional random walks; `walk_length` counts visited vertices
/// including the start. A walk stops early at a vertex with no outgoing weight.
/// Each start vertex draws from its own stream derived from `seed`.
FrequencyMatrix random_walk_frequencies(const RoadGraph& graph, std::size_t walk_length,
                                        std::size_t walks_per_vertex, std::uint64_t seed);

/// max(log(b_ij / (b_i* b_*j)), 0) with zero-frequency entries mapped to 0.
Tensor pmi_matrix(const FrequencyMatrix& frequencies);

/// Reads `src,dst,weight` rows. Undirected edges are listed once and mirrored.
RoadGraph load_adjacency_csv(const std::filesystem::path& path, std::size_t vertices, bool directed);
/// Writes `src,dst,weight`; undirected graphs emit each edge once (src <= dst).
void save_adjacency_csv(const RoadGraph& graph, const std::filesystem::path& path);

}  // namespace gamcn
