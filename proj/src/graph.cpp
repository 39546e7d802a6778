#include "gamcn/graph.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include "gamcn/csv.hpp"
#include "gamcn/errors.hpp"

namespace gamcn {

RoadGraph::RoadGraph(std::size_t vertices, bool directed) : n_(vertices), directed_(directed) {
    if (vertices == 0) throw ContractError("graph must have at least one vertex");
}

RoadGraph::RoadGraph(std::size_t vertices, std::vector<double> weights, bool directed)
    : RoadGraph(vertices, directed) {
    if (weights.size() != vertices * vertices) {
        throw DimensionError("adjacency must be " + std::to_string(vertices) + "x" + std::to_string(vertices));
    }
    for (double w : weights) {
        if (!std::isfinite(w) || w < 0.0) throw ContractError("adjacency weights must be finite and nonnegative");
    }
    if (!directed) {
        for (std::size_t i = 0; i < vertices; ++i) {
            for (std::size_t j = i + 1; j < vertices; ++j) {
                if (weights[i * vertices + j] != weights[j * vertices + i]) {
                    throw ContractError("undirected adjacency must be symmetric");
                }
            }
        }
    }
    adjacency_ = std::move(weights);
}

const std::vector<double>& RoadGraph::adjacency() const {
    if (!adjacency_) throw ConfigError("this operation needs a graph adjacency matrix, but none was provided");
    return *adjacency_;
}

double RoadGraph::weight(std::size_t from, std::size_t to) const { return adjacency()[from * n_ + to]; }

Tensor normalized_adjacency(const RoadGraph& graph) {
    const auto& a = graph.adjacency();
    const std::size_t n = graph.vertices();
    std::vector<double> tilde(a);
    for (std::size_t i = 0; i < n; ++i) tilde[i * n + i] += 1.0;
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j) deg += tilde[i * n + j];
        inv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) tilde[i * n + j] *= inv_sqrt[i] * inv_sqrt[j];
    }
    return Tensor({n, n}, std::move(tilde));
}

namespace {

std::vector<double> row_normalize(std::vector<double> m, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += m[i * n + j];
        if (s <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) m[i * n + j] /= s;
    }
    return m;
}

}  // namespace

std::pair<Tensor, Tensor> transition_matrices(const RoadGraph& graph) {
    const auto& a = graph.adjacency();
    const std::size_t n = graph.vertices();
    std::vector<double> at(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) at[j * n + i] = a[i * n + j];
    }
    return {Tensor({n, n}, row_normalize(a, n)), Tensor({n, n}, row_normalize(std::move(at), n))};
}

std::vector<Tensor> matrix_powers(const Tensor& q, std::size_t max_power) {
    if (q.rank() != 2 || q.dim(0) != q.dim(1)) throw DimensionError("matrix_powers: expected a square matrix");
    const std::size_t n = q.dim(0);
    std::vector<double> eye(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
    std::vector<Tensor> powers{Tensor({n, n}, std::move(eye))};
    const Tensor base = q.detach();
    for (std::size_t i = 1; i <= max_power; ++i) powers.push_back(matmul(powers.back(), base));
    return powers;
}

FrequencyMatrix random_walk_frequencies(const RoadGraph& graph, std::size_t walk_length,
                                        std::size_t walks_per_vertex, std::uint64_t seed) {
    if (walk_length < 1 || walks_per_vertex < 1) {
        throw ContractError("random walks need walk_length >= 1 and walks_per_vertex >= 1");
    }
    const auto& a = graph.adjacency();
    const std::size_t n = graph.vertices();
    std::vector<double> out_weight(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) out_weight[i] += a[i * n + j];
    }
    FrequencyMatrix f{n, std::vector<double>(n * n, 0.0)};
    for (std::size_t start = 0; start < n; ++start) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(start)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t w = 0; w < walks_per_vertex; ++w) {
            std::size_t at = start;
            f.counts[at * n + start] += 1.0;
            for (std::size_t step = 1; step < walk_length; ++step) {
                if (out_weight[at] <= 0.0) break;
                double r = unit(rng) * out_weight[at];
                std::size_t next = n;
                for (std::size_t j = 0; j < n; ++j) {
                    const double wj = a[at * n + j];
                    if (wj <= 0.0) continue;
                    next = j;
                    if (r < wj) break;
                    r -= wj;
                }
                at = next;
                f.counts[at * n + start] += 1.0;
            }
        }
    }
    return f;
}

Tensor pmi_matrix(const FrequencyMatrix& frequencies) {
    const std::size_t n = frequencies.n;
    if (n == 0 || frequencies.counts.size() != n * n) throw DimensionError("pmi_matrix: malformed frequency matrix");
    std::vector<double> rows(n, 0.0), cols(n, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = frequencies.at(i, j);
            if (c < 0.0 || !std::isfinite(c)) throw ContractError("pmi_matrix: frequencies must be finite and >= 0");
            rows[i] += c;
            cols[j] += c;
            total += c;
        }
    }
    if (total <= 0.0) throw ContractError("pmi_matrix: frequency matrix is all zero");
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = frequencies.at(i, j);
            if (c == 0.0) continue;
            const double beta = c / total;
            const double beta_row = rows[i] / total;
            const double beta_col = cols[j] / total;
            p[i * n + j] = std::max(std::log(beta / (beta_row * beta_col)), 0.0);
        }
    }
    return Tensor({n, n}, std::move(p));
}

RoadGraph load_adjacency_csv(const std::filesystem::path& path, std::size_t vertices, bool directed) {
    CsvReader reader(path);
    const auto header = reader.header();
    if (header != std::vector<std::string>{"src", "dst", "weight"}) {
        throw LoadError(path.string() + ": expected header 'src,dst,weight'");
    }
    std::vector<double> w(vertices * vertices, 0.0);
    std::vector<std::string> row;
    while (reader.next(row)) {
        if (row.size() != 3) throw LoadError(reader.where() + ": expected 3 fields");
        const auto src = parse_index(row[0], reader);
        const auto dst = parse_index(row[1], reader);
        const double weight = parse_double(row[2], reader);
        if (src >= vertices || dst >= vertices) throw LoadError(reader.where() + ": vertex id out of range");
        if (weight < 0.0) throw LoadError(reader.where() + ": negative weight");
        w[src * vertices + dst] = weight;
        if (!directed) w[dst * vertices + src] = weight;
    }
    return RoadGraph(vertices, std::move(w), directed);
}

void save_adjacency_csv(const RoadGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "src,dst,weight\n";
    const std::size_t n = graph.vertices();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = graph.directed() ? 0 : i; j < n; ++j) {
            const double w = graph.weight(i, j);
            if (w > 0.0) out << i << ',' << j << ',' << format_double(w) << '\n';
        }
    }
}

}  // namespace gamcn
