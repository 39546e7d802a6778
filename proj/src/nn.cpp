#include "gamcn/nn.hpp"

#include <cmath>
#include <cstring>

#include "gamcn/errors.hpp"

namespace gamcn {

Tensor uniform(Shape shape, double lo, double hi, Rng& rng) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor(std::move(shape), std::move(v), true);
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return uniform({fan_in, fan_out}, -a, a, rng);
}

Linear::Linear(std::size_t in, std::size_t out, Rng& rng)
    : weight(xavier_uniform(in, out, rng)), bias(Tensor::zeros({out}, true)) {}

Tensor Linear::operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }

void Linear::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

TwoLayerMlp::TwoLayerMlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng)
    : first(in, hidden, rng), second(hidden, out, rng) {}

void TwoLayerMlp::collect(const std::string& prefix, ParameterList& out) const {
    first.collect(prefix + ".0", out);
    second.collect(prefix + ".1", out);
}

std::size_t parameter_count(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) n += p.tensor.size();
    return n;
}

void zero_grads(ParameterList& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
    std::vector<std::vector<double>> out;
    out.reserve(params.size());
    for (const auto& p : params) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
    return out;
}

void restore(ParameterList& params, const std::vector<std::vector<double>>& values) {
    if (values.size() != params.size()) throw ContractError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto dst = params[i].tensor.mutable_values();
        if (dst.size() != values[i].size()) throw ContractError("restore: size mismatch for " + params[i].name);
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

std::uint64_t fingerprint(const ParameterList& params) {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* data, std::size_t len) {
        const auto* bytes = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    };
    for (const auto& p : params) {
        mix(p.name.data(), p.name.size());
        for (auto e : p.tensor.shape()) mix(&e, sizeof(e));
        mix(p.tensor.values().data(), p.tensor.size() * sizeof(double));
    }
    return h;
}

}  // namespace gamcn
