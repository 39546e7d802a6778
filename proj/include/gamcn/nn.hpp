#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gamcn/tensor.hpp"

namespace gamcn {

struct Parameter {
    std::string name;
    Tensor tensor;
};

/// Ordered parameter registry; the order is part of the checkpoint format.
using ParameterList = std::vector<Parameter>;

using Rng = std::mt19937_64;

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(Shape shape, double lo, double hi, Rng& rng);

/// y = x W + b with W [in x out], b [out].
struct Linear {
    Tensor weight;
    Tensor bias;

    Linear() = default;
    Linear(std::size_t in, std::size_t out, Rng& rng);

    std::size_t in_features() const { return weight.dim(0); }
    std::size_t out_features() const { return weight.dim(1); }
    Tensor operator()(const Tensor& x) const;
    void collect(const std::string& prefix, ParameterList& out) const;
};

/// Two linear layers with ReLU in between and no output activation.
struct TwoLayerMlp {
    Linear first;
    Linear second;

    TwoLayerMlp() = default;
    TwoLayerMlp(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng);

    Tensor operator()(const Tensor& x) const { return second(relu(first(x))); }
    void collect(const std::string& prefix, ParameterList& out) const;
};

std::size_t parameter_count(const ParameterList& params);
void zero_grads(ParameterList& params);

/// Copies parameter values (not graph state); used for best-epoch snapshots.
std::vector<std::vector<double>> snapshot(const ParameterList& params);
void restore(ParameterList& params, const std::vector<std::vector<double>>& values);

/// FNV-1a over names, shapes and raw value bytes.
std::uint64_t fingerprint(const ParameterList& params);

}  // namespace gamcn
