#include "gamcn/temporal.hpp"

#include "gamcn/errors.hpp"

namespace gamcn {

std::string to_string(HolidayMode m) { return m == HolidayMode::sunday ? "sunday" : "extra_day"; }

HolidayMode parse_holiday_mode(const std::string& name) {
    if (name == "sunday") return HolidayMode::sunday;
    if (name == "extra_day") return HolidayMode::extra_day;
    throw ConfigError("unknown holiday mode '" + name + "' (expected sunday or extra_day)");
}

std::size_t time_vector_width(HolidayMode mode) {
    return kSlotsPerDay + kDaysPerWeek + (mode == HolidayMode::extra_day ? 1 : 0);
}

std::array<std::size_t, 2> time_onehot_indices(const TimeStamp& t, HolidayMode mode) {
    if (t.slot < 0 || t.slot >= static_cast<int>(kSlotsPerDay)) {
        throw ContractError("time slot " + std::to_string(t.slot) + " outside [0, 287]");
    }
    if (t.day < 0 || t.day >= static_cast<int>(kDaysPerWeek)) {
        throw ContractError("day of week " + std::to_string(t.day) + " outside [0, 6]");
    }
    std::size_t day = static_cast<std::size_t>(t.day);
    if (t.holiday) day = mode == HolidayMode::sunday ? 0 : kDaysPerWeek;
    return {static_cast<std::size_t>(t.slot), kSlotsPerDay + day};
}

Tensor time_onehot(const TimeStamp& t, HolidayMode mode) {
    std::vector<double> v(time_vector_width(mode), 0.0);
    for (auto i : time_onehot_indices(t, mode)) v[i] = 1.0;
    const std::size_t width = v.size();
    return Tensor({width}, std::move(v));
}

MultiPathParams::MultiPathParams(std::size_t p, std::size_t d, Rng& rng) {
    if (p < 2) throw ConfigError("multi-path convolution needs p >= 2, got p = " + std::to_string(p));
    for (std::size_t j = 2; j <= p; ++j) {
        // Centered on the averaging kernel 1/j.
        kernels.push_back(uniform({j, d}, 0.0, 2.0 / static_cast<double>(j), rng));
        biases.push_back(Tensor::zeros({d}, true));
    }
}

void MultiPathParams::collect(const std::string& prefix, ParameterList& out) const {
    for (std::size_t i = 0; i < kernels.size(); ++i) {
        out.push_back({prefix + ".kernel" + std::to_string(i + 2), kernels[i]});
        out.push_back({prefix + ".bias" + std::to_string(i + 2), biases[i]});
    }
}

std::vector<Tensor> multi_path_convolve(const Tensor& x_seq, const MultiPathParams& params) {
    if (x_seq.rank() != 3) throw DimensionError("multi_path_convolve expects [p x n x d], got " + shape_string(x_seq.shape()));
    const std::size_t p = x_seq.dim(0);
    if (p < 2) throw ConfigError("multi-path convolution needs p >= 2, got p = " + std::to_string(p));
    if (params.window() != p) {
        throw ConfigError("multi-path parameters built for p = " + std::to_string(params.window()) +
                          " but the sequence has p = " + std::to_string(p));
    }
    std::vector<Tensor> out;
    out.reserve(p - 1);
    for (std::size_t i = 0; i < params.kernels.size(); ++i) out.push_back(conv1d_time(x_seq, params.kernels[i], params.biases[i]));
    return out;
}

Tensor concat_temporal(const Tensor& x_seq, const std::vector<Tensor>& path_outputs) {
    std::vector<Tensor> parts;
    parts.reserve(path_outputs.size() + 1);
    parts.push_back(x_seq);
    parts.insert(parts.end(), path_outputs.begin(), path_outputs.end());
    return concat(parts, 0);
}

TimeEmbedParams::TimeEmbedParams(std::size_t n, std::size_t s, HolidayMode mode)
    : weight(Tensor::zeros({time_vector_width(mode), n * s}, true)),
      bias(Tensor::zeros({n * s}, true)),
      vertices(n),
      slices(s) {}

void TimeEmbedParams::collect(const std::string& prefix, ParameterList& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
}

Tensor embed_time(const TimeStamp& t, const TimeEmbedParams& params, HolidayMode mode) {
    if (params.weight.dim(0) != time_vector_width(mode)) {
        throw ConfigError("time embedding width does not match holiday mode " + to_string(mode));
    }
    const auto hot = time_onehot_indices(t, mode);
    const Tensor flat = add(sum_rows(params.weight, hot), params.bias);
    return reshape(flat, {params.vertices, params.slices});
}

Tensor temporal_attention(const Tensor& x_bar, const Tensor& e, Tensor* weights_out) {
    if (x_bar.rank() != 3 || e.rank() != 2 || e.dim(0) != x_bar.dim(1) || e.dim(1) != x_bar.dim(0)) {
        throw DimensionError("temporal_attention: stack " + shape_string(x_bar.shape()) + " incompatible with embedding " +
                             shape_string(e.shape()));
    }
    Tensor weights = softmax_rows(e);
    if (weights_out) *weights_out = weights;
    return slice_mix(x_bar, weights);
}

}  // namespace gamcn
