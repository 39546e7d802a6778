#pragma once

#include <array>
#include <string>
#include <vector>

#include "gamcn/nn.hpp"
#include "gamcn/tensor.hpp"

namespace gamcn {

inline constexpr std::size_t kSlotsPerDay = 288;  // 5-minute bins
inline constexpr std::size_t kDaysPerWeek = 7;

enum class HolidayMode {
    sunday,     ///< holidays use the Sunday bit
    extra_day,  ///< holidays get an eighth day-type bit
};

std::string to_string(HolidayMode m);
HolidayMode parse_holiday_mode(const std::string& name);

/// Time of a prediction target: 5-minute slot of the day and day of week
/// (0 = Sunday).
struct TimeStamp {
    int slot = 0;
    int day = 0;
    bool holiday = false;

    friend bool operator==(const TimeStamp&, const TimeStamp&) = default;
};

/// 288 + 7 (or + 8 in extra_day mode).
std::size_t time_vector_width(HolidayMode mode);

/// The two hot positions of the time-of-day / day-of-week encoding.
std::array<std::size_t, 2> time_onehot_indices(const TimeStamp& t, HolidayMode mode = HolidayMode::sunday);
Tensor time_onehot(const TimeStamp& t, HolidayMode mode = HolidayMode::sunday);

/// Number of slices in the concatenated temporal stack: p originals plus
/// sum_{j=2..p} (p - j + 1) path outputs = p(p+1)/2.
constexpr std::size_t temporal_slices(std::size_t p) { return p * (p + 1) / 2; }

/// Kernel j (width j, j = 2..p) at index j - 2; each [j x d] with bias [d].
struct MultiPathParams {
    std::vector<Tensor> kernels;
    std::vector<Tensor> biases;

    MultiPathParams() = default;
    MultiPathParams(std::size_t p, std::size_t d, Rng& rng);
    std::size_t window() const { return kernels.size() + 1; }
    void collect(const std::string& prefix, ParameterList& out) const;
};

/// Path j yields p - j + 1 matrices of [n x d]; result index j - 2.
std::vector<Tensor> multi_path_convolve(const Tensor& x_seq, const MultiPathParams& params);

/// Originals first, then path 2 outputs in time order, then path 3, ... path p.
Tensor concat_temporal(const Tensor& x_seq, const std::vector<Tensor>& path_outputs);

/// One linear layer from the time one-hot to n * p(p+1)/2 values.
struct TimeEmbedParams {
    Tensor weight;  ///< [width x n*S]
    Tensor bias;    ///< [n*S]
    std::size_t vertices = 0;
    std::size_t slices = 0;

    TimeEmbedParams() = default;
    TimeEmbedParams(std::size_t vertices, std::size_t slices, HolidayMode mode);
    void collect(const std::string& prefix, ParameterList& out) const;
};

/// E_t [n x S]: one attention logit row per vertex.
Tensor embed_time(const TimeStamp& t, const TimeEmbedParams& params, HolidayMode mode = HolidayMode::sunday);

/// Softmax over the slice axis of each row of `e`, then the per-vertex
/// weighted sum of the slices. x_bar [S x n x d], e [n x S] -> [n x d].
/// The attention weights are written to `weights_out` when given.
Tensor temporal_attention(const Tensor& x_bar, const Tensor& e, Tensor* weights_out = nullptr);

}  // namespace gamcn
