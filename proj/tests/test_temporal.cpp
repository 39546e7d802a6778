#include <doctest.h>

#include <cmath>

#include "gamcn/errors.hpp"
#include "gamcn/temporal.hpp"
#include "support/testing.hpp"

using namespace gamcn;
using gamcn::testing::random_tensor;

namespace {

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST_CASE("property: slice count identity for p in [2, 16]") {
    for (std::size_t p = 2; p <= 16; ++p) {
        std::size_t paths = 0;
        for (std::size_t j = 2; j <= p; ++j) paths += p - j + 1;
        CHECK(paths + p == temporal_slices(p));
        CHECK(temporal_slices(p) * 2 == p * (p + 1));
    }
    CHECK(temporal_slices(2) == 3);
    CHECK(temporal_slices(4) == 10);
    CHECK(temporal_slices(12) == 78);
}

TEST_CASE("multi-path convolution examples") {
    Rng rng(1);
    const MultiPathParams p2(2, 3, rng);
    const auto out2 = multi_path_convolve(random_tensor({2, 4, 3}, rng), p2);
    REQUIRE(out2.size() == 1);
    CHECK(out2[0].dim(0) == 1);

    const MultiPathParams p12(12, 3, rng);
    CHECK(p12.kernels.size() == 11);
    const auto out12 = multi_path_convolve(random_tensor({12, 4, 3}, rng), p12);
    REQUIRE(out12.size() == 11);
    std::size_t total = 0;
    for (std::size_t i = 0; i < out12.size(); ++i) {
        CHECK(out12[i].dim(0) == 11 - i);
        CHECK(out12[i].shape()[1] == 4);
        total += out12[i].dim(0);
    }
    CHECK(total == 66);

    MultiPathParams avg(2, 2, rng);
    for (auto& v : avg.kernels[0].mutable_values()) v = 0.5;
    const Tensor constant = Tensor::full({2, 3, 2}, 1.25);
    const auto paths = multi_path_convolve(constant, avg);
    for (double v : paths[0].values()) CHECK(v == 1.25);

    CHECK_THROWS_AS(MultiPathParams(1, 3, rng), ConfigError);
    CHECK_THROWS_AS(multi_path_convolve(random_tensor({3, 4, 3}, rng), p2), ConfigError);
}

TEST_CASE("concat_temporal ordering") {
    Rng rng(2);
    for (std::size_t p : {2u, 5u, 12u}) {
        const MultiPathParams mp(p, 3, rng);
        const auto x = random_tensor({p, 4, 3}, rng);
        const auto paths = multi_path_convolve(x, mp);
        const auto bar = concat_temporal(x, paths);
        CHECK(bar.dim(0) == temporal_slices(p));
        CHECK(values_of(select(bar, 0)) == values_of(select(x, 0)));
        CHECK(values_of(select(bar, p - 1)) == values_of(select(x, p - 1)));
        CHECK(values_of(select(bar, p)) == values_of(select(paths[0], 0)));
        CHECK(values_of(select(bar, temporal_slices(p) - 1)) == values_of(select(paths.back(), 0)));
    }
}

TEST_CASE("time one-hot examples") {
    const auto origin = time_onehot_indices({0, 0, false});
    CHECK(origin == std::array<std::size_t, 2>{0, 288});
    const auto monday = time_onehot_indices({1, 1, false});
    CHECK(monday == std::array<std::size_t, 2>{1, 289});
    CHECK(time_onehot({0, 0, false}).size() == 295);
    CHECK(time_vector_width(HolidayMode::extra_day) == 296);
    CHECK(time_onehot_indices({10, 3, true}, HolidayMode::sunday)[1] == 288);
    CHECK(time_onehot_indices({10, 3, true}, HolidayMode::extra_day)[1] == 295);
    CHECK(time_onehot_indices({10, 3, false}, HolidayMode::extra_day)[1] == 291);
    CHECK_THROWS_AS(time_onehot({288, 0, false}), ContractError);
    CHECK_THROWS_AS(time_onehot({0, 7, false}), ContractError);
    CHECK_THROWS_AS(time_onehot({-1, 0, false}), ContractError);
}

TEST_CASE("property: every valid stamp has exactly two hot entries") {
    for (int day = 0; day < 7; ++day) {
        for (int slot = 0; slot < 288; slot += 7) {
            const auto v = time_onehot({slot, day, false});
            double total = 0.0;
            std::size_t ones = 0;
            for (double x : v.values()) {
                total += x;
                ones += x == 1.0;
            }
            CHECK(total == 2.0);
            CHECK(ones == 2);
        }
    }
}

TEST_CASE("time embedding examples") {
    const TimeEmbedParams big(400, 78, HolidayMode::sunday);
    CHECK(embed_time({3, 2, false}, big).shape() == Shape{400, 78});

    const TimeEmbedParams zero(3, 6, HolidayMode::sunday);
    Tensor weights;
    temporal_attention(Tensor::zeros({6, 3, 2}), embed_time({5, 4, false}, zero), &weights);
    for (double w : weights.values()) CHECK(std::abs(w - 1.0 / 6.0) < 1e-15);

    Rng rng(3);
    TimeEmbedParams p(3, 6, HolidayMode::sunday);
    auto w = p.weight.mutable_values();
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& x : w) x = u(rng);
    CHECK(values_of(embed_time({17, 2, false}, p)) == values_of(embed_time({17, 2, false}, p)));
    CHECK(values_of(embed_time({17, 2, false}, p)) != values_of(embed_time({18, 2, false}, p)));
    CHECK_THROWS_AS(embed_time({1, 1, false}, p, HolidayMode::extra_day), ConfigError);
}

TEST_CASE("temporal attention examples") {
    Rng rng(4);
    const std::size_t s = 78, n = 3, d = 2;
    const auto bar = random_tensor({s, n, d}, rng);
    const auto uniform = temporal_attention(bar, Tensor::zeros({n, s}));
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t k = 0; k < d; ++k) {
            double mean = 0.0;
            for (std::size_t sl = 0; sl < s; ++sl) mean += bar.at(sl, v, k);
            mean /= static_cast<double>(s);
            CHECK(std::abs(uniform.at(v, k) - mean) < 1e-12);
        }
    }
    std::vector<double> logits(n * s, 0.0);
    const std::size_t pick = 41;
    for (std::size_t v = 0; v < n; ++v) logits[v * s + pick] = 40.0;
    const auto sat = temporal_attention(bar, Tensor({n, s}, logits));
    double worst = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t k = 0; k < d; ++k) worst = std::max(worst, std::abs(sat.at(v, k) - bar.at(pick, v, k)));
    }
    CHECK(worst < 1e-9);
    CHECK_THROWS_AS(temporal_attention(bar, Tensor::zeros({n, s - 1})), DimensionError);
}

TEST_CASE("property: attention weights form a simplex and outputs stay in the convex hull") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t s = testing::random_index(rng, 1, 12), n = testing::random_index(rng, 1, 5),
                          d = testing::random_index(rng, 1, 4);
        const auto bar = random_tensor({s, n, d}, rng, -5, 5);
        Tensor w;
        const auto out = temporal_attention(bar, random_tensor({n, s}, rng, -20, 20), &w);
        for (std::size_t v = 0; v < n; ++v) {
            double total = 0.0;
            for (std::size_t sl = 0; sl < s; ++sl) {
                CHECK(w.at(v, sl) >= 0.0);
                total += w.at(v, sl);
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
            for (std::size_t k = 0; k < d; ++k) {
                double lo = INFINITY, hi = -INFINITY;
                for (std::size_t sl = 0; sl < s; ++sl) {
                    lo = std::min(lo, bar.at(sl, v, k));
                    hi = std::max(hi, bar.at(sl, v, k));
                }
                CHECK(out.at(v, k) >= lo - 1e-12);
                CHECK(out.at(v, k) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("property: permuting slices with their logits leaves attention output unchanged") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t s = testing::random_index(rng, 2, 10), n = 3, d = 2;
        const auto bar = random_tensor({s, n, d}, rng);
        const auto e = random_tensor({n, s}, rng, -3, 3);
        const std::size_t a = testing::random_index(rng, 0, s - 1), b = testing::random_index(rng, 0, s - 1);
        std::vector<double> bv = values_of(bar), ev = values_of(e);
        for (std::size_t k = 0; k < n * d; ++k) std::swap(bv[a * n * d + k], bv[b * n * d + k]);
        for (std::size_t v = 0; v < n; ++v) std::swap(ev[v * s + a], ev[v * s + b]);
        const auto x = temporal_attention(bar, e);
        const auto y = temporal_attention(Tensor({s, n, d}, bv), Tensor({n, s}, ev));
        for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x.values()[k] - y.values()[k]) < 1e-12);
    }
}

TEST_CASE("temporal parameter gradients match finite differences") {
    Rng rng(7);
    const std::size_t p = 4, n = 3, d = 2;
    const MultiPathParams mp(p, d, rng);
    TimeEmbedParams te(n, temporal_slices(p), HolidayMode::sunday);
    for (auto& x : te.weight.mutable_values()) x = std::uniform_real_distribution<double>(-1, 1)(rng);
    const auto x = random_tensor({p, n, d}, rng);
    const TimeStamp t{100, 3, false};
    auto loss = [&] {
        const auto bar = concat_temporal(x, multi_path_convolve(x, mp));
        return testing::probe(temporal_attention(bar, embed_time(t, te)));
    };
    for (std::size_t j = 0; j < mp.kernels.size(); ++j) {
        CHECK(testing::check_gradient(mp.kernels[j], testing::sample_coords(mp.kernels[j].size(), 20, rng), loss).worst <
              1e-4);
        CHECK(testing::check_gradient(mp.biases[j], {0, 1}, loss).worst < 1e-4);
    }
    std::vector<std::size_t> hot;
    const std::size_t width = te.weight.dim(1);
    for (auto row : time_onehot_indices(t)) {
        for (std::size_t k = 0; k < width; k += 3) hot.push_back(row * width + k);
    }
    CHECK(testing::check_gradient(te.weight, hot, loss).worst < 1e-4);
}
