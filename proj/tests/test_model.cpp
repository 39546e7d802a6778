#include <doctest.h>

#include <cmath>

#include "gamcn/errors.hpp"
#include "gamcn/model.hpp"
#include "support/testing.hpp"

using namespace gamcn;
using gamcn::testing::random_tensor;

namespace {

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

RoadGraph ring(std::size_t n, bool directed) {
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        a[i * n + (i + 1) % n] = 1.0;
        if (!directed) a[((i + 1) % n) * n + i] = 1.0;
    }
    return RoadGraph(n, std::move(a), directed);
}

ModelConfig small_config(std::size_t n = 4, std::size_t p = 3, std::size_t q = 3, std::size_t d = 4) {
    ModelConfig c;
    c.vertices = n;
    c.p = p;
    c.q = q;
    c.latent = d;
    c.mapper_hidden = 5;
    return c;
}

std::vector<TimeStamp> stamps(std::size_t q, int first = 96) {
    std::vector<TimeStamp> out;
    for (std::size_t i = 0; i < q; ++i) out.push_back({static_cast<int>(first + i), 2, false});
    return out;
}

// Independent tally of the parameter layout.
std::size_t hand_count(const ModelConfig& c, bool directed) {
    const std::size_t n = c.vertices, d = c.latent, h = c.mapper_hidden, k = c.conditions;
    const std::size_t s = c.p * (c.p + 1) / 2;
    std::size_t total = k * h + h + h * d + d + d * h + h + h * k + k;
    const std::size_t dirs = directed ? 2 : 1;
    if (c.ablation != Ablation::no_spatial) {
        switch (c.spatial) {
            case SpatialVariant::gcn:
            case SpatialVariant::pgcn: total += c.layers * d * d; break;
            case SpatialVariant::lpgcn: total += n * n + c.layers * d * d; break;
            case SpatialVariant::dgcn: total += c.layers * (c.hops + 1) * dirs * d * d; break;
            case SpatialVariant::lpgcn_a: total += n * n + c.layers * (d * d + (c.hops + 1) * dirs * d * d); break;
        }
    }
    if (c.ablation != Ablation::no_temporal) {
        for (std::size_t j = 2; j <= c.p; ++j) total += j * d + d;
    }
    const std::size_t width = c.holiday_mode == HolidayMode::sunday ? 295 : 296;
    switch (c.ablation) {
        case Ablation::full: total += width * n * s + n * s + 2 * d * d + d; break;
        case Ablation::no_spatial: total += width * n * s + n * s; break;
        case Ablation::no_temporal: total += width * n * s + n * s + s * d + d; break;
        case Ablation::attention_off: total += s + 1 + 2 * d * d + d; break;
    }
    return total;
}

}  // namespace

TEST_CASE("gated fusion examples") {
    Rng rng(1);
    const std::size_t d = 3;
    FusionParams f(d, rng);
    for (auto& v : f.w1.mutable_values()) v = 0.0;
    for (auto& v : f.w2.mutable_values()) v = 0.0;
    const auto z = random_tensor({4, d}, rng), t = random_tensor({4, d}, rng);
    Tensor gate;
    const auto neutral = gated_fusion(z, t, f, &gate);
    for (double g : gate.values()) CHECK(g == 0.5);
    for (std::size_t i = 0; i < z.size(); ++i) {
        CHECK(std::abs(neutral.values()[i] - (z.values()[i] + t.values()[i]) / 2) < 1e-15);
    }
    for (auto& v : f.b.mutable_values()) v = 10.0;
    const auto open = gated_fusion(z, t, f, &gate);
    for (double g : gate.values()) CHECK(std::abs(g - 0.9999546021312976) < 1e-12);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(std::abs(open.values()[i] - z.values()[i]) < 1e-4 * 2);
    CHECK_THROWS_AS(gated_fusion(z, random_tensor({3, d}, rng), f), DimensionError);
}

TEST_CASE("property: fused output lies between its inputs and gates stay in (0, 1)") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = testing::random_index(rng, 1, 6), m = testing::random_index(rng, 1, 6);
        FusionParams f(d, rng);
        const auto z = random_tensor({m, d}, rng, -3, 3), t = random_tensor({m, d}, rng, -3, 3);
        Tensor gate;
        const auto out = gated_fusion(z, t, f, &gate);
        for (double g : gate.values()) {
            CHECK(g > 0.0);
            CHECK(g < 1.0);
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out.values()[i] >= std::min(z.values()[i], t.values()[i]) - 1e-12);
            CHECK(out.values()[i] <= std::max(z.values()[i], t.values()[i]) + 1e-12);
        }
        const auto same = gated_fusion(z, z, f);
        for (std::size_t i = 0; i < same.size(); ++i) CHECK(std::abs(same.values()[i] - z.values()[i]) < 1e-12);
    }
}

TEST_CASE("input mapper examples") {
    Rng rng(3);
    TwoLayerMlp mapper(1, 10, 100, rng);
    CHECK(map_input(random_tensor({400, 1}, rng), mapper).shape() == Shape{400, 100});
    for (auto* l : {&mapper.first, &mapper.second}) {
        for (auto& v : l->weight.mutable_values()) v = 0.0;
        for (auto& v : l->bias.mutable_values()) v = 0.0;
    }
    const auto mapped = map_input(random_tensor({5, 1}, rng), mapper);
    for (double v : mapped.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(map_input(random_tensor({5, 2}, rng), mapper), DimensionError);

    TwoLayerMlp m2(2, 4, 3, rng);
    const auto x = random_tensor({5, 2}, rng);
    auto loss = [&] { return testing::probe(map_input(x, m2)); };
    for (auto* l : {&m2.first, &m2.second}) {
        CHECK(testing::check_gradient(l->weight, testing::sample_coords(l->weight.size(), 12, rng), loss).worst < 1e-4);
        CHECK(testing::check_gradient(l->bias, testing::sample_coords(l->bias.size(), 4, rng), loss).worst < 1e-4);
    }
}

TEST_CASE("model output shape at full-size dimensions") {
    ModelConfig c = small_config(400, 12, 12, 8);
    c.spatial = SpatialVariant::lpgcn;
    const Gamcn model(c, RoadGraph(400));
    Rng rng(4);
    NoGradGuard guard;
    CHECK(model.forward(random_tensor({12, 400, 1}, rng), stamps(12)).shape() == Shape{12, 400, 1});
}

TEST_CASE("zero network emits the output-mapper bias") {
    Gamcn model(small_config(), ring(4, false));
    for (auto& p : model.parameters()) {
        for (auto& v : p.tensor.mutable_values()) v = 0.0;
    }
    Rng rng(5);
    const auto x = random_tensor({3, 4, 1}, rng);
    const auto zero_out = model.forward(x, stamps(3));
    for (double v : zero_out.values()) CHECK(v == 0.0);
    for (auto& v : model.parameters().back().tensor.mutable_values()) v = 0.7;
    CHECK(model.parameters().back().name == "output_mapper.1.bias");
    const auto bias_out = model.forward(x, stamps(3));
    for (double v : bias_out.values()) CHECK(v == 0.7);
}

TEST_CASE("forward is bit-identical across calls and constructions") {
    const auto c = small_config();
    const Gamcn a(c, ring(4, true)), b(c, ring(4, true));
    Rng rng(6);
    const auto x = random_tensor({3, 4, 1}, rng);
    CHECK(values_of(a.forward(x, stamps(3))) == values_of(a.forward(x, stamps(3))));
    CHECK(values_of(a.forward(x, stamps(3))) == values_of(b.forward(x, stamps(3))));
}

TEST_CASE("forward contract errors") {
    const Gamcn model(small_config(), ring(4, false));
    Rng rng(7);
    CHECK_THROWS_AS(model.forward(random_tensor({2, 4, 1}, rng), stamps(3)), ContractError);
    CHECK_THROWS_AS(model.forward(random_tensor({3, 4, 1}, rng), stamps(2)), ContractError);
    CHECK_THROWS_AS(Gamcn(small_config(5), ring(4, false)), ConfigError);
    auto bad = small_config();
    bad.p = 1;
    CHECK_THROWS_AS(Gamcn(bad, ring(4, false)), ConfigError);
    bad.ablation = Ablation::no_temporal;
    CHECK_NOTHROW(Gamcn(bad, ring(4, false)));
    CHECK_THROWS_AS(parse_ablation("no_fusion"), ConfigError);
}

TEST_CASE("property: parameter count follows the closed form") {
    Rng rng(8);
    const std::vector<SpatialVariant> variants{SpatialVariant::gcn, SpatialVariant::dgcn, SpatialVariant::pgcn,
                                               SpatialVariant::lpgcn, SpatialVariant::lpgcn_a};
    const std::vector<Ablation> ablations{Ablation::full, Ablation::no_spatial, Ablation::no_temporal,
                                          Ablation::attention_off};
    for (int trial = 0; trial < 30; ++trial) {
        auto c = small_config(testing::random_index(rng, 2, 6), testing::random_index(rng, 2, 5),
                              testing::random_index(rng, 1, 5), testing::random_index(rng, 1, 5));
        c.spatial = variants[trial % variants.size()];
        c.ablation = ablations[(trial / 5) % ablations.size()];
        c.hops = testing::random_index(rng, 0, 3);
        c.layers = testing::random_index(rng, 1, 2);
        c.conditions = testing::random_index(rng, 1, 2);
        c.holiday_mode = trial % 3 == 0 ? HolidayMode::extra_day : HolidayMode::sunday;
        const bool directed = trial % 2 == 1;
        const Gamcn model(c, ring(c.vertices, directed));
        INFO("variant " << to_string(c.spatial) << " ablation " << to_string(c.ablation));
        CHECK(parameter_count(model.parameters()) == hand_count(c, directed));
        CHECK(Gamcn::expected_parameter_count(c, directed) == hand_count(c, directed));
    }
}

TEST_CASE("property: horizon outputs are independent of other horizons' timestamps") {
    const auto c = small_config(4, 3, 3, 4);
    Gamcn model(c, ring(4, false));
    Rng rng(9);
    auto& w = model.parameters();
    for (auto& p : w) {
        if (p.name.rfind("time_embedding", 0) == 0) {
            for (auto& v : p.tensor.mutable_values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        }
    }
    const auto x = random_tensor({3, 4, 1}, rng);
    const auto base_times = stamps(3);
    const auto base = model.forward(x, base_times);
    for (std::size_t i = 0; i < 3; ++i) {
        auto times = base_times;
        times[i].slot += 50;
        times[i].day = (times[i].day + 3) % 7;
        const auto moved = model.forward(x, times);
        for (std::size_t j = 0; j < 3; ++j) {
            bool same = true;
            for (std::size_t k = 0; k < 4; ++k) same = same && moved.at(j, k, 0) == base.at(j, k, 0);
            CHECK(same == (j != i));
        }
    }
}

TEST_CASE("trace exposes simplex attention, open gates and nonnegative learned PMI") {
    for (auto ablation : {Ablation::full, Ablation::attention_off}) {
        auto c = small_config();
        c.ablation = ablation;
        const Gamcn model(c, ring(4, false));
        Rng rng(10);
        ForwardTrace trace;
        model.forward(random_tensor({3, 4, 1}, rng), stamps(3), &trace);
        CHECK(trace.attention.size() == (ablation == Ablation::full ? 3u : 0u));
        for (const auto& a : trace.attention) {
            for (std::size_t v = 0; v < a.dim(0); ++v) {
                double total = 0.0;
                for (std::size_t s = 0; s < a.dim(1); ++s) total += a.at(v, s);
                CHECK(std::abs(total - 1.0) < 1e-9);
            }
        }
        REQUIRE(trace.gates.defined());
        for (double g : trace.gates.values()) CHECK((g > 0.0 && g < 1.0));
        REQUIRE(trace.learned_pmi.defined());
        for (double v : trace.learned_pmi.values()) CHECK(v >= 0.0);
    }
}

TEST_CASE("every ablation and variant produces finite q x n x c output") {
    Rng rng(11);
    for (auto ablation : {Ablation::full, Ablation::no_spatial, Ablation::no_temporal, Ablation::attention_off}) {
        for (auto variant : {SpatialVariant::gcn, SpatialVariant::dgcn, SpatialVariant::pgcn, SpatialVariant::lpgcn,
                             SpatialVariant::lpgcn_a}) {
            auto c = small_config(4, 4, 2, 3);
            c.ablation = ablation;
            c.spatial = variant;
            const Gamcn model(c, ring(4, true));
            const auto out = model.forward(random_tensor({4, 4, 1}, rng), stamps(2));
            CHECK(out.shape() == Shape{2, 4, 1});
        }
    }
    auto c = small_config(4, 2, 4, 3);
    CHECK(c.effective_fallback());
    const Gamcn longer(c, ring(4, false));
    CHECK(longer.forward(random_tensor({2, 4, 1}, rng), stamps(4)).shape() == Shape{4, 4, 1});
}

TEST_CASE("adjacency-free variant builds on a bare graph") {
    auto c = small_config();
    c.spatial = SpatialVariant::lpgcn;
    CHECK_NOTHROW(Gamcn(c, RoadGraph(4)));
    c.spatial = SpatialVariant::lpgcn_a;
    CHECK_THROWS_AS(Gamcn(c, RoadGraph(4)), ConfigError);
}
