#include <doctest.h>

#include <cmath>

#include "gamcn/errors.hpp"
#include "gamcn/spatial.hpp"
#include "support/testing.hpp"

using namespace gamcn;
using gamcn::testing::random_tensor;

namespace {

Tensor eye(std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    return Tensor({n, n}, std::move(v));
}

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

LpgcnParams random_params(std::size_t n, std::size_t d, std::size_t hops, bool directed, Rng& rng) {
    LpgcnParams p;
    p.hops = hops;
    p.layers = 1;
    p.f_hat = random_tensor({n, n}, rng, 0.5, static_cast<double>(n), true);
    p.w.push_back(random_tensor({d, d}, rng, -1, 1, true));
    p.w_f.emplace_back();
    p.w_b.emplace_back();
    for (std::size_t i = 0; i <= hops; ++i) {
        p.w_f[0].push_back(random_tensor({d, d}, rng, -1, 1, true));
        if (directed) p.w_b[0].push_back(random_tensor({d, d}, rng, -1, 1, true));
    }
    return p;
}

RoadGraph ring(std::size_t n, bool directed) {
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        a[i * n + (i + 1) % n] = 1.0;
        if (!directed) a[((i + 1) % n) * n + i] = 1.0;
    }
    return RoadGraph(n, std::move(a), directed);
}

}  // namespace

TEST_CASE("gcn examples") {
    Rng rng(1);
    const auto x = random_tensor({3, 2}, rng);
    const auto adj0 = normalized_adjacency(RoadGraph(3, std::vector<double>(9, 0.0), false));
    CHECK(values_of(gcn_conv(x, adj0, {eye(2)}, Activation::identity)) == values_of(x));

    const auto adj = normalized_adjacency(RoadGraph(2, {0, 1, 1, 0}, false));
    const auto pre = gcn_conv(Tensor({2, 1}, {2, 0}), adj, {Tensor({1, 1}, {1})}, Activation::identity);
    CHECK(std::abs(pre.at(0, 0) - 1.0) < 1e-15);
    CHECK(std::abs(pre.at(1, 0) - 1.0) < 1e-15);

    const auto out = gcn_conv(random_tensor({4, 5}, rng), normalized_adjacency(ring(4, false)),
                              {random_tensor({5, 5}, rng)});
    CHECK(out.shape() == Shape{4, 5});
}

TEST_CASE("pgcn examples") {
    Rng rng(2);
    const auto x = random_tensor({3, 2}, rng);
    const auto out = pgcn_conv(x, Tensor::zeros({3, 3}), {eye(2)});
    for (double v : out.values()) CHECK(v == 0.0);
    CHECK(values_of(pgcn_conv(x, eye(3), {eye(2)}, Activation::identity)) == values_of(x));

    // With P = A + I both operators normalize identically.
    const RoadGraph g(3, {0, 1, 0, 1, 0, 2, 0, 2, 0}, false);
    std::vector<double> a_tilde = g.adjacency();
    for (std::size_t i = 0; i < 3; ++i) a_tilde[i * 3 + i] += 1.0;
    const auto w = random_tensor({2, 2}, rng);
    const auto via_gcn = gcn_conv(x, normalized_adjacency(g), {w});
    const auto via_pgcn = pgcn_conv(x, Tensor({3, 3}, a_tilde), {w});
    for (std::size_t i = 0; i < via_gcn.size(); ++i) CHECK(std::abs(via_gcn.values()[i] - via_pgcn.values()[i]) < 1e-14);
}

TEST_CASE("lpgcn examples") {
    Rng rng(3);
    LpgcnParams p;
    p.f_hat = Tensor::full({4, 4}, 2.0, true);
    p.w.push_back(random_tensor({3, 3}, rng));
    const auto out = lpgcn_conv(random_tensor({4, 3}, rng), p);
    for (double v : out.values()) CHECK(v == 0.0);
    for (std::size_t n : {1u, 3u, 6u}) {
        for (std::size_t d : {1u, 4u}) {
            auto q = random_params(n, d, 0, false, rng);
            CHECK(lpgcn_conv(random_tensor({n, d}, rng), q).shape() == Shape{n, d});
        }
    }
}

TEST_CASE("lpgcn frequency gradient matches finite differences") {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        auto p = random_params(4, 3, 0, false, rng);
        const auto x = random_tensor({4, 3}, rng);
        auto loss = [&] { return testing::probe(lpgcn_conv(x, p, Activation::identity)); };
        const auto r = testing::check_gradient(p.f_hat, testing::sample_coords(16, 16, rng), loss);
        INFO(r.worst_where);
        CHECK(r.worst < 1e-4);
    }
}

TEST_CASE("diffusion conv with zero hops reduces to x Wf + x Wb") {
    Rng rng(5);
    const auto g = ring(4, true);
    auto p = random_params(4, 3, 0, true, rng);
    const auto x = random_tensor({4, 3}, rng);
    const auto got = lpgcn_diffusion_conv(x, diffusion_supports(g, 0), p, false, Activation::identity);
    const auto expect = add(matmul(x, p.w_f[0][0]), matmul(x, p.w_b[0][0]));
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(std::abs(got.values()[i] - expect.values()[i]) < 1e-14);
    CHECK_THROWS_AS(lpgcn_diffusion_conv(x, diffusion_supports(g, 2), p), ConfigError);
}

TEST_CASE("property: a zero learned-PMI term reproduces the diffusion-only output bit-exactly") {
    Rng rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const bool directed = trial % 2 == 0;
        const std::size_t n = testing::random_index(rng, 2, 6);
        const auto g = ring(n, directed);
        auto p = random_params(n, 3, 2, directed, rng);
        const auto s = diffusion_supports(g, 2);
        const auto x = random_tensor({n, 3}, rng);
        const auto dgcn = lpgcn_diffusion_conv(x, s, p, false);
        const auto zeroed = lpgcn_diffusion_conv(x, s, p, true, Activation::relu, Tensor::zeros({n, n}));
        CHECK(values_of(dgcn) == values_of(zeroed));
    }
}

TEST_CASE("property: every variant yields finite nonnegative n x d outputs") {
    Rng rng(7);
    for (auto variant : {SpatialVariant::gcn, SpatialVariant::dgcn, SpatialVariant::pgcn, SpatialVariant::lpgcn,
                         SpatialVariant::lpgcn_a}) {
        for (int trial = 0; trial < 4; ++trial) {
            const std::size_t n = testing::random_index(rng, 2, 7), d = testing::random_index(rng, 1, 5);
            SpatialLayer::Options o;
            o.variant = variant;
            o.vertices = n;
            o.latent = d;
            o.layers = 1 + trial % 2;
            o.walk_seed = trial;
            SpatialLayer layer(o, ring(n, trial % 2 == 1), rng);
            const auto x = random_tensor({n, d}, rng, -3, 3);
            const auto out = layer.forward(x);
            CHECK(out.shape() == Shape{n, d});
            for (double v : out.values()) CHECK(v >= 0.0);
            const auto batched = layer.forward(reshape(concat({x, x}, 0), {2, n, d}));
            CHECK(batched.shape() == Shape{2, n, d});
            for (std::size_t k = 0; k < n * d; ++k) {
                CHECK(batched.values()[k] == out.values()[k]);
                CHECK(batched.values()[n * d + k] == out.values()[k]);
            }
        }
    }
}

TEST_CASE("adjacency requirements per variant") {
    Rng rng(8);
    SpatialLayer::Options o;
    o.vertices = 3;
    o.latent = 2;
    const RoadGraph bare(3);
    for (auto v : {SpatialVariant::gcn, SpatialVariant::dgcn, SpatialVariant::pgcn, SpatialVariant::lpgcn_a}) {
        o.variant = v;
        CHECK_THROWS_AS(SpatialLayer(o, bare, rng), ConfigError);
    }
    o.variant = SpatialVariant::lpgcn;
    CHECK_NOTHROW(SpatialLayer(o, bare, rng));
    CHECK_THROWS_AS(parse_spatial_variant("chebnet"), ConfigError);
}

TEST_CASE("frequency initialization draws integers in [0, n]") {
    Rng rng(9);
    const auto f = init_learned_frequencies(5, rng);
    CHECK(f.requires_grad());
    for (double v : f.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 5.0);
        CHECK(v == std::floor(v));
    }
}
