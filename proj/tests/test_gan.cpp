#include <doctest.h>

#include <cmath>

#include "gamcn/errors.hpp"
#include "gamcn/experiment.hpp"
#include "gamcn/gan.hpp"
#include "support/fixtures.hpp"
#include "support/testing.hpp"

using namespace gamcn;
using gamcn::testing::random_tensor;

namespace {

Discriminator::Options disc_options(std::size_t n, std::size_t q, bool zero_head, std::uint64_t seed = 3) {
    Discriminator::Options o;
    o.vertices = n;
    o.horizon = q;
    o.latent = 6;
    o.hidden = 4;
    o.seed = seed;
    o.zero_head = zero_head;
    return o;
}

std::vector<double> grads_of(const ParameterList& params) {
    std::vector<double> out;
    for (const auto& p : params) {
        const auto g = p.tensor.grad();
        if (g.empty()) {
            out.insert(out.end(), p.tensor.size(), 0.0);
        } else {
            out.insert(out.end(), g.begin(), g.end());
        }
    }
    return out;
}

}  // namespace

TEST_CASE("discriminator scores") {
    Discriminator zeroed(disc_options(4, 3, false));
    for (auto& p : zeroed.parameters()) {
        for (auto& v : p.tensor.mutable_values()) v = 0.0;
    }
    Rng rng(1);
    const auto x = random_tensor({3, 4, 1}, rng, -2, 2);
    CHECK(zeroed.forward(x).item() == 0.5);

    const Discriminator neutral(disc_options(4, 3, true));
    CHECK(neutral.forward(x).item() == 0.5);
    CHECK(neutral.forward(random_tensor({3, 4, 1}, rng, -9, 9)).item() == 0.5);

    const Discriminator live(disc_options(4, 3, false));
    const double s = live.forward(x).item();
    CHECK(s > 0.0);
    CHECK(s < 1.0);
    CHECK(live.forward(x).item() == s);
    CHECK_THROWS_AS(live.forward(random_tensor({2, 4, 1}, rng)), ContractError);
}

TEST_CASE("discriminator input and parameter gradients match finite differences") {
    Discriminator disc(disc_options(4, 3, false));
    Rng rng(2);
    const auto x = random_tensor({3, 4, 1}, rng, -2, 2, true);
    auto loss = [&] { return disc.forward(x); };
    const auto r = testing::check_gradient(x, testing::sample_coords(x.size(), 12, rng), loss);
    INFO(r.worst_where);
    CHECK(r.worst < 1e-4);
    for (auto& p : disc.parameters()) {
        const bool freq = p.name.ends_with("f_hat");
        const auto coords = freq ? testing::unclamped_coords(p.tensor, 10, rng)
                                 : testing::sample_coords(p.tensor.size(), 10, rng);
        REQUIRE(!coords.empty());
        const auto pr = testing::check_gradient(p.tensor, coords, loss);
        INFO(p.name << " " << pr.worst_where);
        CHECK(pr.worst < 1e-4);
    }
}

TEST_CASE("gan loss closed forms") {
    const auto half = Tensor({1}, {0.5});
    CHECK(std::abs(generator_loss(half).item() - std::log(0.5)) < 1e-15);
    CHECK(std::abs(generator_loss(half).item() + 0.6931) < 1e-4);
    const auto l = gan_losses(half, half);
    CHECK(std::abs(l.discriminator.item() - 2.0 * std::log(2.0)) < 1e-15);
    CHECK(std::abs(l.discriminator.item() - 1.3863) < 1e-4);
    const auto mse = Tensor::scalar(3.0);
    CHECK(combined_generator_loss(mse, l.generator, 0.0).item() == l.generator.item());
    CHECK(std::abs(combined_generator_loss(mse, l.generator, 0.01).item() - (0.03 + std::log(0.5))) < 1e-15);

    const auto extreme = gan_losses(Tensor({1}, {0.0}), Tensor({1}, {1.0}));
    CHECK(std::isfinite(extreme.discriminator.item()));
    CHECK(std::abs(extreme.generator.item() - std::log(1e-7)) < 1e-9);
}

TEST_CASE("property: discriminator loss is nonnegative") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto l = gan_losses(Tensor({1}, {u(rng)}), Tensor({1}, {u(rng)}));
        CHECK(l.discriminator.item() >= 0.0);
    }
}

TEST_CASE("gan config defaults and validation") {
    GanConfig g;
    CHECK(g.lambda == 0.01);
    CHECK(g.gen_epochs_per_disc == 5);
    CHECK_NOTHROW(g.validate());
    g.lambda = -1;
    CHECK_THROWS_AS(g.validate(), ConfigError);
    g = {};
    g.gen_epochs_per_disc = 0;
    CHECK_THROWS_AS(g.validate(), ConfigError);
}

TEST_CASE("5:1 schedule over 12 generator epochs with frozen counterparts") {
    const auto ds = testing::tiny_synth(4, 1, 1.0, 4, 2);
    const auto data = prepare_data(ds, 3, 3);
    Gamcn model(testing::config_for(ds, 3, 3, 4), ds.graph);
    Discriminator disc(disc_options(4, 3, true));
    TrainConfig tc;
    tc.batch_size = 4;
    tc.learning_rate = 1e-3;
    GanConfig gc;
    gc.gen_epochs = 12;
    gc.disc_learning_rate = 1e-3;
    const auto r = gan_train(model, disc, testing::head(data.train, 8), testing::head(data.val, 4), tc, gc);
    std::vector<std::size_t> disc_after;
    std::size_t gen_seen = 0;
    for (const auto& e : r.schedule) {
        if (e.phase == "gen") {
            ++gen_seen;
            CHECK(e.discriminator_before == e.discriminator_after);
            CHECK(e.generator_before != e.generator_after);
        } else {
            REQUIRE(e.phase == "disc");
            disc_after.push_back(gen_seen);
            CHECK(e.generator_before == e.generator_after);
            CHECK(e.discriminator_before != e.discriminator_after);
        }
    }
    CHECK(gen_seen == 12);
    CHECK(disc_after == std::vector<std::size_t>{5, 10});
    CHECK(r.history.size() == 14);
    for (const auto& h : r.history) {
        CHECK(std::isfinite(h.train_loss));
        CHECK(std::isfinite(h.val_loss));
    }
}

TEST_CASE("large lambda aligns the combined gradient with the MSE gradient") {
    const auto ds = testing::tiny_synth(4, 1, 1.0, 5, 2);
    const auto data = prepare_data(ds, 3, 3);
    Gamcn model(testing::config_for(ds, 3, 3, 4), ds.graph);
    const Discriminator disc(disc_options(4, 3, false));
    const auto batch = testing::head(data.train, 4);
    auto gradient = [&](bool adversarial) {
        zero_grads(model.parameters());
        for (const auto& w : batch) {
            const auto pred = model.forward(w.input, w.horizon_times);
            const auto mse = mse_loss(pred, w.target);
            backward(adversarial ? combined_generator_loss(mse, generator_loss(disc.forward(pred)), 1e3) : mse);
        }
        return grads_of(model.parameters());
    };
    const auto g_mse = gradient(false);
    const auto g_comb = gradient(true);
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < g_mse.size(); ++i) {
        dot += g_mse[i] * g_comb[i];
        na += g_mse[i] * g_mse[i];
        nb += g_comb[i] * g_comb[i];
    }
    const double cosine = dot / std::sqrt(na * nb);
    CHECK(cosine > 0.99);
    // The adversarial term alone has a distinct direction.
    zero_grads(model.parameters());
    for (const auto& w : batch) backward(generator_loss(disc.forward(model.forward(w.input, w.horizon_times))));
    const auto g_adv = grads_of(model.parameters());
    double adv_norm = 0.0;
    for (double v : g_adv) adv_norm += v * v;
    CHECK(adv_norm > 0.0);
}

TEST_CASE("gan_train rejects mismatched shapes and tainted windows") {
    const auto ds = testing::tiny_synth(4, 1, 1.0, 4, 2);
    const auto data = prepare_data(ds, 3, 3);
    Gamcn model(testing::config_for(ds, 3, 3, 4), ds.graph);
    Discriminator wrong(disc_options(4, 2, true));
    GanConfig gc;
    gc.gen_epochs = 1;
    CHECK_THROWS_AS(gan_train(model, wrong, testing::head(data.train, 4), testing::head(data.val, 4), {}, gc),
                    ConfigError);
    Discriminator disc(disc_options(4, 3, true));
    CHECK_THROWS_AS(gan_train(model, disc, testing::head(data.val, 4), testing::head(data.val, 4), {}, gc),
                    ContractError);
}
