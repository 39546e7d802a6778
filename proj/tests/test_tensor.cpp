#include <doctest.h>

#include <cmath>
#include <functional>
#include <string>

#include "gamcn/errors.hpp"
#include "gamcn/tensor.hpp"
#include "support/testing.hpp"

using namespace gamcn;
using gamcn::testing::check_gradient;
using gamcn::testing::probe;
using gamcn::testing::random_tensor;
using gamcn::testing::sample_coords;

namespace {

void require_values(const Tensor& t, const std::vector<double>& expected, double tol = 0.0) {
    REQUIRE(t.size() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(std::abs(t.values()[i] - expected[i]) <= tol);
}

}  // namespace

TEST_CASE("tensor construction validates shape and finiteness") {
    CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
    CHECK_THROWS_AS(Tensor({0}, {}), DimensionError);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1}, {1}), DimensionError);
    CHECK_THROWS_AS(Tensor({1}, {std::nan("")}), NumericError);
    CHECK_THROWS_AS(Tensor({1}, {INFINITY}), NumericError);
    const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.size() == 6);
    CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("matmul examples") {
    const Tensor eye({2, 2}, {1, 0, 0, 1});
    const Tensor m({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(eye, m).at(3) == 4.0);
    require_values(matmul(eye, m), {1, 2, 3, 4});
    const auto r = matmul(Tensor({1, 2}, {1, 2}), Tensor({2, 1}, {3, 4}));
    CHECK(r.shape() == Shape{1, 1});
    CHECK(r.item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
    try {
        matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("by [2x3]") != std::string::npos);
    }
}

TEST_CASE("quadratic form gradient matches finite differences") {
    Rng rng(3);
    const Tensor x = random_tensor({4, 1}, rng, -1, 1, true);
    const Tensor w = random_tensor({4, 4}, rng, -1, 1, true);
    auto loss = [&] { return sum(matmul(reshape(x, {1, 4}), matmul(w, x))); };
    CHECK(check_gradient(x, {0, 1, 2, 3}, loss).worst < 1e-4);
    CHECK(check_gradient(w, sample_coords(16, 16, rng), loss).worst < 1e-4);
}

TEST_CASE("elementwise examples") {
    require_values(relu(Tensor({3}, {-1, 0, 2})), {0, 0, 2});
    CHECK(sigmoid(Tensor::scalar(0.0)).item() == 0.5);
    const Tensor x = Tensor::scalar(0.0, true);
    backward(sigmoid(x));
    CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));
    NoGradGuard guard;
    const double h = 1e-5;
    const double fd = (sigmoid(Tensor::scalar(h)).item() - sigmoid(Tensor::scalar(-h)).item()) / (2 * h);
    CHECK(std::abs(fd - 0.25) < 1e-9);
}

TEST_CASE("log raises on non-positive input; clamped log does not") {
    CHECK_THROWS_AS(log(Tensor({2}, {1.0, 0.0})), DomainError);
    CHECK_THROWS_AS(log(Tensor({1}, {-2.0})), DomainError);
    const auto c = log_clamped(Tensor({2}, {0.0, 1.0}), 1e-12);
    CHECK(c.values()[0] == doctest::Approx(std::log(1e-12)));
    CHECK(c.values()[1] == 0.0);
}

TEST_CASE("non-finite op outputs are hard errors") {
    const Tensor big({1}, {1e308});
    CHECK_THROWS_AS(scale(big, 10.0), NumericError);
}

TEST_CASE("softmax rows") {
    require_values(softmax_rows(Tensor({1, 2}, {0, 0})), {0.5, 0.5}, 1e-15);
    const auto s = softmax_rows(Tensor({1, 2}, {std::log(2.0), 0.0}));
    CHECK(std::abs(s.values()[0] - 2.0 / 3.0) < 1e-15);
    CHECK(std::abs(s.values()[1] - 1.0 / 3.0) < 1e-15);
    CHECK_THROWS_AS(softmax_rows(Tensor({3}, {1, 2, 3})), DimensionError);
}

TEST_CASE("property: softmax rows are probability vectors even for large logits") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t m = testing::random_index(rng, 1, 6), n = testing::random_index(rng, 1, 9);
        const auto s = softmax_rows(random_tensor({m, n}, rng, -700, 700));
        for (std::size_t i = 0; i < m; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                CHECK(s.at(i, j) >= 0.0);
                total += s.at(i, j);
            }
            CHECK(std::abs(total - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("conv1d_time examples") {
    const Tensor seq({3, 1, 1}, {1, 3, 5});
    const Tensor kernel({2, 1}, {0.5, 0.5});
    const auto out = conv1d_time(seq, kernel);
    CHECK(out.shape() == Shape{2, 1, 1});
    require_values(out, {2, 4});
    CHECK(conv1d_time(Tensor::zeros({4, 2, 3}), Tensor::zeros({4, 3})).dim(0) == 1);
    CHECK_THROWS_AS(conv1d_time(Tensor::zeros({3, 2, 3}), Tensor::zeros({4, 3})), ConfigError);
}

TEST_CASE("property: conv1d_time output length is p - j + 1") {
    for (std::size_t p = 2; p <= 12; ++p) {
        for (std::size_t j = 2; j <= p; ++j) {
            CHECK(conv1d_time(Tensor::zeros({p, 2, 3}), Tensor::zeros({j, 3})).dim(0) == p - j + 1);
        }
    }
}

TEST_CASE("concat examples") {
    const Tensor a({2, 3}, {1, 2, 3, 4, 5, 6});
    require_values(concat({a}, 0), {1, 2, 3, 4, 5, 6});
    for (std::size_t p : {4u, 12u}) {
        std::vector<Tensor> parts;
        for (std::size_t len = p; len >= 1; --len) parts.push_back(Tensor::zeros({len, 3, 2}));
        CHECK(concat(parts, 0).dim(0) == p * (p + 1) / 2);
    }
    const auto c = concat({Tensor({1, 2}, {1, 2}), Tensor({1, 2}, {3, 4})}, 0);
    require_values(c, {1, 2, 3, 4});
    const auto c1 = concat({Tensor({2, 1}, {1, 2}), Tensor({2, 1}, {3, 4})}, 1);
    require_values(c1, {1, 3, 2, 4});
    CHECK_THROWS_AS(concat({Tensor::zeros({2, 2}), Tensor::zeros({2, 3})}, 0), DimensionError);
}

TEST_CASE("backward examples") {
    const Tensor x = Tensor::full({2, 3}, 0.7, true);
    backward(sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);

    const Tensor a = Tensor::scalar(3.0, true), b = Tensor::scalar(4.0, true);
    backward(mul(a, b));
    CHECK(a.grad()[0] == 4.0);
    CHECK(b.grad()[0] == 3.0);

    CHECK_THROWS_AS(backward(Tensor::zeros({2}, true)), ContractError);
}

TEST_CASE("gradients accumulate across fan-out") {
    const Tensor x = Tensor::scalar(2.0, true);
    backward(add(mul(x, x), x));
    CHECK(x.grad()[0] == 5.0);
}

TEST_CASE("tape visits inputs before consumers") {
    const Tensor x = Tensor::full({2}, 1.0, true);
    const auto y = relu(x);
    const auto root = sum(mul(y, y));
    const auto tape = Tape::record(root);
    const auto& nodes = tape.nodes();
    REQUIRE(!nodes.empty());
    CHECK(nodes.back() == root.node());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (const auto& in : nodes[i]->inputs) {
            bool earlier = false;
            for (std::size_t j = 0; j < i; ++j) earlier = earlier || nodes[j] == in;
            CHECK((earlier || in->inputs.empty()));
        }
    }
}

TEST_CASE("no-grad guard records nothing") {
    const Tensor x = Tensor::full({2}, 1.0, true);
    {
        NoGradGuard guard;
        CHECK_FALSE(grad_enabled());
        const auto y = relu(x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(grad_enabled());
    CHECK(relu(x).requires_grad());
}

TEST_CASE("only leaves are mutable") {
    const Tensor x = Tensor::full({2}, 1.0, true);
    auto y = relu(x);
    CHECK_THROWS_AS(y.mutable_values(), ContractError);
}

// Each op is checked on 10 random small instances.
TEST_CASE("property: every primitive matches central finite differences") {
    using Op = std::function<Tensor(const std::vector<Tensor>&)>;
    struct Case {
        std::string name;
        std::vector<Shape> shapes;
        Op op;
        double lo = -1.0, hi = 1.0;
    };
    const std::vector<std::size_t> rows{0, 2};
    const std::vector<Case> cases{
        {"matmul", {{3, 4}, {4, 2}}, [](auto& v) { return matmul(v[0], v[1]); }},
        {"left_matmul", {{3, 4}, {2, 4, 3}}, [](auto& v) { return left_matmul(v[0], v[1]); }},
        {"add", {{3, 2}, {3, 2}}, [](auto& v) { return add(v[0], v[1]); }},
        {"sub", {{3, 2}, {3, 2}}, [](auto& v) { return sub(v[0], v[1]); }},
        {"mul", {{3, 2}, {3, 2}}, [](auto& v) { return mul(v[0], v[1]); }},
        {"scale", {{4}}, [](auto& v) { return scale(v[0], -1.7); }},
        {"add_scalar", {{4}}, [](auto& v) { return add_scalar(v[0], 0.3); }},
        {"relu", {{2, 5}}, [](auto& v) { return relu(v[0]); }},
        {"sigmoid", {{2, 5}}, [](auto& v) { return sigmoid(v[0]); }},
        {"tanh", {{2, 5}}, [](auto& v) { return tanh(v[0]); }},
        {"log", {{2, 5}}, [](auto& v) { return log(v[0]); }, 0.5, 2.0},
        {"log_clamped", {{2, 5}}, [](auto& v) { return log_clamped(v[0], 1e-3); }, 0.5, 2.0},
        {"clamp", {{2, 5}}, [](auto& v) { return clamp(v[0], -0.5, 0.5); }},
        {"add_bias", {{2, 3, 4}, {4}}, [](auto& v) { return add_bias(v[0], v[1]); }},
        {"broadcast_rows", {{4}}, [](auto& v) { return broadcast_rows(v[0], 3); }},
        {"sum", {{2, 3}}, [](auto& v) { return sum(v[0]); }},
        {"mean", {{2, 3}}, [](auto& v) { return mean(v[0]); }},
        {"mse", {{2, 3}, {2, 3}}, [](auto& v) { return mean_squared_error(v[0], v[1]); }},
        {"softmax_rows", {{3, 4}}, [](auto& v) { return softmax_rows(v[0]); }},
        {"conv1d_time", {{5, 2, 3}, {3, 3}, {3}}, [](auto& v) { return conv1d_time(v[0], v[1], v[2]); }},
        {"concat0", {{2, 3}, {1, 3}}, [](auto& v) { return concat({v[0], v[1]}, 0); }},
        {"concat2", {{2, 3, 1}, {2, 3, 2}}, [](auto& v) { return concat({v[0], v[1]}, 2); }},
        {"stack", {{2, 3}, {2, 3}}, [](auto& v) { return stack({v[0], v[1]}); }},
        {"select", {{3, 2, 2}}, [](auto& v) { return select(v[0], 1); }},
        {"reshape", {{2, 6}}, [](auto& v) { return reshape(v[0], {3, 4}); }},
        {"slice_mix", {{4, 3, 2}, {3, 4}}, [](auto& v) { return slice_mix(v[0], v[1]); }},
        {"sum_rows", {{3, 4}}, [&rows](auto& v) { return sum_rows(v[0], rows); }},
        {"learned_pmi", {{3, 3}}, [](auto& v) { return learned_pmi(v[0]); }, 0.5, 3.0},
    };
    Rng rng(2024);
    for (const auto& c : cases) {
        for (int instance = 0; instance < 10; ++instance) {
            std::vector<Tensor> inputs;
            for (const auto& s : c.shapes) inputs.push_back(random_tensor(s, rng, c.lo, c.hi, true));
            auto loss = [&] { return probe(c.op(inputs)); };
            for (const auto& in : inputs) {
                const auto r = check_gradient(in, sample_coords(in.size(), 64, rng), loss);
                INFO(c.name << " instance " << instance << " " << r.worst_where);
                CHECK(r.worst < 1e-4);
            }
        }
    }
}

TEST_CASE("backward is deterministic") {
    auto run = [] {
        Rng rng(5);
        const Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
        const Tensor b = random_tensor({4, 2}, rng, -1, 1, true);
        backward(probe(softmax_rows(matmul(a, b))));
        return std::vector<double>(a.grad().begin(), a.grad().end());
    };
    CHECK(run() == run());
}
