#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "iprnet/core/autodiff.hpp"
#include "iprnet/core/nn.hpp"
#include "iprnet/core/rng.hpp"
#include "oracles.hpp"

using namespace iprnet;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform_real(lo, hi);
    return t;
}

} // namespace

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng s1 = Rng(42).split(1), s2 = Rng(42).split(2);
    CHECK(s1.next_u64() != s2.next_u64());

    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform_real();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("rng sample_indices returns distinct indices") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        auto idx = rng.sample_indices(10, 6);
        std::set<int> s(idx.begin(), idx.end());
        CHECK(s.size() == 6);
        for (int i : idx) {
            CHECK(i >= 0);
            CHECK(i < 10);
        }
    }
}

TEST_CASE("tensor basics and checksum sensitivity") {
    Tensor t({2, 3}, 1.5);
    CHECK(t.numel() == 6);
    CHECK(t.at(1, 2) == 1.5);
    const auto c0 = checksum_bytes(t);
    t.at(0, 0) += 1e-12;
    CHECK(checksum_bytes(t) != c0);
}

TEST_CASE("autodiff: elementwise ops against finite differences") {
    Rng rng(11);
    Var a(random_tensor({3, 4}, rng), true);
    Var b(random_tensor({3, 4}, rng), true);

    auto rebuild = [&]() {
        return sum(mul(add(a, scale(b, 0.5)), sub(a, b))).value().item();
    };
    Var loss = sum(mul(add(a, scale(b, 0.5)), sub(a, b)));
    backward(loss);
    CHECK(oracles::fd_check_leaf(a, rebuild, a.grad(), 1e-6, 1e-6) == 0);
    CHECK(oracles::fd_check_leaf(b, rebuild, b.grad(), 1e-6, 1e-6) == 0);
}

TEST_CASE("autodiff: grads accumulate until zero_grad") {
    Var a(Tensor({2}, 1.0), true);
    backward(sum(a));
    backward(sum(a));
    CHECK(a.grad()[0] == doctest::Approx(2.0));
    a.zero_grad();
    backward(sum(a));
    CHECK(a.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("conv2d forward matches a naive reference") {
    Rng rng(5);
    for (const auto& [stride, pad] : std::vector<std::pair<int, int>>{{1, 1}, {2, 1}, {1, 0}, {4, 1}}) {
        const Tensor x = random_tensor({3, 8, 8}, rng);
        const Tensor w = random_tensor({5, 3, 3, 3}, rng);
        const Tensor b = random_tensor({5}, rng);
        const Var out = conv2d(Var(x), Var(w), Var(b), stride, pad);
        const Tensor ref = oracles::conv2d_oracle(x, w, b, stride, pad);
        REQUIRE(out.value().same_shape(ref));
        for (std::int64_t i = 0; i < ref.numel(); ++i)
            CHECK(out.value()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(6);
    Var x(random_tensor({2, 5, 5}, rng), true);
    Var w(random_tensor({3, 2, 3, 3}, rng), true);
    Var b(random_tensor({3}, rng), true);

    auto rebuild = [&]() { return sum(relu(conv2d(x, w, b, 1, 1))).value().item(); };
    Var loss = sum(relu(conv2d(x, w, b, 1, 1)));
    backward(loss);
    CHECK(oracles::fd_check_leaf(x, rebuild, x.grad(), 1e-6, 1e-5) == 0);
    CHECK(oracles::fd_check_leaf(w, rebuild, w.grad(), 1e-6, 1e-5) == 0);
    CHECK(oracles::fd_check_leaf(b, rebuild, b.grad(), 1e-6, 1e-5) == 0);
}

TEST_CASE("conv2d rejects channel mismatches") {
    Rng rng(7);
    Var x(random_tensor({2, 4, 4}, rng));
    Var w(random_tensor({3, 5, 3, 3}, rng));
    Var b(Tensor({3}));
    CHECK_THROWS_AS(conv2d(x, w, b, 1, 1), ShapeError);
}

TEST_CASE("avg_pool_to and upsample_nearest gradients") {
    Rng rng(8);
    Var x(random_tensor({2, 6, 6}, rng), true);
    auto rebuild = [&]() {
        return sum(upsample_nearest(avg_pool_to(x, 3, 3), 6, 6)).value().item();
    };
    Var loss = sum(upsample_nearest(avg_pool_to(x, 3, 3), 6, 6));
    backward(loss);
    CHECK(oracles::fd_check_leaf(x, rebuild, x.grad(), 1e-6, 1e-6) == 0);
}

TEST_CASE("upsample(pool(x)) restores spatial dims") {
    Rng rng(9);
    for (int h : {4, 6, 8, 10, 16}) {
        Var x(random_tensor({1, h, h}, rng));
        const Var pooled = avg_pool_to(x, std::max(1, h / 2), std::max(1, h / 2));
        const Var up = upsample_nearest(pooled, h, h);
        CHECK(up.value().dim(1) == h);
        CHECK(up.value().dim(2) == h);
    }
}

TEST_CASE("nearest resize is identity at equal size") {
    Rng rng(10);
    Var x(random_tensor({2, 5, 7}, rng));
    const Var same = upsample_nearest(x, 5, 7);
    for (std::int64_t i = 0; i < x.value().numel(); ++i) CHECK(same.value()[i] == x.value()[i]);
}

TEST_CASE("concat_channels splits gradient correctly") {
    Rng rng(12);
    Var a(random_tensor({2, 3, 3}, rng), true);
    Var b(random_tensor({1, 3, 3}, rng), true);
    auto rebuild = [&]() { return sum(mul(concat_channels({a, b}), concat_channels({a, b}))).value().item(); };
    Var loss = sum(mul(concat_channels({a, b}), concat_channels({a, b})));
    backward(loss);
    CHECK(oracles::fd_check_leaf(a, rebuild, a.grad(), 1e-6, 1e-6) == 0);
    CHECK(oracles::fd_check_leaf(b, rebuild, b.grad(), 1e-6, 1e-6) == 0);
}

TEST_CASE("softmax_channels normalizes and differentiates") {
    Rng rng(13);
    Var x(random_tensor({2, 4, 4}, rng, -3.0, 3.0), true);
    const Var s = softmax_channels(x);
    for (int y = 0; y < 4; ++y)
        for (int xx = 0; xx < 4; ++xx)
            CHECK(s.value().at(0, y, xx) + s.value().at(1, y, xx) == doctest::Approx(1.0).epsilon(1e-12));

    Rng wrng(14);
    const Tensor weights = random_tensor({2, 4, 4}, wrng);
    auto rebuild = [&]() { return sum(mul(softmax_channels(x), Var(weights))).value().item(); };
    Var loss = sum(mul(softmax_channels(x), Var(weights)));
    backward(loss);
    CHECK(oracles::fd_check_leaf(x, rebuild, x.grad(), 1e-6, 1e-5) == 0);
}

TEST_CASE("no gradient flows into frozen leaves") {
    Rng rng(15);
    Var frozen(random_tensor({2, 4, 4}, rng), false);
    Var w(random_tensor({2, 2, 1, 1}, rng), true);
    Var b(Tensor({2}), true);
    Var loss = sum(conv2d(frozen, w, b, 1, 0));
    backward(loss);
    CHECK(w.grad().numel() == w.value().numel());
    bool any = false;
    for (std::int64_t i = 0; i < frozen.grad().numel(); ++i) any = any || frozen.grad()[i] != 0.0;
    CHECK_FALSE(any); // grad buffer exists but stays zero
}
