#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pifnet/ops.hpp"
#include "pifnet/rng.hpp"
#include "pifnet/tensor.hpp"

using namespace pifnet;

namespace {

std::vector<Scalar> random_values(Rng& rng, std::size_t n, Scalar lo = -1.0, Scalar hi = 1.0) {
    std::vector<Scalar> v(n);
    for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
    return v;
}

}  // namespace

TEST_CASE("elementwise add/mul basics") {
    Tensor a = Tensor::from({2}, {1.0, 2.0});
    Tensor b = Tensor::from({2}, {3.0, 4.0});
    Tensor sum = add(a, b);
    CHECK(sum.data() == std::vector<Scalar>{4.0, 6.0});

    Tensor c = Tensor::from({3}, {1.0, 2.0, 3.0});
    Tensor zeroed = mul(c, 0.0);
    CHECK(zeroed.data() == std::vector<Scalar>{0.0, 0.0, 0.0});
}

TEST_CASE("elementwise matches a scalar loop oracle exactly") {
    Rng rng(11);
    for (EwOp op : {EwOp::Add, EwOp::Sub, EwOp::Mul, EwOp::Div}) {
        auto av = random_values(rng, 40);
        auto bv = random_values(rng, 40, 0.5, 2.0);  // keep divisors away from zero
        Tensor a = Tensor::from({4, 10}, av);
        Tensor b = Tensor::from({4, 10}, bv);
        Tensor out = elementwise(op, a, b);
        for (std::size_t i = 0; i < av.size(); ++i) {
            Scalar want = 0.0;
            switch (op) {
                case EwOp::Add: want = av[i] + bv[i]; break;
                case EwOp::Sub: want = av[i] - bv[i]; break;
                case EwOp::Mul: want = av[i] * bv[i]; break;
                case EwOp::Div: want = av[i] / bv[i]; break;
            }
            CHECK(out.data()[i] == want);
        }
    }
}

TEST_CASE("elementwise rejects shape mismatch") {
    Tensor a = Tensor::from({2}, {1.0, 2.0});
    Tensor b = Tensor::from({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(add(a, b), ShapeError);
}

TEST_CASE("non-finite results are surfaced, not propagated") {
    Tensor a = Tensor::from({1}, {1.0});
    Tensor b = Tensor::from({1}, {0.0});
    CHECK_THROWS_AS(elementwise(EwOp::Div, a, b), NumericalError);
}

TEST_CASE("backward of w*x") {
    Tensor w = Tensor::parameter({1}, {2.0});
    Tensor x = Tensor::from({1}, {3.0});
    Tensor loss = mul(w, x);
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(3.0));
}

TEST_CASE("backward of sum(w^2)") {
    Tensor w = Tensor::parameter({2}, {1.0, -2.0});
    Tensor loss = sum(mul(w, w));
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(2.0));
    CHECK(w.grad()[1] == doctest::Approx(-4.0));
}

TEST_CASE("backward errors: non-scalar loss, consumed graph") {
    Tensor w = Tensor::parameter({2}, {1.0, 2.0});
    Tensor y = mul(w, 2.0);
    CHECK_THROWS_AS(backward(y), ShapeError);

    Tensor loss = sum(y);
    backward(loss);
    CHECK_THROWS_AS(backward(loss), Error);
}

TEST_CASE("composed elementwise graph passes finite differences") {
    Rng rng(5);
    Tensor a = Tensor::parameter({6}, random_values(rng, 6));
    Tensor b = Tensor::parameter({6}, random_values(rng, 6, 0.5, 1.5));
    auto loss_fn = [&]() {
        Tensor t = mul(add(a, b), sub(a, mul(b, 0.5)));
        t = elementwise(EwOp::Div, t, b);
        return mean(mul(t, t));
    };
    CHECK(oracles::fd_max_rel_error(loss_fn, {a, b}) < 1e-4);
}

TEST_CASE("gradients accumulate across shared subexpressions") {
    Tensor w = Tensor::parameter({1}, {3.0});
    Tensor y = mul(w, w);        // w^2
    Tensor loss = sum(add(y, w));  // w^2 + w -> d/dw = 2w + 1
    backward(loss);
    CHECK(w.grad()[0] == doctest::Approx(7.0));
}

TEST_CASE("rng: identical seeds give identical draw sequences") {
    Rng a(123456);
    Rng b(123456);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(123456), d(999);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) all_equal = all_equal && (c.next_u64() == d.next_u64());
    CHECK_FALSE(all_equal);
}

TEST_CASE("rng: child streams are independent of parent draws") {
    Rng a(7);
    Rng child_before = a.child(3);
    (void)a.next_u64();
    (void)a.next_u64();
    Rng child_after = a.child(3);
    for (int i = 0; i < 64; ++i) CHECK(child_before.next_u64() == child_after.next_u64());
}

TEST_CASE("rng uniform stays in [0,1), normal has sane moments") {
    Rng rng(99);
    double sum = 0.0, sum2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double z = rng.normal();
        sum += z;
        sum2 += z * z;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("tensors produced by ops are immutable; leaves are mutable") {
    Tensor a = Tensor::parameter({2}, {1.0, 2.0});
    Tensor y = mul(a, 2.0);
    CHECK_THROWS_AS(y.data_mut(), Error);
    CHECK_NOTHROW(a.data_mut());
}
