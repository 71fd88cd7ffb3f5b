#include <doctest.h>

#include <cmath>
#include <random>

#include "tpunet/gradcheck.hpp"
#include "tpunet/tensor.hpp"

using namespace tpunet;

namespace {

Tensor t(Shape s, std::vector<double> d, bool grad = false) { return Tensor::from_data(std::move(s), std::move(d), grad); }

Tensor random_tensor(Shape s, std::mt19937_64& rng, bool grad = true) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> d(shape_numel(s));
    for (double& v : d) v = u(rng);
    return Tensor::from_data(std::move(s), std::move(d), grad);
}

void check_values(const Tensor& x, const std::vector<double>& expected, double tol = 1e-12) {
    REQUIRE(x.numel() == expected.size());
    for (std::size_t i = 0; i < expected.size(); ++i) CHECK(x.data()[i] == doctest::Approx(expected[i]).epsilon(tol));
}

}  // namespace

TEST_CASE("matmul hand product and identity") {
    const Tensor a = t({2, 2}, {1, 2, 3, 4});
    const Tensor b = t({2, 2}, {5, 6, 7, 8});
    check_values(matmul(a, b), {19, 22, 43, 50});
    check_values(matmul(t({2, 2}, {1, 0, 0, 1}), b), {5, 6, 7, 8});
}

TEST_CASE("matmul rejects inner mismatch and names shapes") {
    const Tensor a = Tensor::zeros({2, 3});
    try {
        matmul(a, a);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("(2,3)") != std::string::npos);
    }
}

TEST_CASE("matmul broadcasts batch dims") {
    std::mt19937_64 rng(1);
    const Tensor a = random_tensor({3, 2, 4}, rng, false);
    const Tensor b = random_tensor({4, 5}, rng, false);
    const Tensor c = matmul(a, b);
    CHECK(c.shape() == Shape{3, 2, 5});
    const Tensor c1 = matmul(narrow(a, 0, 1, 1), b);
    for (std::size_t i = 0; i < 10; ++i) CHECK(c.data()[10 + i] == c1.data()[i]);
}

TEST_CASE("conv2d identity, constant image and shapes") {
    std::mt19937_64 rng(2);
    const Tensor x = random_tensor({1, 1, 8, 8}, rng, false);
    const Tensor y = conv2d(x, t({1, 1, 1, 1}, {1.0}), t({1}, {0.0}), Padding::same);
    for (std::size_t i = 0; i < 64; ++i) CHECK(y.data()[i] == x.data()[i]);

    const Tensor c = Tensor::full({1, 1, 5, 5}, 0.7);
    const Tensor s = conv2d(c, Tensor::full({1, 1, 3, 3}, 1.0), {}, Padding::same);
    for (std::size_t r = 1; r < 4; ++r) {
        for (std::size_t q = 1; q < 4; ++q) CHECK(s.at({0, 0, r, q}) == doctest::Approx(9 * 0.7));
    }
    CHECK(s.at({0, 0, 0, 0}) == doctest::Approx(4 * 0.7));

    CHECK(conv2d(x, Tensor::zeros({4, 1, 3, 3}), {}, Padding::same).shape() == Shape{1, 4, 8, 8});
    CHECK(conv2d(x, Tensor::zeros({4, 1, 3, 3}), {}, Padding::valid).shape() == Shape{1, 4, 6, 6});
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 2, 3, 3}), {}, Padding::same), ShapeError);
    CHECK_THROWS_AS(conv2d(x, Tensor::zeros({4, 1, 2, 2}), {}, Padding::same), ShapeError);
}

TEST_CASE("conv2d matches direct summation") {
    std::mt19937_64 rng(3);
    const Tensor x = random_tensor({2, 3, 5, 7}, rng, false);
    const Tensor k = random_tensor({4, 3, 3, 3}, rng, false);
    const Tensor b = random_tensor({4}, rng, false);
    const Tensor y = conv2d(x, k, b, Padding::same);
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t o = 0; o < 4; ++o) {
            for (std::size_t i = 0; i < 5; ++i) {
                for (std::size_t j = 0; j < 7; ++j) {
                    double acc = b.data()[o];
                    for (std::size_t c = 0; c < 3; ++c) {
                        for (int di = -1; di <= 1; ++di) {
                            for (int dj = -1; dj <= 1; ++dj) {
                                const int yy = static_cast<int>(i) + di, xx = static_cast<int>(j) + dj;
                                if (yy < 0 || yy >= 5 || xx < 0 || xx >= 7) continue;
                                acc += x.at({n, c, std::size_t(yy), std::size_t(xx)}) *
                                       k.at({o, c, std::size_t(di + 1), std::size_t(dj + 1)});
                            }
                        }
                    }
                    CHECK(y.at({n, o, i, j}) == doctest::Approx(acc).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("softmax values and invariants") {
    check_values(softmax(t({2}, {0, 0}), 0), {0.5, 0.5});
    check_values(softmax(t({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0), {1.0 / 6, 2.0 / 6, 3.0 / 6});

    std::mt19937_64 rng(4);
    const Tensor x = random_tensor({4, 6}, rng, false);
    const Tensor p = softmax(x, 1);
    const Tensor q = softmax(add_scalar(x, 12.5), 1);
    for (std::size_t r = 0; r < 4; ++r) {
        double sum = 0;
        for (std::size_t c = 0; c < 6; ++c) sum += p.at({r, c});
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
    for (std::size_t i = 0; i < p.numel(); ++i) CHECK(p.data()[i] == doctest::Approx(q.data()[i]).epsilon(1e-12));
    // large logits stay finite
    check_values(softmax(t({2}, {1000, 1000}), 0), {0.5, 0.5});
}

TEST_CASE("masked softmax zeroes removed entries") {
    const Tensor p = masked_softmax(t({2, 3}, {1, 2, 3, 5, 5, 5}), {1, 0, 1, 0, 0, 0});
    CHECK(p.at({0, 1}) == 0.0);
    CHECK(p.at({0, 0}) + p.at({0, 2}) == doctest::Approx(1.0));
    CHECK(p.at({1, 0}) == 1.0);
}

TEST_CASE("elementwise ops and domain errors") {
    check_values(relu(t({3}, {-1, 0, 2})), {0, 0, 2});
    check_values(sigmoid(Tensor::scalar(0.0)), {0.5});
    CHECK_THROWS_AS(log(t({1}, {-1})), DomainError);
    CHECK_THROWS_AS(log(t({1}, {0})), DomainError);
    CHECK_THROWS_AS(div(t({1}, {1}), t({1}, {0})), DomainError);
    check_values(div(t({2}, {1, 3}), t({2}, {2, 4})), {0.5, 0.75});
    check_values(add(t({2, 2}, {1, 2, 3, 4}), t({2}, {10, 20})), {11, 22, 13, 24});
    CHECK_THROWS_AS(add(t({2, 2}, {1, 2, 3, 4}), t({3}, {1, 2, 3})), ShapeError);
    CHECK_THROWS_AS(exp(t({1}, {1000})), NumericError);
}

TEST_CASE("structural ops") {
    CHECK(concat({Tensor::zeros({1, 2, 4}), Tensor::zeros({1, 3, 4})}, 1).shape() == Shape{1, 5, 4});
    CHECK_THROWS_AS(concat({Tensor::zeros({1, 2, 4}), Tensor::zeros({1, 3, 5})}, 1), ShapeError);
    check_values(maxpool2x2(t({1, 1, 2, 2}, {1, 2, 3, 4})), {4});
    CHECK_THROWS_AS(maxpool2x2(Tensor::zeros({1, 1, 3, 2})), ShapeError);
    check_values(reduce_mean(t({2}, {2, 4})), {3});
    check_values(upsample_nearest2x(t({1, 1, 1, 2}, {1, 2})), {1, 1, 2, 2, 1, 1, 2, 2});
    check_values(transpose(t({2, 3}, {1, 2, 3, 4, 5, 6}), 0, 1), {1, 4, 2, 5, 3, 6});
    check_values(embed_lookup(t({3, 2}, {0, 1, 10, 11, 20, 21}), {2, 0}, {2}), {20, 21, 0, 1});
    CHECK_THROWS_AS(embed_lookup(t({3, 2}, {0, 1, 10, 11, 20, 21}), {3}, {1}), DomainError);
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), ShapeError);
}

TEST_CASE("concat then split is the identity") {
    std::mt19937_64 rng(5);
    const Tensor a = random_tensor({2, 3, 4}, rng, false), b = random_tensor({2, 1, 4}, rng, false);
    const auto parts = split(concat({a, b}, 1), 1, {3, 1});
    REQUIRE(parts.size() == 2);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(parts[0].data()[i] == a.data()[i]);
    for (std::size_t i = 0; i < b.numel(); ++i) CHECK(parts[1].data()[i] == b.data()[i]);
}

TEST_CASE("maxpool routes gradient to the first maximum") {
    const Tensor x = t({1, 1, 2, 2}, {3, 3, 1, 3}, true);
    reduce_sum(maxpool2x2(x)).backward();
    check_values(Tensor::from_data({4}, {x.grad().begin(), x.grad().end()}), {1, 0, 0, 0});
}

TEST_CASE("backward analytic cases and misuse") {
    const Tensor x = t({2}, {1, 2}, true);
    reduce_sum(square(x)).backward();
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 4.0);

    const Tensor r = t({1}, {-3}, true);
    reduce_sum(relu(r)).backward();
    CHECK(r.grad()[0] == 0.0);

    const Tensor z = t({2}, {1, 2}, true);
    const Tensor loss = reduce_sum(square(z));
    loss.backward();
    CHECK_THROWS_AS(loss.backward(), AutogradError);
    CHECK_THROWS_AS(square(z).backward(), AutogradError);
    CHECK_THROWS_AS(Tensor::scalar(1.0).backward(), AutogradError);
}

TEST_CASE("tape is topological and visits each node once") {
    const Tensor x = t({2}, {1, 2}, true);
    const Tensor y = square(x);
    const Tensor loss = reduce_sum(add(y, y));
    const Tape tape(loss);
    const auto& nodes = tape.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (const auto& in : nodes[i]->inputs) {
            if (!in->requires_grad) continue;
            const auto pos = std::find(nodes.begin(), nodes.end(), in.get()) - nodes.begin();
            CHECK(static_cast<std::size_t>(pos) < i);
        }
    }
    std::vector<const void*> seen(nodes.begin(), nodes.end());
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    loss.backward();
    CHECK(x.grad()[0] == 4.0);  // d/dx of 2 x^2
}

TEST_CASE("no-grad guard records nothing") {
    const Tensor x = t({2}, {1, 2}, true);
    NoGradGuard guard;
    CHECK_FALSE(square(x).requires_grad());
}

TEST_CASE("forward is bit-identical across evaluations") {
    std::mt19937_64 rng(6);
    const Tensor x = random_tensor({2, 3, 6, 6}, rng, false), k = random_tensor({4, 3, 3, 3}, rng, false);
    const Tensor a = softmax(conv2d(x, k, {}, Padding::same), 1);
    const Tensor b = softmax(conv2d(x, k, {}, Padding::same), 1);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
}

TEST_CASE("grad_check passes on sum of squares and a matmul softmax chain") {
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({3}, rng);
    CHECK(grad_check([x] { return reduce_sum(square(x)); }, {{"x", x}}).passed);

    const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    const Tensor w = random_tensor({3, 2}, rng, false);
    const auto report = grad_check([=] { return reduce_sum(mul(softmax(matmul(a, b), 1), w)); }, {{"a", a}, {"b", b}});
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("grad_check catches a corrupted backward rule") {
    std::mt19937_64 rng(8);
    const Tensor x = random_tensor({4}, rng);
    auto doubled_square = [](const Tensor& in) {
        std::vector<double> out(in.data().begin(), in.data().end());
        for (double& v : out) v *= v;
        return make_op(in.shape(), out, {in}, [](detail::Node& self) {
            auto& src = *self.inputs[0];
            auto& g = src.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += 2.0 * (2.0 * src.data[i]) * self.grad[i];
        });
    };
    const auto report = grad_check([&] { return reduce_sum(doubled_square(x)); }, {{"x", x}});
    CHECK_FALSE(report.passed);
    CHECK(report.max_rel_error == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("grad_check skips relu kinks") {
    const Tensor x = t({3}, {0.0005, -1.0, 1.0}, true);
    const auto report = grad_check([x] { return reduce_sum(relu(x)); }, {{"x", x}});
    CHECK(report.passed);
    CHECK(report.params[0].skipped == 1);
    CHECK(report.params[0].checked == 2);
}
