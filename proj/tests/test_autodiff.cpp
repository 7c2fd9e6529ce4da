#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <vector>

#include "ramlc/grad_check.hpp"
#include "ramlc/param_store.hpp"
#include "ramlc/rng.hpp"
#include "ramlc/tape.hpp"

using namespace ramlc;

namespace {

template <typename Real>
TensorT<Real> random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
    TensorT<Real> t(std::move(shape));
    for (auto& v : t.raw()) v = static_cast<Real>(rng.normal() * scale);
    return t;
}

// Independent central-difference oracle. Rebuilds the graph from scratch for
// every probe, so it shares no state with the backward pass under test.
using Graph = std::function<Tape64::Id(Tape64&, std::vector<Tape64::Id>&)>;

double fd_vs_analytic(const Graph& graph, std::vector<Tensor64> leaves, double step = 1e-5) {
    auto eval = [&](const std::vector<Tensor64>& ls) {
        Tape64 tape;
        std::vector<Tape64::Id> ids;
        for (const auto& l : ls) ids.push_back(tape.leaf(l));
        auto out = graph(tape, ids);
        return tape.value(out)[0];
    };

    Tape64 tape;
    std::vector<Tape64::Id> ids;
    for (const auto& l : leaves) ids.push_back(tape.leaf(l));
    auto loss = graph(tape, ids);
    tape.backward(loss);

    double worst = 0.0;
    for (std::size_t l = 0; l < leaves.size(); ++l) {
        Tensor64 analytic = tape.grad(ids[l]);
        for (std::size_t i = 0; i < leaves[l].numel(); ++i) {
            auto probe = leaves;
            probe[l][i] += step;
            const double plus = eval(probe);
            probe[l][i] -= 2 * step;
            const double minus = eval(probe);
            const double numeric = (plus - minus) / (2 * step);
            worst = std::max(worst, relative_error(analytic[i], numeric));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("gradient of a plain sum is all ones", "[autodiff]") {
    Tape64 tape;
    Rng rng(3);
    auto p = tape.leaf(random_tensor<double>(Shape{3, 4}, rng));
    auto loss = tape.sum(p);
    tape.backward(loss);
    Tensor64 g = tape.grad(p);
    for (std::size_t i = 0; i < g.numel(); ++i) REQUIRE(g[i] == 1.0);
}

TEST_CASE("gradient of half squared norm equals the parameter", "[autodiff]") {
    Tape64 tape;
    Rng rng(4);
    Tensor64 p = random_tensor<double>(Shape{7}, rng);
    auto pid = tape.leaf(p);
    auto loss = tape.scale(tape.sum(tape.mul(pid, pid)), 0.5);
    tape.backward(loss);
    Tensor64 g = tape.grad(pid);
    for (std::size_t i = 0; i < p.numel(); ++i) REQUIRE(g[i] == Catch::Approx(p[i]).margin(1e-12));
}

TEST_CASE("unreached leaves get zero gradient", "[autodiff]") {
    Tape64 tape;
    auto a = tape.leaf(Tensor64(Shape{2}, 1.0));
    auto b = tape.leaf(Tensor64(Shape{2}, 2.0));
    auto loss = tape.sum(a);
    tape.backward(loss);
    REQUIRE_FALSE(tape.has_grad(b));
    Tensor64 g = tape.grad(b);
    REQUIRE(g[0] == 0.0);
    REQUIRE(g[1] == 0.0);
}

TEST_CASE("backward rejects non-scalar or off-tape losses", "[autodiff][errors]") {
    Tape64 tape;
    auto a = tape.leaf(Tensor64(Shape{2, 2}, 1.0));
    REQUIRE_THROWS_AS(tape.backward(a), ShapeError);
    REQUIRE_THROWS_AS(tape.backward(Tape64::Id{99}), std::out_of_range);
}

TEST_CASE("every primitive matches central finite differences", "[autodiff][property]") {
    // 20 random shapes/seeds per primitive, 64-bit, step 1e-5, rel err < 1e-4.
    // Each primitive is probed in isolation: loss = sum(out * W) with a fixed
    // random weighting so output gradients are non-uniform.
    const double kTol = 1e-4;
    Rng shapes(2024);

    auto weighted = [](const Graph& primitive) {
        return [primitive](Tape64& t, std::vector<Tape64::Id>& in) {
            auto out = primitive(t, in);
            Rng wrng(55);
            auto w = t.leaf(random_tensor<double>(t.value(out).shape(), wrng));
            return t.sum(t.mul(out, w));
        };
    };

    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(derive_seed(17, trial));
        const std::size_t m = 1 + shapes.uniform_index(4);
        const std::size_t k = 1 + shapes.uniform_index(5);
        const std::size_t n = 1 + shapes.uniform_index(4);

        SECTION("trial " + std::to_string(trial)) {
            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.matmul(in[0], in[1]);
                                   }),
                                   {random_tensor<double>(Shape{m, k}, rng),
                                    random_tensor<double>(Shape{k, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.matmul_nt(in[0], in[1]);
                                   }),
                                   {random_tensor<double>(Shape{m, k}, rng),
                                    random_tensor<double>(Shape{n, k}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.add(in[0], in[1]);  // row broadcast
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng),
                                    random_tensor<double>(Shape{n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.mul(in[0], in[1]);
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng),
                                    random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.scale(in[0], -1.7);
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.sigmoid(in[0]);
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.gelu(in[0]);
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.softmax_rows(in[0]);
                                   }),
                                   {random_tensor<double>(Shape{m, n}, rng, 2.0)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.layer_norm(in[0], in[1], in[2]);
                                   }),
                                   {random_tensor<double>(Shape{m, 2 + n}, rng),
                                    random_tensor<double>(Shape{2 + n}, rng),
                                    random_tensor<double>(Shape{2 + n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.embedding(in[0], {0, 2, 1, 2});
                                   }),
                                   {random_tensor<double>(Shape{3, k}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.concat_cols({in[0], in[1], in[0]});
                                   }),
                                   {random_tensor<double>(Shape{m, k}, rng),
                                    random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.take_row(in[0], 1);
                                   }),
                                   {random_tensor<double>(Shape{2 + m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(weighted([](Tape64& t, std::vector<Tape64::Id>& in) {
                                       return t.reshape(in[0], Shape{1, 6});
                                   }),
                                   {random_tensor<double>(Shape{2, 3}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(
                        [](Tape64& t, std::vector<Tape64::Id>& in) { return t.mean(in[0]); },
                        {random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(
                        [](Tape64& t, std::vector<Tape64::Id>& in) { return t.sum(in[0]); },
                        {random_tensor<double>(Shape{m, n}, rng)}) < kTol);

            REQUIRE(fd_vs_analytic(
                        [&](Tape64& t, std::vector<Tape64::Id>& in) {
                            Tensor64 targets(Shape{k});
                            for (std::size_t i = 0; i < k; ++i) targets[i] = double(i % 2);
                            return t.bce_with_logits(in[0], targets);
                        },
                        {random_tensor<double>(Shape{k}, rng, 2.0)}) < kTol);
        }
    }
}

TEST_CASE("tiny two-layer network gradients match finite differences", "[autodiff]") {
    Rng rng(0);
    const std::size_t in_dim = 5, hidden = 4, out_dim = 3;
    Tensor64 x = random_tensor<double>(Shape{2, in_dim}, rng);
    Tensor64 targets(Shape{2 * out_dim});
    for (std::size_t i = 0; i < targets.numel(); ++i) targets[i] = double((i * 7 % 3) == 0);

    auto graph = [&](Tape64& t, std::vector<Tape64::Id>& in) {
        auto h = t.gelu(t.add(t.matmul(t.leaf(x), in[0]), in[1]));
        auto z = t.add(t.matmul(h, in[2]), in[3]);
        return t.bce_with_logits(t.reshape(z, Shape{2 * out_dim}), targets);
    };

    const double worst = fd_vs_analytic(graph, {random_tensor<double>(Shape{in_dim, hidden}, rng),
                                                random_tensor<double>(Shape{hidden}, rng),
                                                random_tensor<double>(Shape{hidden, out_dim}, rng),
                                                random_tensor<double>(Shape{out_dim}, rng)});
    REQUIRE(worst < 1e-4);
}

TEST_CASE("grad_check on a linear model is exact to 1e-10", "[gradcheck]") {
    Rng rng(11);
    ParamStore64 params;
    params.add("w", random_tensor<double>(Shape{6, 3}, rng));
    Tensor64 x = random_tensor<double>(Shape{2, 6}, rng);

    // the map is linear in w, so any central-difference step is exact up to
    // rounding; a larger step keeps cancellation noise below 1e-10
    auto report = grad_check<double>(
        [&](Tape64& t, ParamLeaves<double>& leaves) {
            return t.sum(t.matmul(t.leaf(x), leaves("w")));
        },
        params, 10, 1e-2, 1e-10, 42);

    REQUIRE(report.per_param.size() == 1);
    REQUIRE(report.per_param[0].param == "w");
    REQUIRE(report.max_rel_err < 1e-10);
    REQUIRE(report.passed);
}

TEST_CASE("grad_check flags a non-deterministic forward fn", "[gradcheck][errors]") {
    ParamStore64 params;
    params.add("w", Tensor64(Shape{2}, 1.0));
    int calls = 0;
    REQUIRE_THROWS_WITH(grad_check<double>(
                            [&](Tape64& t, ParamLeaves<double>& leaves) {
                                auto noisy = t.leaf(Tensor64(Shape{2}, 0.01 * ++calls));
                                return t.sum(t.add(leaves("w"), noisy));
                            },
                            params, 4, 1e-5, 1e-4),
                        Catch::Matchers::ContainsSubstring("not deterministic"));
}

TEST_CASE("grad_check rejects a non-positive step", "[gradcheck][errors]") {
    ParamStore64 params;
    params.add("w", Tensor64(Shape{2}, 1.0));
    REQUIRE_THROWS_AS(grad_check<double>(
                          [](Tape64& t, ParamLeaves<double>& leaves) {
                              return t.sum(leaves("w"));
                          },
                          params, 1, 0.0, 1e-4),
                      std::invalid_argument);
}
