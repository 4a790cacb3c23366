#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>

#include "avaca/error.hpp"
#include "avaca/gradcheck.hpp"
#include "avaca/ops.hpp"
#include "avaca/rng.hpp"

using namespace avaca;

namespace {

Array random_array(Rng& rng, Shape shape, double scale = 1.0) {
  Array a(std::move(shape));
  for (double& v : a.mutable_data()) v = scale * rng.normal();
  return a;
}

// Weighted sum so that every output element gets a distinct upstream gradient.
Var weighted_sum(const Var& x, std::uint64_t seed) {
  Rng rng(seed);
  Array w = random_array(rng, x.shape());
  return ops::sum(ops::mul(x, Var::constant(w)));
}

}  // namespace

TEST_CASE("array rejects non-finite values and bad sizes") {
  CHECK_THROWS_AS(Array::vector({1.0, std::numeric_limits<double>::quiet_NaN()}), NumericError);
  CHECK_THROWS_AS(Array::vector({std::numeric_limits<double>::infinity()}), NumericError);
  CHECK_THROWS_AS(Array({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
  CHECK(Array({2, 3}).size() == 6);
}

TEST_CASE("matmul") {
  const Var eye = Var::constant(Array::matrix({{1, 0}, {0, 1}}));
  const Var b = Var::constant(Array::matrix({{3, 4}, {5, 6}}));
  CHECK(ops::matmul(eye, b).value() == b.value());

  const Var row = Var::constant(Array::matrix({{1, 2}}));
  const Var col = Var::constant(Array::matrix({{3}, {4}}));
  CHECK(ops::matmul(row, col).value().item() == 11.0);

  const Var a23 = Var::constant(Array({2, 3}));
  const Var b22 = Var::constant(Array({2, 2}));
  try {
    ops::matmul(a23, b22);
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
    CHECK(msg.find("(2x2)") != std::string::npos);
  }
}

TEST_CASE("softmax_rows") {
  const Var zeros = Var::constant(Array::matrix({{0, 0, 0}}));
  for (double scale : {0.5, 1.0, 7.0}) {
    const Array y = ops::softmax_rows(zeros, scale).value();
    for (double v : y.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  }

  const Array y = ops::softmax_rows(Var::constant(Array::matrix({{1, 2}})), 1.0).value();
  CHECK(std::abs(y[0] - 0.26894) < 1e-4);
  CHECK(std::abs(y[1] - 0.73106) < 1e-4);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = 1 + rng.below(6), n = 1 + rng.below(9);
    const Array out = ops::softmax_rows(Var::constant(random_array(rng, {m, n}, 20.0)), 0.3 + rng.uniform()).value();
    for (std::size_t r = 0; r < m; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        CHECK(out(r, c) >= 0.0);
        total += out(r, c);
      }
      CHECK(std::abs(total - 1.0) <= 1e-12);
    }
  }

  CHECK_THROWS_AS(ops::softmax_rows(zeros, 0.0), ParameterError);
  CHECK_THROWS_AS(ops::softmax_rows(zeros, -1.0), ParameterError);
}

TEST_CASE("conv1d") {
  Rng rng(5);
  const Array seq = random_array(rng, {6, 3});

  SUBCASE("width-1 identity kernel is exact") {
    Array k({1, 3, 3});
    for (std::size_t i = 0; i < 3; ++i) k[i * 3 + i] = 1.0;
    const Array out = ops::conv1d(Var::constant(seq), Var::constant(k), Var::constant(Array({3}))).value();
    CHECK(out == seq);
  }

  SUBCASE("width-3 kernel with identity center tap is exact") {
    Array k({3, 3, 3});
    for (std::size_t i = 0; i < 3; ++i) k[9 + i * 3 + i] = 1.0;
    const Array out = ops::conv1d(Var::constant(seq), Var::constant(k), Var::constant(Array({3}))).value();
    CHECK(out == seq);
  }

  SUBCASE("single clip only sees the center tap") {
    const Array one = random_array(rng, {1, 2});
    const Array k = random_array(rng, {3, 2, 4});
    const Array b = random_array(rng, {4});
    const Array out = ops::conv1d(Var::constant(one), Var::constant(k), Var::constant(b)).value();
    for (std::size_t o = 0; o < 4; ++o) {
      double expected = b[o];
      for (std::size_t c = 0; c < 2; ++c) expected += one[c] * k[(1 * 2 + c) * 4 + o];
      CHECK(out[o] == doctest::Approx(expected).epsilon(1e-14));
    }
  }

  SUBCASE("averaging kernel on a constant input") {
    // Interior rows average three copies of 6; the edges see one zero pad.
    const Array constant = Array::filled({5, 1}, 6.0);
    const Array k = Array::filled({3, 1, 1}, 1.0 / 3.0);
    const Array out = ops::conv1d(Var::constant(constant), Var::constant(k), Var::constant(Array({1}))).value();
    CHECK(out[0] == doctest::Approx(4.0));
    for (std::size_t i = 1; i < 4; ++i) CHECK(out[i] == doctest::Approx(6.0));
    CHECK(out[4] == doctest::Approx(4.0));
  }

  CHECK_THROWS_AS(ops::conv1d(Var::constant(seq), Var::constant(Array({2, 3, 3})), Var::constant(Array({3}))),
                  ParameterError);
  CHECK_THROWS_AS(ops::conv1d(Var::constant(seq), Var::constant(Array({3, 4, 3})), Var::constant(Array({3}))),
                  DimensionError);
}

TEST_CASE("conv2d") {
  SUBCASE("1x1 unit kernel is the identity") {
    Rng rng(11);
    const Array map = random_array(rng, {4, 5});
    const Array out = ops::conv2d(Var::constant(map), Var::constant(Array::filled({1, 1, 1}, 1.0)),
                                  Var::constant(Array({1})))
                          .value();
    CHECK(out.shape() == Shape{4, 5, 1});
    CHECK(out.data().size() == map.size());
    for (std::size_t i = 0; i < map.size(); ++i) CHECK(out[i] == map[i]);
  }

  SUBCASE("3x3 ones kernel on a 3x3 ones map") {
    const Array out = ops::conv2d(Var::constant(Array::filled({3, 3}, 1.0)),
                                  Var::constant(Array::filled({3, 3, 1}, 1.0)), Var::constant(Array({1})))
                          .value();
    CHECK(out[4] == 9.0);  // center
    CHECK(out[0] == 4.0);  // corners
    CHECK(out[2] == 4.0);
    CHECK(out[6] == 4.0);
    CHECK(out[8] == 4.0);
    CHECK(out[1] == 6.0);  // edges
  }

  SUBCASE("channel_mix with one unit channel is the identity") {
    Rng rng(12);
    const Array x = random_array(rng, {3, 4, 1});
    const Array out = ops::channel_mix(Var::constant(x), Var::constant(Array::filled({1}, 1.0)),
                                      Var::constant(Array({1})))
                          .value();
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(out[i] == x[i]);
  }

  CHECK_THROWS_AS(ops::conv2d(Var::constant(Array({3, 3})), Var::constant(Array({2, 3, 1})),
                              Var::constant(Array({1}))),
                  ParameterError);
  CHECK_THROWS_AS(ops::conv2d(Var::constant(Array({3, 3})), Var::constant(Array({3, 4, 1})),
                              Var::constant(Array({1}))),
                  ParameterError);
}

TEST_CASE("backward basics") {
  SUBCASE("x squared") {
    const Var x = Var::parameter(Array::scalar(3.0));
    backward(ops::sum(ops::square(x)));
    CHECK(x.grad().item() == 6.0);
  }

  SUBCASE("diamond y = x + x") {
    const Var x = Var::parameter(Array::scalar(1.5));
    backward(ops::add(x, x));
    CHECK(x.grad().item() == 2.0);
  }

  SUBCASE("sum of matmul: dA = ones * B^T") {
    const Var a = Var::parameter(Array::matrix({{1, 2, 3}, {4, 5, 6}}));
    const Var b = Var::parameter(Array::matrix({{1, -1}, {2, 0.5}, {-3, 4}}));
    backward(ops::sum(ops::matmul(a, b)));
    // Row sums of B: 0, 2.5, 1.
    const Array ga = a.grad();
    for (std::size_t r = 0; r < 2; ++r) {
      CHECK(ga(r, 0) == doctest::Approx(0.0));
      CHECK(ga(r, 1) == doctest::Approx(2.5));
      CHECK(ga(r, 2) == doctest::Approx(1.0));
    }
    // dB = A^T * ones: column sums of A.
    const Array gb = b.grad();
    CHECK(gb(0, 0) == doctest::Approx(5.0));
    CHECK(gb(1, 1) == doctest::Approx(7.0));
    CHECK(gb(2, 0) == doctest::Approx(9.0));
  }

  SUBCASE("non-scalar root") {
    const Var x = Var::parameter(Array::vector({1, 2}));
    CHECK_THROWS_AS(backward(ops::square(x)), ContractError);
  }

  SUBCASE("two consumers sum their single-path gradients") {
    Rng rng(21);
    const Array x0 = random_array(rng, {3, 4});
    auto path_a = [](const Var& x) { return ops::sum(ops::square(x)); };
    auto path_b = [](const Var& x) { return ops::sum(ops::sigmoid(ops::affine(x, 2.0, 0.5))); };

    const Var xa = Var::parameter(x0);
    backward(path_a(xa));
    const Var xb = Var::parameter(x0);
    backward(path_b(xb));
    const Var both = Var::parameter(x0);
    backward(ops::add(path_a(both), path_b(both)));
    for (std::size_t i = 0; i < x0.size(); ++i) {
      CHECK(both.grad()[i] == doctest::Approx(xa.grad()[i] + xb.grad()[i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("finite_diff_check") {
  SUBCASE("linear function is exact") {
    const GraphFunction f = [](const std::vector<Var>& v) {
      return ops::sum(ops::affine(v[0], 3.0, 1.0));
    };
    const auto r = finite_diff_check(f, {Array::vector({0.3, -1.2, 4.0})});
    CHECK(r.max_relative_error < 1e-9);
    CHECK(r.coordinates == 3);
  }

  SUBCASE("softmax cross-entropy composite") {
    Rng rng(8);
    const GraphFunction f = [](const std::vector<Var>& v) {
      const Var p = ops::softmax_rows(ops::matmul(v[0], v[1]), 1.0);
      const std::vector<std::size_t> targets{1, 5, 6};  // row-major picks of a 3x3
      return ops::affine(ops::mean(ops::log_clamped(ops::gather(p, targets), 1e-12, 1.0)), -1.0, 0.0);
    };
    const auto r = finite_diff_check(f, {random_array(rng, {3, 4}), random_array(rng, {4, 3})});
    CHECK(r.max_relative_error < 1e-3);
  }

  CHECK_THROWS_AS(finite_diff_check([](const std::vector<Var>& v) { return ops::sum(v[0]); },
                                    {Array::scalar(1.0)}, 0.0),
                  ParameterError);
}

TEST_CASE("every primitive matches finite differences on random shapes") {
  Rng rng(1234);
  using Builder = std::function<Var(const std::vector<Var>&)>;
  struct Case {
    const char* name;
    std::function<std::vector<Array>(Rng&)> inputs;
    Builder build;
  };
  auto dims = [](Rng& r) { return 1 + r.below(4); };

  const std::vector<Case> cases = {
      {"matmul",
       [&](Rng& r) {
         const std::size_t m = dims(r), k = dims(r), n = dims(r);
         return std::vector<Array>{random_array(r, {m, k}), random_array(r, {k, n})};
       },
       [](const std::vector<Var>& v) { return ops::matmul(v[0], v[1]); }},
      {"transpose", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r), dims(r)})}; },
       [](const std::vector<Var>& v) { return ops::transpose(v[0]); }},
      {"add/sub/mul",
       [&](Rng& r) {
         const Shape s{dims(r), dims(r)};
         return std::vector<Array>{random_array(r, s), random_array(r, s)};
       },
       [](const std::vector<Var>& v) { return ops::mul(ops::add(v[0], v[1]), ops::sub(v[0], v[1])); }},
      {"add_bias",
       [&](Rng& r) {
         const std::size_t m = dims(r), n = dims(r);
         return std::vector<Array>{random_array(r, {m, n}), random_array(r, {n})};
       },
       [](const std::vector<Var>& v) { return ops::add_bias(v[0], v[1]); }},
      {"broadcast_scalar", [&](Rng& r) { return std::vector<Array>{random_array(r, {1})}; },
       [](const std::vector<Var>& v) { return ops::broadcast_scalar(v[0], {2, 3}); }},
      {"sigmoid/square", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r), dims(r)})}; },
       [](const std::vector<Var>& v) { return ops::square(ops::sigmoid(v[0])); }},
      {"relu", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r), dims(r)})}; },
       [](const std::vector<Var>& v) { return ops::relu(v[0]); }},
      {"log_clamped",
       [&](Rng& r) {
         Array a({dims(r), dims(r)});
         for (double& x : a.mutable_data()) x = r.uniform(0.05, 0.95);
         return std::vector<Array>{a};
       },
       [](const std::vector<Var>& v) { return ops::log_clamped(v[0], 1e-7, 1.0 - 1e-7); }},
      {"mean", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r), dims(r)})}; },
       [](const std::vector<Var>& v) { return ops::mean(v[0]); }},
      {"softmax_rows", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r), dims(r) + 1})}; },
       [](const std::vector<Var>& v) { return ops::softmax_rows(v[0], 1.7); }},
      {"slice/concat",
       [&](Rng& r) {
         const std::size_t m = dims(r);
         return std::vector<Array>{random_array(r, {m, 4}), random_array(r, {m, 2})};
       },
       [](const std::vector<Var>& v) { return ops::concat_cols({ops::slice_cols(v[0], 1, 3), v[1]}); }},
      {"row_diff", [&](Rng& r) { return std::vector<Array>{random_array(r, {dims(r) + 1, dims(r)})}; },
       [](const std::vector<Var>& v) { return ops::row_diff(v[0]); }},
      {"gather", [&](Rng& r) { return std::vector<Array>{random_array(r, {5})}; },
       [](const std::vector<Var>& v) {
         const std::vector<std::size_t> idx{4, 0, 4, 2};
         return ops::gather(v[0], idx);
       }},
      {"conv1d",
       [&](Rng& r) {
         const std::size_t t = dims(r) + 1, din = dims(r), dout = dims(r);
         const std::size_t w = r.below(2) ? 3 : 5;
         return std::vector<Array>{random_array(r, {t, din}), random_array(r, {w, din, dout}),
                                   random_array(r, {dout})};
       },
       [](const std::vector<Var>& v) { return ops::conv1d(v[0], v[1], v[2]); }},
      {"conv2d + channel_mix",
       [&](Rng& r) {
         const std::size_t ch = dims(r);
         return std::vector<Array>{random_array(r, {dims(r) + 1, dims(r) + 2}), random_array(r, {3, 3, ch}),
                                   random_array(r, {ch}), random_array(r, {ch}), random_array(r, {1})};
       },
       [](const std::vector<Var>& v) { return ops::channel_mix(ops::conv2d(v[0], v[1], v[2]), v[3], v[4]); }},
  };

  for (const auto& c : cases) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::vector<Array> point = c.inputs(rng);
      const std::uint64_t wseed = rng.next();
      const GraphFunction f = [&](const std::vector<Var>& v) { return weighted_sum(c.build(v), wseed); };
      const auto r = finite_diff_check(f, point);
      INFO(c.name << " trial " << trial << " worst input " << r.worst_input << "[" << r.worst_index << "]");
      CHECK(r.max_relative_error < 1e-3);
    }
  }
}
