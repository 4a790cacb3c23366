#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "avaca/error.hpp"
#include "avaca/gradcheck.hpp"
#include "avaca/objectives.hpp"
#include "avaca/rng.hpp"

using namespace avaca;

namespace {

// Full sort, take the top k, plain BCE.
double brute_dmil(std::vector<double> s, int y, std::size_t alpha, double eps) {
  const std::size_t k = std::max<std::size_t>(1, s.size() / alpha);
  std::sort(s.begin(), s.end(), std::greater<>());
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double c = std::clamp(s[i], eps, 1.0 - eps);
    total += y == 1 ? -std::log(c) : -std::log(1.0 - c);
  }
  return total / static_cast<double>(k);
}

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  for (double& v : s) v = rng.uniform(0.01, 0.99);
  return s;
}

}  // namespace

TEST_CASE("kmax count") {
  CHECK(kmax_count(32, 16) == 2);
  CHECK(kmax_count(5, 16) == 1);
  CHECK(kmax_count(16, 16) == 1);
  CHECK(kmax_count(47, 16) == 2);
  CHECK(kmax_count(7, 1) == 7);
}

TEST_CASE("kmax selection orders by score and breaks ties by position") {
  const std::vector<double> s{0.1, 0.9, 0.4, 0.9, 0.2, 0.3};
  CHECK(kmax_indices(s, 2) == std::vector<std::size_t>{1, 3, 2});
  CHECK(kmax_select(s, 2) == std::vector<double>{0.9, 0.9, 0.4});
  CHECK(kmax_indices(s, 16) == std::vector<std::size_t>{1});
}

TEST_CASE("dmil examples") {
  const std::vector<double> perfect{1.0, 0.0, 0.0};
  CHECK(dmil_loss(perfect, 1, 16, 1e-7) == doctest::Approx(0.0));
  const std::vector<double> s09{0.9, 0.1};
  CHECK(dmil_loss(s09, 1, 16, 1e-7) == doctest::Approx(0.10536051565782628).epsilon(1e-12));
  const std::vector<double> half{0.5, 0.5, 0.5};
  CHECK(dmil_loss(half, 0, 16, 1e-7) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  // A normal video is penalized through its highest score.
  const std::vector<double> n{0.1, 0.9};
  CHECK(dmil_loss(n, 0, 16, 1e-7) == doctest::Approx(-std::log(0.1)).epsilon(1e-12));
}

TEST_CASE("dmil clamps saturated scores") {
  const std::vector<double> zero{0.0, 0.0};
  CHECK(dmil_loss(zero, 1, 16, 1e-7) == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("center loss") {
  const std::vector<double> s{0.2, 0.4};
  CHECK(center_loss(s, 0) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(center_loss(s, 1) == 0.0);
  const std::vector<double> flat{0.25, 0.25, 0.25};
  CHECK(center_loss(flat, 0) == 0.0);
  const std::vector<double> inexact{0.3, 0.3, 0.3};
  CHECK(center_loss(inexact, 0) < 1e-30);
}

TEST_CASE("total loss is the weighted sum") {
  LossConfig c;
  c.theta = 20;
  c.lambda = 1;
  // dmil = -log(0.5), center = var([0.5, 0.3]) = 0.01
  const std::vector<double> s{0.5, 0.3};
  const LossBreakdown b = total_loss(s, 0, c);
  CHECK(b.k_used == 1);
  CHECK(b.center == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(b.total == c.theta * b.dmil + c.lambda * b.center);

  c.theta = 0;
  c.lambda = 0;
  CHECK(total_loss(s, 0, c).total == 0.0);
}

TEST_CASE("dmil matches a sort-based oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t t = 1 + rng.below(40);
    const std::size_t alpha = 1 + rng.below(8);
    const int y = static_cast<int>(rng.below(2));
    const auto s = random_scores(rng, t);
    CHECK(std::abs(dmil_loss(s, y, alpha, 1e-7) - brute_dmil(s, y, alpha, 1e-7)) <= 1e-12);
    auto sorted = s;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.resize(kmax_count(t, alpha));
    CHECK(kmax_select(s, alpha) == sorted);
  }
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(5);
  LossConfig c;
  c.alpha = 3;
  for (int y : {0, 1}) {
    for (int trial = 0; trial < 5; ++trial) {
      Array s({9});
      for (double& v : s.mutable_data()) v = rng.uniform(0.05, 0.95);
      const GraphFunction f = [&](const std::vector<Var>& in) { return total_loss(in[0], y, c).total; };
      CHECK(finite_diff_check(f, {s}).max_relative_error < 1e-3);
    }
  }
}

TEST_CASE("loss contract errors") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(dmil_loss(empty, 1, 16, 1e-7), ContractError);
  const std::vector<double> out_of_range{0.5, 1.5};
  CHECK_THROWS_AS(dmil_loss(out_of_range, 1, 16, 1e-7), ContractError);
  CHECK_THROWS_AS(center_loss(out_of_range, 0), ContractError);
  LossConfig c;
  c.alpha = 0;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = {};
  c.epsilon = 0.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
}

TEST_CASE("loss config json round trip") {
  LossConfig c;
  c.alpha = 4;
  c.theta = 20;
  const nlohmann::json j = c;
  CHECK(j.get<LossConfig>() == c);
}
