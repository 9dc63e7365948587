#include <doctest.h>

#include <cmath>

#include "camel/rng.hpp"
#include "camel/tensor.hpp"

using namespace camel;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::vector<double> v(r * c);
  for (auto& x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor({r, c}, std::move(v));
}

}  // namespace

TEST_CASE("matmul agrees with a triple loop") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const Tensor a = random_matrix(m, k, rng), b = random_matrix(k, n, rng);
    const Tensor c = matmul(a, b);
    REQUIRE(c.shape() == Shape{m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t l = 0; l < k; ++l) s += a.at(i, l) * b.at(l, j);
        CHECK(c.at(i, j) == doctest::Approx(s).epsilon(1e-14));
      }
  }
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  CHECK_THROWS_AS(matmul(Tensor::zeros({6}), Tensor::zeros({6, 1})), DimensionError);
}

TEST_CASE("transpose swaps indices and is an involution") {
  Rng rng(3);
  const Tensor a = random_matrix(3, 5, rng);
  const Tensor t = transpose(a);
  CHECK(t.shape() == Shape{5, 3});
  CHECK(t.at(4, 2) == a.at(2, 4));
  CHECK(transpose(t) == a);
}

TEST_CASE("elementwise ops") {
  const Tensor a = Tensor::matrix({{1, -2}, {3, 0.5}});
  const Tensor b = Tensor::matrix({{2, 2}, {-1, 4}});
  CHECK(add(a, b) == Tensor::matrix({{3, 0}, {2, 4.5}}));
  CHECK(sub(a, b) == Tensor::matrix({{-1, -4}, {4, -3.5}}));
  CHECK(mul(a, b) == Tensor::matrix({{2, -4}, {-3, 2}}));
  CHECK(scale(a, 2.0) == Tensor::matrix({{2, -4}, {6, 1}}));
  CHECK(elementwise(Elementwise::relu, a) == Tensor::matrix({{1, 0}, {3, 0.5}}));
  CHECK(elementwise(Elementwise::exp, a).at(0, 1) == doctest::Approx(std::exp(-2.0)));
  CHECK(elementwise(Elementwise::softplus, Tensor::scalar(800.0)).item() == doctest::Approx(800.0));
  CHECK(elementwise(Elementwise::softplus, Tensor::scalar(-800.0)).item() >= 0.0);
  CHECK_THROWS_AS(add(a, Tensor::zeros({2, 3})), DimensionError);
}

TEST_CASE("log outside its domain is a domain error") {
  CHECK_THROWS_AS(elementwise(Elementwise::log, Tensor::vector({1.0, 0.0})), DomainError);
  CHECK_THROWS_AS(elementwise(Elementwise::log, Tensor::vector({-1.0})), DomainError);
}

TEST_CASE("reductions keep the reduced axis") {
  const Tensor a = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  CHECK(reduce(Reduction::sum, a) == Tensor::scalar(21));
  CHECK(reduce(Reduction::sum, a, 0) == Tensor({1, 3}, {5, 7, 9}));
  CHECK(reduce(Reduction::mean, a, 1) == Tensor({2, 1}, {2, 5}));
  CHECK_THROWS_AS(reduce(Reduction::sum, a, 2), DimensionError);
}

TEST_CASE("logsumexp is stable and shift-invariant") {
  const Tensor big = Tensor::vector({1000.0, 1000.0});
  CHECK(reduce(Reduction::logsumexp, big).item() == doctest::Approx(1000.0 + std::log(2.0)));

  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_matrix(3, 4, rng);
    const double c = rng.uniform(-50.0, 50.0);
    const Tensor shifted = add(x, Tensor::full({3, 4}, c));
    for (std::size_t axis : {0, 1}) {
      const Tensor lhs = reduce(Reduction::logsumexp, shifted, axis);
      const Tensor rhs = add(reduce(Reduction::logsumexp, x, axis), Tensor::full(lhs.shape(), c));
      CHECK(max_abs_diff(lhs, rhs) < 1e-10);
    }
  }
}

TEST_CASE("normalize_rows yields unit rows and rejects zero rows") {
  Rng rng(8);
  const Tensor n = normalize_rows(random_matrix(4, 6, rng));
  for (std::size_t r = 0; r < 4; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 6; ++c) s += n.at(r, c) * n.at(r, c);
    CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(normalize_rows(Tensor::matrix({{1, 1}, {0, 0}})), DomainError);
}

TEST_CASE("construction validates sizes") {
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::matrix({{1, 2}, {3}}), DimensionError);
  CHECK_THROWS(Tensor::vector({1, 2}).item());
  CHECK(Tensor::vector({1, 2, 3, 4}).reshaped({2, 2}).at(1, 0) == 3);
  CHECK_THROWS_AS(Tensor::vector({1, 2, 3}).reshaped({2, 2}), DimensionError);
}
