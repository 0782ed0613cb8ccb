#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "l96/errors.hpp"
#include "l96/dictionary.hpp"

using namespace l96;

TEST_CASE("monomial counts") {
  CHECK(count_monomials(40, 3, DegreeMode::exact) == 11480);
  CHECK(count_monomials(40, 4, DegreeMode::up_to) == 135750);
  CHECK(count_monomials(40, 2, DegreeMode::up_to) == 860);
  CHECK(count_monomials(2, 2, DegreeMode::up_to) == 5);
  CHECK(enumerate_monomials(40, 3, DegreeMode::exact).size() == 11480);
  CHECK(enumerate_monomials(2, 2, DegreeMode::up_to, true).size() == 6);
}

TEST_CASE("graded lexicographic order and evaluation") {
  const auto m = enumerate_monomials(2, 2, DegreeMode::exact);
  REQUIRE(m.size() == 3);
  Eigen::Vector2d x(2, 3);
  CHECK(m[0].evaluate(x) == 4.0);
  CHECK(m[1].evaluate(x) == 6.0);
  CHECK(m[2].evaluate(x) == 9.0);
  CHECK(m[1].to_string() == "X1*X2");
  const auto all = enumerate_monomials(3, 3, DegreeMode::up_to);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1] < all[i]);
  CHECK(all.front().to_string() == "X1");
  CHECK(MultiIndex::from_indices({0, 0, 3}).to_string() == "X1^2*X4");
  CHECK(MultiIndex().to_string() == "1");
  CHECK(MultiIndex::power(2, 3).degree() == 3);
}

TEST_CASE("enumeration matches brute force for n = 3, degree 4") {
  // Every exponent vector with 1 <= sum <= 4.
  std::set<std::vector<int>> expected;
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      for (int c = 0; a + b + c <= 4; ++c)
        if (a + b + c > 0) expected.insert({a, b, c});
  std::set<std::vector<int>> got;
  for (const auto& m : enumerate_monomials(3, 4, DegreeMode::up_to)) {
    std::vector<int> e(3, 0);
    for (const auto& [comp, pw] : m.factors()) e[comp] = pw;
    got.insert(e);
  }
  CHECK(got == expected);
  CHECK(expected.size() == count_monomials(3, 4, DegreeMode::up_to));
}

TEST_CASE("dictionary normalization") {
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 2, 0, 3, 0;
  const auto cols = enumerate_monomials(2, 2, DegreeMode::up_to);
  const Dictionary raw = build_dictionary(X, cols, false);
  CHECK(raw.columns() == 5);
  CHECK(raw.matrix(2, 0) == 3.0);
  CHECK(raw.norms[0] == doctest::Approx(std::sqrt(14.0)));
  const Dictionary d = build_dictionary(X, cols, true);
  // X2, X1*X2 and X2^2 vanish on these rows
  CHECK(d.columns() == 2);
  CHECK(d.warnings.size() == 3);
  for (Eigen::Index j = 0; j < d.columns(); ++j) CHECK(d.matrix.col(j).norm() == doctest::Approx(1.0));
}

TEST_CASE("parallel dictionary equals serial") {
  Rng rng(5);
  std::normal_distribution<double> n(0, 2);
  Eigen::MatrixXd X(50, 6);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n(rng);
  const auto cols = enumerate_monomials(6, 3, DegreeMode::up_to);
  const Dictionary a = build_dictionary(X, cols, true, Exec::serial);
  const Dictionary b = build_dictionary(X, cols, true, Exec::parallel);
  CHECK(a.matrix == b.matrix);
}

TEST_CASE("random column subset") {
  const auto pool = enumerate_monomials(40, 3, DegreeMode::exact);
  std::vector<MultiIndex> forced;
  for (int k = 0; k < 40; ++k) forced.push_back(MultiIndex::power(k, 3));
  Rng a(11), b(11), c(12);
  const auto s1 = random_column_subset(pool, forced, 100, a);
  const auto s2 = random_column_subset(pool, forced, 100, b);
  const auto s3 = random_column_subset(pool, forced, 100, c);
  CHECK(s1.size() == 140);
  CHECK(s1 == s2);
  CHECK(s1 != s3);
  CHECK(std::is_sorted(s1.begin(), s1.end()));
  for (const auto& f : forced) CHECK(std::find(s1.begin(), s1.end(), f) != s1.end());
  Rng d(1);
  CHECK_THROWS_AS(random_column_subset(pool, forced, 20000, d), ConfigError);
}
