#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "l96/parallel.hpp"
#include "l96/rng.hpp"

namespace l96 {

// Monomial prod_i x_i^{p_i}, stored as (component, power) pairs sorted by
// component with positive powers. Empty = constant term.
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<std::pair<int, int>> factors);
  // From a non-decreasing list of component indices with repetition, e.g.
  // {0, 0, 3} = x0^2 x3.
  static MultiIndex from_indices(const std::vector<int>& indices);
  static MultiIndex power(int component, int exponent);

  int degree() const;
  bool is_constant() const { return factors_.empty(); }
  const std::vector<std::pair<int, int>>& factors() const { return factors_; }
  std::vector<int> indices() const;
  int max_component() const;

  double evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  std::string to_string() const;  // "1", "X3", "X1^2*X4" (1-based names)

  // Graded lexicographic: lower degree first, then lexicographic on indices(),
  // so x1^2 < x1 x2 < ... < x2^2.
  friend bool operator<(const MultiIndex& a, const MultiIndex& b);
  friend bool operator==(const MultiIndex& a, const MultiIndex& b) { return a.factors_ == b.factors_; }

 private:
  std::vector<std::pair<int, int>> factors_;
};

enum class DegreeMode { exact, up_to };

// Exact: C(n + d - 1, d). Up-to: C(n + d, d) - 1 (constant excluded).
std::uint64_t count_monomials(int n, int degree, DegreeMode mode);

// Monomials in graded-lex order. Up-to mode excludes the constant unless
// include_constant is set.
std::vector<MultiIndex> enumerate_monomials(int n, int degree, DegreeMode mode,
                                            bool include_constant = false);

struct Dictionary {
  Eigen::MatrixXd matrix;               // m snapshots x p columns
  std::vector<MultiIndex> descriptors;  // one per column
  Eigen::VectorXd norms;                // raw L2 norm per column (before scaling)
  bool normalized = false;
  std::vector<std::string> warnings;

  Eigen::Index columns() const { return matrix.cols(); }
};

// Evaluates each descriptor at each snapshot row of X (m x n). With
// `normalize`, columns are scaled to unit L2 norm; zero-norm columns are dropped
// and reported in `warnings`.
Dictionary build_dictionary(const Eigen::MatrixXd& X, const std::vector<MultiIndex>& descriptors,
                            bool normalize, Exec exec = Exec::serial);

// Forced descriptors plus k_random distinct draws from pool \ forced, returned
// in graded-lex order.
std::vector<MultiIndex> random_column_subset(const std::vector<MultiIndex>& pool,
                                             const std::vector<MultiIndex>& forced, int k_random,
                                             Rng& rng);

}  // namespace l96
