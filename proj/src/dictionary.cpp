#include "l96/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "l96/errors.hpp"

namespace l96 {

MultiIndex::MultiIndex(std::vector<std::pair<int, int>> factors) {
  std::sort(factors.begin(), factors.end());
  for (const auto& [c, p] : factors) {
    require(c >= 0 && p >= 0, "MultiIndex: negative component or power");
    if (p == 0) continue;
    if (!factors_.empty() && factors_.back().first == c)
      factors_.back().second += p;
    else
      factors_.emplace_back(c, p);
  }
}

MultiIndex MultiIndex::from_indices(const std::vector<int>& indices) {
  std::vector<std::pair<int, int>> f;
  for (int i : indices) f.emplace_back(i, 1);
  return MultiIndex(std::move(f));
}

MultiIndex MultiIndex::power(int component, int exponent) {
  return MultiIndex({{component, exponent}});
}

int MultiIndex::degree() const {
  int d = 0;
  for (const auto& f : factors_) d += f.second;
  return d;
}

std::vector<int> MultiIndex::indices() const {
  std::vector<int> out;
  for (const auto& [c, p] : factors_) out.insert(out.end(), p, c);
  return out;
}

int MultiIndex::max_component() const { return factors_.empty() ? -1 : factors_.back().first; }

double MultiIndex::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double v = 1.0;
  for (const auto& [c, p] : factors_) v *= std::pow(x[c], p);
  return v;
}

std::string MultiIndex::to_string() const {
  if (factors_.empty()) return "1";
  std::ostringstream os;
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    if (i) os << '*';
    os << 'X' << factors_[i].first + 1;
    if (factors_[i].second > 1) os << '^' << factors_[i].second;
  }
  return os.str();
}

bool operator<(const MultiIndex& a, const MultiIndex& b) {
  const int da = a.degree(), db = b.degree();
  if (da != db) return da < db;
  return a.indices() < b.indices();
}

std::uint64_t count_monomials(int n, int degree, DegreeMode mode) {
  require(n >= 1 && degree >= 0, "count_monomials: need n >= 1 and degree >= 0");
  // C(top, k) by the multiplicative formula; each prefix product is an exact
  // binomial so the division never truncates.
  auto binom = [](std::uint64_t top, std::uint64_t k) {
    std::uint64_t r = 1;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * (top - k + i) / i;
    return r;
  };
  if (mode == DegreeMode::exact) return binom(n + degree - 1, degree);
  return binom(n + degree, degree) - 1;
}

namespace {

void enumerate_exact(int n, int degree, std::vector<MultiIndex>& out) {
  if (degree == 0) {
    out.emplace_back();
    return;
  }
  std::vector<int> idx(degree, 0);
  while (true) {
    out.push_back(MultiIndex::from_indices(idx));
    int pos = degree - 1;
    while (pos >= 0 && idx[pos] == n - 1) --pos;
    if (pos < 0) break;
    const int v = idx[pos] + 1;
    for (int i = pos; i < degree; ++i) idx[i] = v;
  }
}

}  // namespace

std::vector<MultiIndex> enumerate_monomials(int n, int degree, DegreeMode mode,
                                            bool include_constant) {
  require(n >= 1 && degree >= 0, "enumerate_monomials: need n >= 1 and degree >= 0");
  std::vector<MultiIndex> out;
  out.reserve(count_monomials(n, degree, mode) + 1);
  if (mode == DegreeMode::exact) {
    enumerate_exact(n, degree, out);
    return out;
  }
  if (include_constant) out.emplace_back();
  for (int d = 1; d <= degree; ++d) enumerate_exact(n, d, out);
  return out;
}

Dictionary build_dictionary(const Eigen::MatrixXd& X, const std::vector<MultiIndex>& descriptors,
                            bool normalize, Exec exec) {
  require(X.rows() >= 1, "build_dictionary: need at least one snapshot");
  {
    std::set<std::vector<std::pair<int, int>>> seen;
    for (const auto& d : descriptors) {
      require(d.max_component() < X.cols(), "build_dictionary: descriptor " + d.to_string() +
                                                 " references a missing component");
      require(seen.insert(d.factors()).second,
              "build_dictionary: duplicate descriptor " + d.to_string());
    }
  }
  const Eigen::Index m = X.rows();
  const auto p = static_cast<Eigen::Index>(descriptors.size());
  Eigen::MatrixXd M(m, p);
  auto column = [&](Eigen::Index q) {
    auto col = M.col(q);
    col.setOnes();
    for (const auto& [c, pw] : descriptors[q].factors())
      for (int e = 0; e < pw; ++e) col.array() *= X.col(c).array();
  };
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (Eigen::Index q = 0; q < p; ++q) column(q);
  } else {
    for (Eigen::Index q = 0; q < p; ++q) column(q);
  }

  Dictionary dict;
  dict.normalized = normalize;
  Eigen::VectorXd norms = M.colwise().norm().transpose();
  if (!normalize) {
    dict.matrix = std::move(M);
    dict.descriptors = descriptors;
    dict.norms = std::move(norms);
    return dict;
  }
  std::vector<Eigen::Index> keep;
  for (Eigen::Index q = 0; q < p; ++q) {
    if (norms[q] > 0.0)
      keep.push_back(q);
    else
      dict.warnings.push_back("dropped zero-norm column " + descriptors[q].to_string());
  }
  dict.matrix.resize(m, static_cast<Eigen::Index>(keep.size()));
  dict.norms.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    const auto q = keep[i];
    dict.matrix.col(i) = M.col(q) / norms[q];
    dict.norms[i] = norms[q];
    dict.descriptors.push_back(descriptors[q]);
  }
  return dict;
}

std::vector<MultiIndex> random_column_subset(const std::vector<MultiIndex>& pool,
                                             const std::vector<MultiIndex>& forced, int k_random,
                                             Rng& rng) {
  require(k_random >= 0, "random_column_subset: k_random must be non-negative");
  std::set<MultiIndex> chosen(forced.begin(), forced.end());
  std::vector<const MultiIndex*> available;
  for (const auto& d : pool)
    if (!chosen.count(d)) available.push_back(&d);
  require(static_cast<std::size_t>(k_random) <= available.size(),
          "random_column_subset: k_random exceeds the available pool");
  // Partial Fisher-Yates.
  for (int i = 0; i < k_random; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, available.size() - 1);
    std::swap(available[i], available[pick(rng)]);
    chosen.insert(*available[i]);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace l96
