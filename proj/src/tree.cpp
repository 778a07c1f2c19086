#include <algorithm>
#include <cmath>

#include "formcheck/learn.hpp"

namespace formcheck {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void require_binary(const Eigen::MatrixXd& x, const Labels& y, const char* who) {
  if (x.rows() != y.size()) {
    throw InvalidInputError(std::string(who) + ": " + std::to_string(x.rows()) + " rows but " +
                            std::to_string(y.size()) + " labels");
  }
  bool seen0 = false, seen1 = false;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0) {
      seen0 = true;
    } else if (y[i] == 1) {
      seen1 = true;
    } else {
      throw InvalidInputError(std::string(who) + ": labels must be 0 or 1");
    }
  }
  if (!seen0 || !seen1) throw DegenerateLabelsError(std::string(who) + ": both classes are required");
}

const TreeNode& DecisionTree::leaf_for(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (nodes_.empty()) throw InvalidInputError("decision tree is empty");
  std::size_t n = 0;
  while (!nodes_[n].is_leaf()) {
    const TreeNode& node = nodes_[n];
    if (node.feature >= x.size()) throw StructuralError("decision tree: query has too few features");
    n = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
  }
  return nodes_[n];
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const TreeNode& leaf = leaf_for(x);
  return leaf.count1 > leaf.count0 ? 1 : 0;
}

Index DecisionTree::max_feature() const {
  Index m = -1;
  for (const TreeNode& n : nodes_) m = std::max(m, n.feature);
  return m;
}

namespace detail {

std::vector<std::pair<Index, double>> split_gains(const DecisionTree& t) {
  const auto gini_mass = [](const TreeNode& n) {
    const double total = n.count0 + n.count1;
    if (total <= 0.0) return 0.0;
    const double p0 = n.count0 / total, p1 = n.count1 / total;
    return total * (1.0 - p0 * p0 - p1 * p1);
  };
  std::vector<std::pair<Index, double>> out;
  const auto& nodes = t.nodes();
  for (const TreeNode& n : nodes) {
    if (n.is_leaf()) continue;
    const double gain = gini_mass(n) - gini_mass(nodes[static_cast<std::size_t>(n.left)]) -
                        gini_mass(nodes[static_cast<std::size_t>(n.right)]);
    out.emplace_back(n.feature, std::max(0.0, gain));
  }
  return out;
}

}  // namespace detail

namespace {

struct Split {
  Index feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child Gini mass
};

double gini_mass(double c0, double c1) {
  const double t = c0 + c1;
  return t > 0.0 ? t - (c0 * c0 + c1 * c1) / t : 0.0;
}

}  // namespace

DecisionTree grow_tree(const Eigen::MatrixXd& x, const Labels& y, std::span<const Index> rows, const TreeConfig& cfg,
                       std::mt19937_64& rng, Eigen::VectorXd* importance) {
  const Index d = x.cols();
  if (rows.empty()) throw InvalidInputError("grow_tree: no rows");
  if (d == 0) throw InvalidInputError("grow_tree: no features");
  const Index mtry = std::clamp<Index>(
      cfg.mtry.value_or(static_cast<Index>(std::floor(std::sqrt(static_cast<double>(d))))), 1, d);

  std::vector<Index> perm(static_cast<std::size_t>(d));
  for (Index f = 0; f < d; ++f) perm[static_cast<std::size_t>(f)] = f;

  std::vector<TreeNode> nodes;
  struct Pending {
    std::size_t node;
    std::vector<Index> rows;
  };
  std::vector<Pending> stack;
  auto make_node = [&](std::vector<Index> r) {
    TreeNode n;
    for (Index i : r) (y[i] == 1 ? n.count1 : n.count0) += 1.0;
    nodes.push_back(n);
    stack.push_back({nodes.size() - 1, std::move(r)});
    return static_cast<int>(nodes.size() - 1);
  };
  make_node(std::vector<Index>(rows.begin(), rows.end()));

  std::vector<std::pair<double, int>> column;
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    const double c0 = nodes[p.node].count0, c1 = nodes[p.node].count1;
    if (c0 == 0.0 || c1 == 0.0 || c0 + c1 < 2.0) continue;

    Split best;
    best.impurity = std::numeric_limits<double>::infinity();
    Index usable = 0;
    for (Index k = 0; k < d && usable < mtry; ++k) {
      std::uniform_int_distribution<Index> pick(k, d - 1);
      std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(pick(rng))]);
      const Index f = perm[static_cast<std::size_t>(k)];
      column.clear();
      for (Index i : p.rows) column.emplace_back(x(i, f), y[i]);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      ++usable;
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t s = 0; s + 1 < column.size(); ++s) {
        (column[s].second == 1 ? l1 : l0) += 1.0;
        if (column[s].first == column[s + 1].first) continue;
        const double imp = gini_mass(l0, l1) + gini_mass(c0 - l0, c1 - l1);
        if (imp < best.impurity) {
          best.impurity = imp;
          best.feature = f;
          const double a = column[s].first, b = column[s + 1].first;
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best.threshold = mid;
        }
      }
    }
    if (best.feature < 0) continue;  // every feature constant on this node

    std::vector<Index> left, right;
    for (Index i : p.rows) (x(i, best.feature) <= best.threshold ? left : right).push_back(i);
    if (importance) (*importance)[best.feature] += gini_mass(c0, c1) - best.impurity;
    nodes[p.node].feature = best.feature;
    nodes[p.node].threshold = best.threshold;
    // Right child is pushed first so the left subtree is expanded first.
    const int r = make_node(std::move(right));
    const int l = make_node(std::move(left));
    nodes[p.node].left = l;
    nodes[p.node].right = r;
  }
  return DecisionTree(std::move(nodes));
}

}  // namespace formcheck
