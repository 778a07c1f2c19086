#pragma once

// From-scratch learners: CART trees and a Random Forest with impurity
// importance, random-probe feature selection, and an SMO support vector
// machine with linear or RBF kernel.
//
// Binary labels are 0 (absent) / 1 (present). Feature matrices hold one
// sample per row.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "formcheck/error.hpp"
#include "formcheck/features.hpp"

namespace formcheck {

using Labels = Eigen::VectorXi;

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Throws DegenerateLabelsError unless both classes occur; InvalidInputError on
/// labels outside {0, 1} or a row count mismatch.
void require_binary(const Eigen::MatrixXd& x, const Labels& y, const char* who);

struct TreeNode {
  /// Split feature, -1 for a leaf.
  Index feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Weighted class counts of the training samples that reached the node.
  double count0 = 0.0;
  double count1 = 0.0;
  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Samples with x[feature] <= threshold go left.
class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& leaf_for(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Majority class of the reached leaf; ties go to 0.
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Largest feature index used by a split, -1 for a stump.
  Index max_feature() const;
  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<TreeNode> nodes_;
};

namespace detail {
/// (feature, n_t G_t - n_l G_l - n_r G_r) for every split, in node order.
std::vector<std::pair<Index, double>> split_gains(const DecisionTree& t);
}  // namespace detail

struct TreeConfig {
  /// Candidate features per split; defaults to floor(sqrt(d)), at least 1.
  std::optional<Index> mtry;
};

/// Gini CART grown until every leaf is pure or holds fewer than two samples.
/// `rows` lists the training rows (repeats allowed, as in a bootstrap sample).
/// Adds the weighted impurity decrease of each split to `importance` when given.
DecisionTree grow_tree(const Eigen::MatrixXd& x, const Labels& y, std::span<const Index> rows,
                       const TreeConfig& cfg, std::mt19937_64& rng, Eigen::VectorXd* importance = nullptr);

struct ForestConfig {
  int trees = 200;
  std::optional<Index> mtry;
  std::uint64_t seed = 1;
  /// 0 uses default_workers().
  int workers = 0;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, Eigen::VectorXd importances, Index features);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  Index feature_count() const { return features_; }
  /// Per-tree impurity importances normalized to one, averaged over trees.
  const Eigen::VectorXd& importances() const { return importances_; }
  /// Fraction of trees voting present.
  double vote_fraction(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// Majority vote; an exact tie is absent.
  int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int classify(const Eigen::Ref<const Eigen::VectorXd>& x) const { return predict(x); }
  /// In-bag row sets of the training run; empty after deserialization.
  const std::vector<std::vector<Index>>& in_bag() const { return in_bag_; }
  void set_in_bag(std::vector<std::vector<Index>> in_bag) { in_bag_ = std::move(in_bag); }

 private:
  std::vector<DecisionTree> trees_;
  Eigen::VectorXd importances_;
  Index features_ = 0;
  std::vector<std::vector<Index>> in_bag_;
};

/// Bootstrap-aggregated trees with per-tree streams derived from the seed, so
/// the result does not depend on the worker count.
RandomForest train_forest(const Eigen::MatrixXd& x, const Labels& y, const ForestConfig& cfg = {});
const Eigen::VectorXd& importances(const RandomForest& f);
/// Out-of-bag accuracy over samples left out by at least one tree.
double oob_accuracy(const RandomForest& f, const Eigen::MatrixXd& x, const Labels& y);

struct SelectionConfig {
  int probes_per_frame = 20;
  /// Size of the fallback mask when no real feature beats the probes.
  Index fallback_count = 32;
  ForestConfig forest;
};

struct FeatureMask {
  /// Sorted, unique indices into the full feature vector.
  std::vector<Index> indices;
  /// True when the probe threshold selected nothing and the top features were used.
  bool fallback = false;
  double threshold = 0.0;
  bool operator==(const FeatureMask&) const = default;
};

struct SelectionResult {
  FeatureMask mask;
  /// Importances of the real features in the augmented forest.
  Eigen::VectorXd importances;
};

/// Appends probes_per_frame standard-normal columns per layout frame, trains
/// a forest on the augmented matrix and keeps the real features whose
/// importance is strictly above the mean probe importance.
SelectionResult select_features(const Eigen::MatrixXd& x, const Labels& y, const FeatureLayout& layout,
                                const SelectionConfig& cfg = {});

enum class Kernel { linear, rbf };
std::string_view to_string(Kernel k);
Kernel kernel_from_string(std::string_view name);

struct SvmConfig {
  double c = 1.0;
  /// RBF width; defaults to 1 / feature count.
  std::optional<double> gamma;
  /// Scale C per class by n / (2 n_class).
  bool balanced = false;
  /// Stopping tolerance on the maximal KKT violation.
  double tolerance = 1e-6;
  long max_iterations = 1'000'000;
};

/// Optimizer record. The dual objective is non-increasing per iteration.
struct SvmTrace {
  std::vector<double> dual_objective;
  /// (iteration, primal hinge objective) at checkpoints, primal only for linear.
  std::vector<std::pair<long, double>> primal;
  long iterations = 0;
  bool converged = false;
  double final_primal = 0.0;
  double final_dual = 0.0;
};

/// w.x + b.
class LinearModel {
 public:
  LinearModel() = default;
  LinearModel(Eigen::VectorXd weights, double bias, double c) : weights_(std::move(weights)), bias_(bias), c_(c) {}

  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }
  double c() const { return c_; }
  Index size() const { return weights_.size(); }
  /// Throws StructuralError on length mismatch.
  double decision_value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int classify(const Eigen::Ref<const Eigen::VectorXd>& x) const { return decision_value(x) > 0.0 ? 1 : 0; }

 private:
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
  double c_ = 1.0;
};

/// sum_i coef_i exp(-gamma |s_i - x|^2) + b over the support rows s_i.
class RbfModel {
 public:
  RbfModel() = default;
  RbfModel(Eigen::MatrixXd support, Eigen::VectorXd coef, double bias, double gamma, double c)
      : support_(std::move(support)), coef_(std::move(coef)), bias_(bias), gamma_(gamma), c_(c) {}

  const Eigen::MatrixXd& support() const { return support_; }
  const Eigen::VectorXd& coef() const { return coef_; }
  double bias() const { return bias_; }
  double gamma() const { return gamma_; }
  double c() const { return c_; }
  /// Feature count; support rows are samples.
  Index size() const { return support_.cols(); }
  double decision_value(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  int classify(const Eigen::Ref<const Eigen::VectorXd>& x) const { return decision_value(x) > 0.0 ? 1 : 0; }

 private:
  Eigen::MatrixXd support_;
  Eigen::VectorXd coef_;
  double bias_ = 0.0;
  double gamma_ = 1.0;
  double c_ = 1.0;
};

/// 1/2 |w|^2 + sum_i C_i max(0, 1 - y_i (w.x_i + b)) with y in {-1, +1}.
double hinge_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, const Labels& y,
                       const SvmConfig& cfg);

/// Soft-margin SVM via SMO on the dual. Throws DegenerateLabelsError.
LinearModel train_linear(const Eigen::MatrixXd& x, const Labels& y, const SvmConfig& cfg = {},
                         SvmTrace* trace = nullptr);
RbfModel train_rbf(const Eigen::MatrixXd& x, const Labels& y, const SvmConfig& cfg = {}, SvmTrace* trace = nullptr);

}  // namespace formcheck
