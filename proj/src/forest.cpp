#include <algorithm>

#include "formcheck/learn.hpp"
#include "formcheck/parallel.hpp"

namespace formcheck {

RandomForest::RandomForest(std::vector<DecisionTree> trees, Eigen::VectorXd importances, Index features)
    : trees_(std::move(trees)), importances_(std::move(importances)), features_(features) {
  if (trees_.empty()) throw InvalidInputError("random forest needs at least one tree");
  if (importances_.size() != features_) throw StructuralError("importance vector does not match feature count");
}

double RandomForest::vote_fraction(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != features_) throw StructuralError("random forest: query length does not match");
  int votes = 0;
  for (const DecisionTree& t : trees_) votes += t.predict(x);
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

int RandomForest::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const { return vote_fraction(x) > 0.5 ? 1 : 0; }

RandomForest train_forest(const Eigen::MatrixXd& x, const Labels& y, const ForestConfig& cfg) {
  require_binary(x, y, "train_forest");
  if (cfg.trees < 1) throw ConfigError("forest needs at least one tree");
  const Index n = x.rows(), d = x.cols();
  TreeConfig tcfg;
  tcfg.mtry = cfg.mtry;

  std::vector<DecisionTree> trees(static_cast<std::size_t>(cfg.trees));
  std::vector<std::vector<Index>> bags(trees.size());
  parallel_for(
      trees.size(),
      [&](std::size_t t) {
        std::mt19937_64 rng(mix_seed(cfg.seed, t));
        std::uniform_int_distribution<Index> draw(0, n - 1);
        std::vector<Index> rows(static_cast<std::size_t>(n));
        for (auto& r : rows) r = draw(rng);
        trees[t] = grow_tree(x, y, rows, tcfg, rng);
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        bags[t] = std::move(rows);
      },
      cfg.workers);

  Eigen::VectorXd imp = Eigen::VectorXd::Zero(d);
  int contributing = 0;
  for (const DecisionTree& t : trees) {
    const auto gains = detail::split_gains(t);
    double total = 0.0;
    for (const auto& g : gains) total += g.second;
    if (total <= 0.0) continue;
    for (const auto& [f, g] : gains) imp[f] += g / total;
    ++contributing;
  }
  if (contributing > 0) {
    imp /= static_cast<double>(contributing);
    imp /= imp.sum();
  }
  RandomForest f(std::move(trees), std::move(imp), d);
  f.set_in_bag(std::move(bags));
  return f;
}

const Eigen::VectorXd& importances(const RandomForest& f) { return f.importances(); }

double oob_accuracy(const RandomForest& f, const Eigen::MatrixXd& x, const Labels& y) {
  if (f.in_bag().size() != f.trees().size()) throw InvalidInputError("oob_accuracy: forest has no in-bag record");
  int scored = 0, correct = 0;
  for (Index i = 0; i < x.rows(); ++i) {
    int votes = 0, voters = 0;
    for (std::size_t t = 0; t < f.trees().size(); ++t) {
      const auto& bag = f.in_bag()[t];
      if (std::binary_search(bag.begin(), bag.end(), i)) continue;
      votes += f.trees()[t].predict(x.row(i).transpose());
      ++voters;
    }
    if (voters == 0) continue;
    ++scored;
    const int pred = 2 * votes > voters ? 1 : 0;
    correct += pred == y[i] ? 1 : 0;
  }
  if (scored == 0) throw InvalidInputError("oob_accuracy: every sample is in every bag");
  return static_cast<double>(correct) / static_cast<double>(scored);
}

}  // namespace formcheck
