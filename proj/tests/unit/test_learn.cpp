#include <doctest.h>

#include <random>

#include "formcheck/learn.hpp"
#include "formcheck/parallel.hpp"
#include "support/oracles.hpp"

using namespace formcheck;

namespace {

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Index n, Index d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd x(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) x(i, j) = g(rng);
  }
  return x;
}

Labels random_labels(std::mt19937_64& rng, Index n) {
  Labels y(n);
  for (Index i = 0; i < n; ++i) y[i] = static_cast<int>(rng() & 1U);
  y[0] = 0;
  y[1] = 1;
  return y;
}

struct Xor {
  Eigen::MatrixXd x;
  Labels y;
};

Xor xor_set(std::mt19937_64& rng, Index per_cluster) {
  std::normal_distribution<double> g(0.0, 0.15);
  Xor out{Eigen::MatrixXd(4 * per_cluster, 2), Labels(4 * per_cluster)};
  const double cx[] = {-1, 1, -1, 1}, cy[] = {-1, 1, 1, -1};
  for (int c = 0; c < 4; ++c) {
    for (Index i = 0; i < per_cluster; ++i) {
      const Index r = c * per_cluster + i;
      out.x(r, 0) = cx[c] + g(rng);
      out.x(r, 1) = cy[c] + g(rng);
      out.y[r] = c < 2 ? 0 : 1;
    }
  }
  return out;
}

double training_accuracy(const auto& model, const Eigen::MatrixXd& x, const Labels& y) {
  int ok = 0;
  for (Index i = 0; i < x.rows(); ++i) ok += model.classify(x.row(i).transpose()) == y[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(x.rows());
}

}  // namespace

TEST_CASE("tree leaves are pure or hold fewer than two samples") {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd x = gaussian(rng, 60, 8);
  const Labels y = random_labels(rng, 60);
  std::vector<Index> rows(60);
  for (Index i = 0; i < 60; ++i) rows[static_cast<std::size_t>(i)] = i;
  const DecisionTree t = grow_tree(x, y, rows, {}, rng);
  for (const TreeNode& n : t.nodes()) {
    if (!n.is_leaf()) continue;
    CHECK((n.count0 == 0.0 || n.count1 == 0.0 || n.count0 + n.count1 < 2.0));
  }
  for (Index i = 0; i < 60; ++i) CHECK(t.predict(x.row(i).transpose()) == y[i]);
}

TEST_CASE("forest on separated 1-D data has perfect out-of-bag accuracy") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  Eigen::MatrixXd x(40, 1);
  Labels y(40);
  for (Index i = 0; i < 40; ++i) {
    y[i] = i % 2;
    x(i, 0) = y[i] == 1 ? u(rng) : -u(rng);
  }
  ForestConfig cfg;
  cfg.trees = 50;
  const RandomForest f = train_forest(x, y, cfg);
  CHECK(oob_accuracy(f, x, y) == 1.0);
}

TEST_CASE("forest captures the XOR interaction") {
  std::mt19937_64 rng(3);
  const Xor d = xor_set(rng, 15);
  ForestConfig cfg;
  cfg.trees = 100;
  const RandomForest f = train_forest(d.x, d.y, cfg);
  CHECK(training_accuracy(f, d.x, d.y) == 1.0);
}

TEST_CASE("importances on pure noise are roughly uniform") {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd x = gaussian(rng, 100, 20);
  const Labels y = random_labels(rng, 100);
  const RandomForest f = train_forest(x, y, {});
  const Eigen::VectorXd& imp = importances(f);
  CHECK(imp.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(imp.maxCoeff() < 5.0 * imp.mean());
}

TEST_CASE("single informative feature gets the largest importance") {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd x = gaussian(rng, 80, 51);
  Labels y(80);
  for (Index i = 0; i < 80; ++i) {
    y[i] = i % 2;
    x(i, 17) = (y[i] == 1 ? 1.5 : -1.5) + 0.5 * x(i, 17);
  }
  const RandomForest f = train_forest(x, y, {});
  Index arg = 0;
  f.importances().maxCoeff(&arg);
  CHECK(arg == 17);
}

TEST_CASE("constant features get zero importance") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(50, 10, 3.0);
  Labels y(50);
  std::normal_distribution<double> g;
  for (Index i = 0; i < 50; ++i) {
    y[i] = i % 2;
    x(i, 4) = y[i] + 0.3 * g(rng);
  }
  ForestConfig cfg;
  cfg.trees = 30;
  const RandomForest f = train_forest(x, y, cfg);
  for (Index j = 0; j < 10; ++j) {
    if (j == 4) {
      CHECK(f.importances()[j] == doctest::Approx(1.0));
    } else {
      CHECK(f.importances()[j] == 0.0);
    }
  }
}

TEST_CASE("forest training is deterministic and independent of worker count") {
  std::mt19937_64 rng(7);
  const Eigen::MatrixXd x = gaussian(rng, 50, 30);
  const Labels y = random_labels(rng, 50);
  ForestConfig cfg;
  cfg.trees = 40;
  cfg.seed = 99;
  cfg.workers = 1;
  const RandomForest a = train_forest(x, y, cfg);
  cfg.workers = 3;
  const RandomForest b = train_forest(x, y, cfg);
  CHECK(a.trees() == b.trees());
  CHECK(a.importances() == b.importances());
  cfg.seed = 100;
  CHECK_FALSE(train_forest(x, y, cfg).trees() == a.trees());
}

TEST_CASE("degenerate labels are rejected") {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 3);
  const Labels y = Labels::Zero(10);
  CHECK_THROWS_AS(train_forest(x, y, {}), DegenerateLabelsError);
  CHECK_THROWS_AS(train_linear(x, y, {}), DegenerateLabelsError);
  CHECK_THROWS_AS(train_rbf(x, y, {}), DegenerateLabelsError);
  Labels bad = Labels::Zero(10);
  bad[2] = 2;
  CHECK_THROWS_AS(train_forest(x, bad, {}), InvalidInputError);
}

TEST_CASE("probe selection keeps only real informative features") {
  std::mt19937_64 rng(8);
  const FeatureLayout layout(20, 2, FeatureSet::euler_positions);  // 240 features
  Eigen::MatrixXd x = gaussian(rng, 60, layout.size());
  Labels y(60);
  for (Index i = 0; i < 60; ++i) {
    y[i] = i % 2;
    for (Index f = 4; f < 12; ++f) {
      for (Index j = 0; j < 2; ++j) {
        for (Index ch = 0; ch < 6; ++ch) x(i, layout.flat({f, j, ch})) += y[i] == 1 ? 2.0 : -2.0;
      }
    }
  }
  const SelectionResult r = select_features(x, y, layout);
  CHECK_FALSE(r.mask.fallback);
  REQUIRE_FALSE(r.mask.indices.empty());
  CHECK(std::is_sorted(r.mask.indices.begin(), r.mask.indices.end()));
  CHECK(std::adjacent_find(r.mask.indices.begin(), r.mask.indices.end()) == r.mask.indices.end());
  int inside = 0;
  for (Index k : r.mask.indices) {
    CHECK(k < layout.size());
    const FeatureCoord c = layout.coord(k);
    inside += (c.frame >= 4 && c.frame < 12) ? 1 : 0;
  }
  CHECK(inside >= static_cast<int>(0.8 * static_cast<double>(r.mask.indices.size())));
  CHECK(r.importances.size() == layout.size());
}

TEST_CASE("probe selection on label noise is small or falls back") {
  std::mt19937_64 rng(9);
  const FeatureLayout layout(30, 2, FeatureSet::euler_positions);
  const Eigen::MatrixXd x = gaussian(rng, 60, layout.size());
  const Labels y = random_labels(rng, 60);
  const SelectionResult r = select_features(x, y, layout);
  CHECK((r.mask.fallback || r.mask.indices.size() < static_cast<std::size_t>(layout.size() / 2)));
  if (r.mask.fallback) CHECK(r.mask.indices.size() == 32);
}

TEST_CASE("linear svm separates blobs") {
  std::mt19937_64 rng(10);
  Eigen::MatrixXd x = gaussian(rng, 60, 2) * 0.4;
  Labels y(60);
  for (Index i = 0; i < 60; ++i) {
    y[i] = i < 30 ? 1 : 0;
    x(i, 0) += y[i] == 1 ? 2.0 : -2.0;
  }
  const LinearModel m = train_linear(x, y, {});
  CHECK(training_accuracy(m, x, y) == 1.0);
  const Eigen::VectorXd mean1 = x.topRows(30).colwise().mean().transpose();
  const Eigen::VectorXd mean0 = x.bottomRows(30).colwise().mean().transpose();
  CHECK(m.decision_value(mean1) > 0.0);
  CHECK(m.decision_value(mean0) < 0.0);
  for (Index i = 0; i < 60; ++i) {
    CHECK(std::abs(m.decision_value(x.row(i).transpose())) >= 1.0 - 1e-4);
  }
  // point on the hyperplane
  const Eigen::VectorXd w = m.weights();
  const Eigen::VectorXd on = -m.bias() * w / w.squaredNorm();
  CHECK(m.decision_value(on) == doctest::Approx(0.0).epsilon(1e-12));
  // linearity
  const Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd p = x.row(3).transpose();
  CHECK(m.decision_value(2.5 * p) - m.decision_value(z) ==
        doctest::Approx(2.5 * (m.decision_value(p) - m.decision_value(z))));
  CHECK_THROWS_AS(m.decision_value(Eigen::VectorXd::Zero(3)), StructuralError);
}

TEST_CASE("noise columns get small weights") {
  std::mt19937_64 rng(11);
  Eigen::MatrixXd x = gaussian(rng, 80, 6);
  Labels y(80);
  for (Index i = 0; i < 80; ++i) {
    y[i] = i % 2;
    x(i, 0) = (y[i] == 1 ? 3.0 : -3.0) + 0.3 * x(i, 0);
  }
  const LinearModel m = train_linear(x, y, {});
  const double top = m.weights().cwiseAbs().maxCoeff();
  for (Index j = 1; j < 6; ++j) CHECK(std::abs(m.weights()[j]) < 0.1 * top);
}

TEST_CASE("flipping labels flips the model") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd x = gaussian(rng, 30, 3);
  const Labels y = random_labels(rng, 30);
  const Labels flipped = (1 - y.array()).matrix();
  const LinearModel a = train_linear(x, y, {});
  const LinearModel b = train_linear(x, flipped, {});
  CHECK((a.weights() + b.weights()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(a.bias() + b.bias() == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("linear svm matches grid-search minimum of the primal") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 6; ++trial) {
    const Index n = 8 + 2 * trial, d = 1 + trial % 3;
    const Eigen::MatrixXd x = gaussian(rng, n, d);
    const Labels y = random_labels(rng, n);
    SvmConfig cfg;
    cfg.c = trial % 2 == 0 ? 1.0 : 0.5;
    const LinearModel m = train_linear(x, y, cfg);
    const double ours = oracle::hinge(m.weights(), m.bias(), x, y, cfg.c);
    const double grid = oracle::grid_search_hinge(x, y, cfg.c);
    CHECK(ours <= grid + 1e-3);
    CHECK(ours >= grid - 1e-3);
    CHECK(hinge_objective(m.weights(), m.bias(), x, y, cfg) == doctest::Approx(ours));
  }
}

TEST_CASE("dual objective is monotone and the duality gap closes") {
  std::mt19937_64 rng(14);
  const Eigen::MatrixXd x = gaussian(rng, 50, 5);
  const Labels y = random_labels(rng, 50);
  SvmTrace trace;
  const LinearModel m = train_linear(x, y, {}, &trace);
  REQUIRE(trace.dual_objective.size() >= 2);
  for (std::size_t i = 1; i < trace.dual_objective.size(); ++i) {
    CHECK(trace.dual_objective[i] <= trace.dual_objective[i - 1] + 1e-12);
  }
  CHECK(trace.converged);
  CHECK(!trace.primal.empty());
  // final_dual is the minimized dual, primal optimum equals its negation
  CHECK(trace.final_primal == doctest::Approx(-trace.final_dual).epsilon(1e-3));
  CHECK(trace.final_primal == doctest::Approx(hinge_objective(m.weights(), m.bias(), x, y, {})));
}

TEST_CASE("rbf svm solves XOR where linear cannot") {
  std::mt19937_64 rng(15);
  const Xor d = xor_set(rng, 10);
  const RbfModel r = train_rbf(d.x, d.y, {});
  CHECK(training_accuracy(r, d.x, d.y) == 1.0);
  CHECK(training_accuracy(train_linear(d.x, d.y, {}), d.x, d.y) < 0.9);
}

TEST_CASE("rbf accuracy is close to linear on separable data") {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd x = gaussian(rng, 300, 4);
  Labels y(300);
  for (Index i = 0; i < 300; ++i) {
    y[i] = i % 2;
    x(i, 1) += y[i] == 1 ? 2.5 : -2.5;
  }
  const Eigen::MatrixXd xt = x.topRows(100), xv = x.bottomRows(200);
  const Labels yt = y.head(100), yv = y.tail(200);
  const double lin = training_accuracy(train_linear(xt, yt, {}), xv, yv);
  const double rbf = training_accuracy(train_rbf(xt, yt, {}), xv, yv);
  CHECK(std::abs(lin - rbf) <= 0.02 + 1e-12);
}

TEST_CASE("tiny gamma gives nearly constant decision values") {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd x = gaussian(rng, 30, 3);
  const Labels y = random_labels(rng, 30);
  SvmConfig cfg;
  cfg.gamma = 1e-9;
  const RbfModel r = train_rbf(x, y, cfg);
  double lo = 1e300, hi = -1e300;
  for (Index i = 0; i < 30; ++i) {
    const double v = r.decision_value(x.row(i).transpose());
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo < 1e-3);
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hits(100, 0);
  parallel_for(100, [&](std::size_t i) { hits[i] += 1; }, 4);
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) { if (i == 7) throw InvalidInputError("x"); }, 3),
                  InvalidInputError);
}
