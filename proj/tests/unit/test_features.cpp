#include <doctest.h>

#include <random>

#include "formcheck/features.hpp"
#include "support/oracles.hpp"

using namespace formcheck;

TEST_CASE("feature length formula") {
  std::mt19937_64 rng(1);
  const auto sk = Skeleton::standard();
  const Trajectory t = oracle::random_trajectory(rng, sk, 902);
  CHECK(extract(t, FeatureSet::euler_positions).values.size() == 102828);
  CHECK(extract(t, FeatureSet::euler).values.size() == 902 * 19 * 3);
  CHECK(extract(t, FeatureSet::positions).values.size() == 902 * 19 * 3);
  CHECK(extract(t, FeatureSet::quaternions).values.size() == 902 * 19 * 4);

  const Trajectory one = oracle::random_trajectory(rng, oracle::chain_skeleton(1), 1);
  CHECK(extract(one, FeatureSet::euler_positions).values.size() == 6);
  const FeatureVector q = extract(one, FeatureSet::quaternions);
  REQUIRE(q.values.size() == 4);
  for (Index c = 0; c < 4; ++c) CHECK(q.values[c] == one.frame(0).rotations()(c, 0));
}

TEST_CASE("layout index map round trips") {
  for (FeatureSet set : {FeatureSet::euler, FeatureSet::positions, FeatureSet::euler_positions, FeatureSet::quaternions}) {
    const FeatureLayout layout(13, 5, set);
    for (Index i = 0; i < layout.size(); ++i) CHECK(layout.flat(layout.coord(i)) == i);
    CHECK_THROWS_AS(layout.coord(layout.size()), InvalidInputError);
  }
  const FeatureLayout l(3, 2, FeatureSet::euler_positions);
  CHECK(l.flat({1, 1, 4}) == (1 * 2 + 1) * 6 + 4);
}

TEST_CASE("extracted values follow the layout") {
  std::mt19937_64 rng(2);
  const Trajectory t = oracle::random_trajectory(rng, oracle::chain_skeleton(4), 6);
  const FeatureVector v = extract(t, FeatureSet::euler_positions);
  for (Index i = 0; i < v.values.size(); ++i) {
    const FeatureCoord c = v.layout.coord(i);
    const EulerTriple e = to_euler(t.frame(c.frame).rotation(c.joint));
    const double expected = c.channel == 0   ? e.flexion_extension
                            : c.channel == 1 ? e.abduction_adduction
                            : c.channel == 2 ? e.twist
                                             : t.frame(c.frame).positions()(c.channel - 3, c.joint);
    CHECK(v.values[i] == expected);
  }
  std::vector<Index> idx = {17, 3, 0, 143, 18};
  const Eigen::VectorXd sel = extract_selected(t, v.layout, idx);
  for (std::size_t k = 0; k < idx.size(); ++k) CHECK(sel[static_cast<Index>(k)] == v.values[idx[k]]);
}

TEST_CASE("scaler population statistics") {
  std::vector<FeatureVector> vs(2);
  vs[0].values = Eigen::VectorXd::Constant(1, 0.0);
  vs[1].values = Eigen::VectorXd::Constant(1, 2.0);
  const Scaler s = fit_scaler(vs);
  CHECK(s.mean()[0] == 1.0);
  CHECK(s.stddev()[0] == 1.0);
  CHECK_THROWS_AS(fit_scaler(std::span<const FeatureVector>(vs.data(), 1)), InvalidInputError);
  vs[1].values = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(fit_scaler(vs), StructuralError);
}

TEST_CASE("scaler transform, constant guard and inverse") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(2.0, 3.0);
  Eigen::MatrixXd x(40, 6);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = g(rng);
  }
  x.col(4).setConstant(5.0);
  const Scaler s = Scaler::fit(x);
  Eigen::MatrixXd z = x;
  s.transform_rows_in_place(z);
  for (Index j = 0; j < 6; ++j) {
    const double mean = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - mean).square().mean());
    CHECK(std::abs(mean) < 1e-9);
    if (j == 4) {
      CHECK(z.col(j).cwiseAbs().maxCoeff() == 0.0);
    } else {
      CHECK(sd == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK(s.transform(s.mean()).cwiseAbs().maxCoeff() == 0.0);
  for (Index i = 0; i < 5; ++i) {
    const Eigen::VectorXd row = x.row(i).transpose();
    CHECK((s.inverse_transform(s.transform(row)) - row).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((s.transform(row) - z.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(s.transform(Eigen::VectorXd::Zero(3)), StructuralError);
  const std::vector<Index> keep = {1, 4};
  const Scaler r = s.restricted(keep);
  CHECK(r.size() == 2);
  CHECK(r.mean()[0] == s.mean()[1]);
}

TEST_CASE("feature set names") {
  for (FeatureSet set : {FeatureSet::euler, FeatureSet::positions, FeatureSet::euler_positions, FeatureSet::quaternions}) {
    CHECK(feature_set_from_string(to_string(set)) == set);
  }
  CHECK_THROWS_AS(feature_set_from_string("velocity"), InvalidInputError);
}
