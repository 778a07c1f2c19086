#include <doctest.h>

#include <numbers>
#include <random>

#include "formcheck/motion.hpp"
#include "support/oracles.hpp"

using namespace formcheck;

TEST_CASE("quat_distance basic values") {
  const Quaternion id = Quaternion::Identity();
  CHECK(quat_distance(id, id) == doctest::Approx(0.0));
  const Quaternion q = make_rotation(0.5, 0.5, 0.5, 0.5);
  const Quaternion neg(-q.w(), -q.x(), -q.y(), -q.z());
  CHECK(quat_distance(q, neg) == doctest::Approx(0.0));
  const double h = std::sqrt(2.0) / 2.0;
  const Quaternion x90 = make_rotation(h, h, 0, 0);
  CHECK(quat_distance(id, x90) == doctest::Approx(1.0 - h).epsilon(1e-12));
}

TEST_CASE("quat_distance rejects non-finite input") {
  const Quaternion bad(std::nan(""), 0, 0, 0);
  CHECK_THROWS_AS(quat_distance(bad, Quaternion::Identity()), InvalidInputError);
}

TEST_CASE("quat_distance properties on random rotations") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector4d a = oracle::random_unit(rng), b = oracle::random_unit(rng);
    const Quaternion qa(a[0], a[1], a[2], a[3]), qb(b[0], b[1], b[2], b[3]);
    const double d = quat_distance(qa, qb);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(d == doctest::Approx(quat_distance(qb, qa)));
    CHECK(d == doctest::Approx(oracle::quat_dist(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("make_rotation validates the norm") {
  CHECK_THROWS_AS(make_rotation(1.1, 0, 0, 0), InvalidInputError);
  CHECK_THROWS_AS(make_rotation(0, 0, 0, 0), InvalidInputError);
  CHECK_NOTHROW(make_rotation(1.0005, 0, 0, 0));
  CHECK(make_rotation(1.0005, 0, 0, 0).norm() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("frame_distance") {
  Eigen::Matrix4Xd r(4, 2);
  r.col(0) << 1, 0, 0, 0;
  r.col(1) << 1, 0, 0, 0;
  const Eigen::Matrix3Xd p = Eigen::Matrix3Xd::Zero(3, 2);
  const Frame a(r, p);
  CHECK(frame_distance(a, a) == 0.0);

  Eigen::Matrix4Xd r2 = r;
  const double h = std::sqrt(2.0) / 2.0;
  r2.col(1) << h, h, 0, 0;
  CHECK(frame_distance(a, Frame(r2, p)) == doctest::Approx(1.0 - h));

  Eigen::Matrix4Xd r3 = r;
  r3.col(1) << -1, 0, 0, 0;
  CHECK(frame_distance(a, Frame(r3, p)) == doctest::Approx(0.0));

  const Frame one(Eigen::Matrix4Xd(r.leftCols(1)), Eigen::Matrix3Xd(p.leftCols(1)));
  CHECK_THROWS_AS(frame_distance(a, one), StructuralError);
}

TEST_CASE("frame_distance is symmetric on random frames") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Frame a = oracle::random_frame(rng, 19), b = oracle::random_frame(rng, 19);
    CHECK(frame_distance(a, a) == doctest::Approx(0.0));
    CHECK(frame_distance(a, b) == doctest::Approx(frame_distance(b, a)));
  }
}

TEST_CASE("frame rejects non-unit and mismatched input") {
  Eigen::Matrix4Xd r(4, 1);
  r << 2, 0, 0, 0;
  CHECK_THROWS_AS(Frame(r, Eigen::Matrix3Xd::Zero(3, 1)), InvalidInputError);
  r << 1, 0, 0, 0;
  CHECK_THROWS_AS(Frame(r, Eigen::Matrix3Xd::Zero(3, 2)), StructuralError);
}

TEST_CASE("to_euler axis-aligned cases") {
  const EulerTriple zero = to_euler(Quaternion::Identity());
  CHECK(zero.flexion_extension == doctest::Approx(0.0));
  CHECK(zero.abduction_adduction == doctest::Approx(0.0));
  CHECK(zero.twist == doctest::Approx(0.0));

  const Quaternion flex(Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()));
  const EulerTriple e = to_euler(flex);
  CHECK(e.flexion_extension == doctest::Approx(std::numbers::pi / 2));
  CHECK(e.abduction_adduction == doctest::Approx(0.0));
  CHECK(e.twist == doctest::Approx(0.0));

  const EulerTriple tw = to_euler(Quaternion(Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitY())));
  CHECK(tw.twist == doctest::Approx(0.3));
  const EulerTriple ab = to_euler(Quaternion(Eigen::AngleAxisd(-0.4, Eigen::Vector3d::UnitX())));
  CHECK(ab.abduction_adduction == doctest::Approx(-0.4));
}

TEST_CASE("to_euler matches an explicit Z-X-Y matrix oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-3.0, 3.0), pitch(-1.4, 1.4);
  for (int i = 0; i < 500; ++i) {
    const double a = ang(rng), b = pitch(rng), c = ang(rng);
    const Quaternion q(oracle::zxy_matrix(a, b, c));
    const EulerTriple e = to_euler(q);
    CHECK(e.flexion_extension == doctest::Approx(a).epsilon(1e-9));
    CHECK(e.abduction_adduction == doctest::Approx(b).epsilon(1e-9));
    CHECK(e.twist == doctest::Approx(c).epsilon(1e-9));
  }
}

TEST_CASE("euler round trip on 10000 random rotations away from gimbal lock") {
  std::mt19937_64 rng(5);
  const double limit = 85.0 * std::numbers::pi / 180.0;
  int checked = 0;
  double worst = 0.0;
  while (checked < 10000) {
    const Eigen::Vector4d v = oracle::random_unit(rng);
    const Quaternion q(v[0], v[1], v[2], v[3]);
    const EulerTriple e = to_euler(q);
    if (std::abs(e.abduction_adduction) >= limit) continue;
    const Quaternion back = from_euler(e);
    worst = std::max(worst, (back.toRotationMatrix() - q.toRotationMatrix()).cwiseAbs().maxCoeff());
    for (double ch : {e.flexion_extension, e.abduction_adduction, e.twist}) {
      CHECK(ch > -std::numbers::pi);
      CHECK(ch <= std::numbers::pi);
    }
    ++checked;
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("gimbal lock folds twist into flexion") {
  const Quaternion q(oracle::zxy_matrix(0.7, std::numbers::pi / 2, 0.2));
  const EulerTriple e = to_euler(q);
  CHECK(e.twist == 0.0);
  CHECK(e.abduction_adduction == doctest::Approx(std::numbers::pi / 2));
  const Quaternion back = from_euler(e);
  CHECK((back.toRotationMatrix() - q.toRotationMatrix()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("standard skeleton") {
  const auto sk = Skeleton::standard();
  CHECK(sk->size() == 19);
  CHECK(sk->joint(0).name == "hips");
  CHECK_FALSE(sk->joint(0).parent.has_value());
  for (Index i = 1; i < sk->size(); ++i) CHECK(*sk->joint(i).parent < i);
  CHECK(sk->index_of("l_leg") == 14);
  CHECK_THROWS_AS(sk->index_of("tail"), NotFoundError);
}

TEST_CASE("skeleton validation") {
  std::vector<Joint> bad(2);
  bad[0].name = "a";
  bad[1].name = "b";
  CHECK_THROWS_AS(Skeleton{bad}, StructuralError);
  bad[1].parent = 0;
  bad[1].name = "a";
  CHECK_THROWS_AS(Skeleton{bad}, StructuralError);
}

TEST_CASE("trajectory slicing and validation") {
  std::mt19937_64 rng(1);
  const auto sk = oracle::chain_skeleton(3);
  const Trajectory t = oracle::random_trajectory(rng, sk, 10);
  const Trajectory s = t.slice(2, 5);
  CHECK(s.size() == 4);
  CHECK(s.frame(0) == t.frame(2));
  CHECK(s.subject_id() == t.subject_id());
  CHECK(t.reversed().frame(0) == t.frame(9));
  CHECK_THROWS_AS(t.slice(5, 2), InvalidInputError);
  CHECK_THROWS(Trajectory(sk, {}, 120.0, "a", "b"));
  CHECK_THROWS(t.with_frames({oracle::random_frame(rng, 2)}));
  std::vector<Frame> fr = t.frames();
  CHECK_THROWS(Trajectory(sk, fr, 0.0, "a", "b"));
}
