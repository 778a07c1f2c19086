#include <doctest.h>

#include <map>
#include <set>

#include "formcheck/eval.hpp"
#include "formcheck/synthgen.hpp"

using namespace formcheck;

namespace {

const Corpus& reference_corpus() {
  static const Corpus c = generate_corpus({});
  return c;
}

std::vector<LabeledSample> tiny_corpus(int subjects, int per_subject) {
  std::vector<LabeledSample> out;
  const Corpus& base = reference_corpus();
  for (int s = 0; s < subjects; ++s) {
    for (int r = 0; r < per_subject; ++r) {
      const Trajectory& t = base.samples[static_cast<std::size_t>(s * per_subject + r)].trajectory;
      LabelRow row;
      row.fill(Label::unlabeled);
      row[0] = (s + r) % 2 == 0 ? Label::present : Label::absent;
      out.push_back({Trajectory(t.skeleton(), {t.frame(0), t.frame(1)}, t.sample_rate(), "p" + std::to_string(s),
                                "p" + std::to_string(s) + "_" + std::to_string(r)),
                     row});
    }
  }
  return out;
}

// Predicts a fixed label row per sample id.
FoldTrainer lookup_trainer(std::map<std::string, LabelRow> answers) {
  return [answers](std::span<const LabeledSample>) {
    TrainedFold f;
    f.predict = [answers](const Trajectory& q) {
      Prediction p;
      const LabelRow& row = answers.at(q.sample_id());
      for (ErrorPattern e : kErrorPatterns) {
        const Label l = row[index_of(e)] == Label::present ? Label::present : Label::absent;
        p.patterns.push_back({e, l, l == Label::present ? 1.0 : -1.0, {}, std::nullopt, false});
      }
      return p;
    };
    return f;
  };
}

}  // namespace

TEST_CASE("accuracy on fixed confusion tables") {
  CHECK(accuracy({5, 5, 0, 0}) == 1.0);
  CHECK(accuracy({0, 0, 3, 7}) == 0.0);
  CHECK(accuracy({51, 10, 6, 0}) == 61.0 / 67.0);
  CHECK(accuracy({51, 10, 6, 0}) == doctest::Approx(0.9104).epsilon(1e-4));
  CHECK(accuracy({}) == 0.0);
}

TEST_CASE("f1 on fixed confusion tables") {
  CHECK(f1({7, 3, 0, 0}) == 1.0);
  CHECK(f1({0, 4, 2, 5}) == 0.0);
  CHECK(f1({40, 0, 10, 10}) == 0.8);
  CHECK(f1({0, 9, 0, 0}) == 0.0);
}

TEST_CASE("roc auc counts ties as one half") {
  const std::vector<std::pair<double, bool>> perfect{{0.1, false}, {0.2, false}, {0.8, true}, {0.9, true}};
  CHECK(roc_auc(perfect) == 1.0);
  const std::vector<std::pair<double, bool>> flat{{0.3, true}, {0.3, false}, {0.3, true}, {0.3, false}};
  CHECK(roc_auc(flat) == 0.5);
  const std::vector<std::pair<double, bool>> mixed{{0.9, true}, {0.4, true}, {0.6, false}, {0.1, false}};
  CHECK(roc_auc(mixed) == 0.75);
  const std::vector<std::pair<double, bool>> one_class{{0.9, true}, {0.4, true}};
  CHECK_THROWS_AS(roc_auc(one_class), DegenerateLabelsError);
}

TEST_CASE("roc auc agrees with pair enumeration") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> score(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<double, bool>> v;
    for (int i = 0; i < 30; ++i) v.emplace_back(score(rng) / 2.0, i % 3 == 0);
    double wins = 0, pairs = 0;
    for (const auto& a : v) {
      for (const auto& b : v) {
        if (!a.second || b.second) continue;
        pairs += 1;
        wins += a.first > b.first ? 1.0 : a.first == b.first ? 0.5 : 0.0;
      }
    }
    CHECK(roc_auc(v) == doctest::Approx(wins / pairs).epsilon(1e-15));
  }
}

TEST_CASE("ten subjects in five folds give two subjects per fold") {
  const auto corpus = tiny_corpus(10, 1);
  const FoldPlan plan = make_folds(corpus, 5, 3);
  REQUIRE(plan.size() == 5);
  std::set<std::string> seen;
  for (const auto& f : plan.folds) {
    CHECK(f.size() == 2);
    for (const auto& s : f) CHECK(seen.insert(s).second);
  }
  CHECK(seen.size() == 10);
  CHECK_NOTHROW(validate_fold_plan(plan, corpus));
}

TEST_CASE("samples of one subject share a fold") {
  const Corpus& c = reference_corpus();
  const FoldPlan plan = make_folds(c.samples, 5, 1);
  std::map<std::string, std::set<std::size_t>> folds_of;
  for (const LabeledSample& s : c.samples) folds_of[s.trajectory.subject_id()].insert(plan.fold_of(s.trajectory.subject_id()));
  CHECK(folds_of.size() == 49);
  for (const auto& [subject, folds] : folds_of) CHECK(folds.size() == 1);
  CHECK(plan == make_folds(c.samples, 5, 1));
}

TEST_CASE("folds keep per-pattern label proportions close to the corpus") {
  const Corpus& c = reference_corpus();
  const FoldPlan plan = make_folds(c.samples, 5, 1);
  for (ErrorPattern p : kErrorPatterns) {
    double pos = 0, lab = 0;
    std::vector<double> fpos(5, 0), flab(5, 0);
    for (const LabeledSample& s : c.samples) {
      if (!s.labeled(p)) continue;
      const std::size_t f = plan.fold_of(s.trajectory.subject_id());
      lab += 1;
      flab[f] += 1;
      if (s.label(p) == Label::present) {
        pos += 1;
        fpos[f] += 1;
      }
    }
    for (std::size_t f = 0; f < 5; ++f) {
      INFO(to_string(p), " fold ", f);
      REQUIRE(flab[f] > 0);
      CHECK(std::abs(fpos[f] / flab[f] - pos / lab) <= 0.15);
    }
  }
}

TEST_CASE("fold plans reject too few subjects and overlapping folds") {
  const auto corpus = tiny_corpus(3, 2);
  CHECK_THROWS_AS(make_folds(corpus, 5, 1), InvalidInputError);
  CHECK_THROWS_AS(make_folds(corpus, 1, 1), InvalidInputError);
  FoldPlan bad{{{"p0", "p1"}, {"p1", "p2"}}};
  CHECK_THROWS_AS(validate_fold_plan(bad, corpus), InvalidInputError);
  FoldPlan missing{{{"p0"}, {"p1"}}};
  CHECK_THROWS_AS(validate_fold_plan(missing, corpus), InvalidInputError);
}

TEST_CASE("an oracle classifier scores perfectly") {
  const Corpus& c = reference_corpus();
  std::map<std::string, LabelRow> truth;
  for (const LabeledSample& s : c.samples) truth[s.trajectory.sample_id()] = s.labels;
  const ScoreReport r = run_crossval(c.samples, lookup_trainer(truth), {}, "oracle");
  REQUIRE(r.patterns.size() == kPatternCount);
  for (const PatternScore& s : r.patterns) {
    INFO(to_string(s.pattern));
    CHECK(s.accuracy.mean == 1.0);
    CHECK(s.accuracy.sd == 0.0);
    CHECK(accuracy(s.pooled) == 1.0);
    CHECK(s.pooled.total() == std::count_if(c.samples.begin(), c.samples.end(), [&](const LabeledSample& x) { return x.labeled(s.pattern); }));
  }
}

TEST_CASE("a constant absent classifier scores the negative share") {
  const Corpus& c = reference_corpus();
  std::map<std::string, LabelRow> none;
  for (const LabeledSample& s : c.samples) none[s.trajectory.sample_id()].fill(Label::absent);
  const ScoreReport r = run_crossval(c.samples, lookup_trainer(none), {}, "absent");
  for (const PatternScore& s : r.patterns) {
    long n = 0, p = 0;
    for (const LabeledSample& x : c.samples) {
      n += x.labeled(s.pattern) ? 1 : 0;
      p += x.label(s.pattern) == Label::present ? 1 : 0;
    }
    CHECK(accuracy(s.pooled) == static_cast<double>(n - p) / static_cast<double>(n));
    CHECK(f1(s.pooled) == 0.0);
    REQUIRE(s.roc_auc);
    CHECK(s.roc_auc->mean == 0.5);
  }
}

TEST_CASE("fold metrics match a recount of the raw predictions") {
  const Corpus& c = reference_corpus();
  std::map<std::string, LabelRow> guess;
  std::mt19937_64 rng(9);
  for (const LabeledSample& s : c.samples) {
    for (auto& l : guess[s.trajectory.sample_id()]) l = rng() % 2 ? Label::present : Label::absent;
  }
  CrossvalConfig cfg;
  cfg.seed = 4;
  const ScoreReport r = run_crossval(c.samples, lookup_trainer(guess), cfg, "random");
  for (const PatternScore& s : r.patterns) {
    std::vector<ConfusionCounts> folds(5);
    for (const LabeledSample& x : c.samples) {
      if (!x.labeled(s.pattern)) continue;
      folds[r.plan.fold_of(x.trajectory.subject_id())].add(x.label(s.pattern) == Label::present,
                                                           guess[x.trajectory.sample_id()][index_of(s.pattern)] == Label::present);
    }
    double mean = 0;
    for (std::size_t f = 0; f < 5; ++f) {
      CHECK(s.folds[f].counts == folds[f]);
      mean += accuracy(folds[f]) / 5.0;
    }
    CHECK(s.accuracy.mean == doctest::Approx(mean).epsilon(1e-12));
  }
}

TEST_CASE("single-class test folds omit roc and are flagged") {
  auto corpus = tiny_corpus(4, 1);
  for (auto& s : corpus) s.labels[0] = Label::absent;
  corpus[0].labels[0] = Label::present;
  std::map<std::string, LabelRow> answers;
  for (const auto& s : corpus) answers[s.trajectory.sample_id()] = s.labels;
  CrossvalConfig cfg;
  cfg.folds = 2;
  cfg.patterns = {ErrorPattern::arched_neck};
  const ScoreReport r = run_crossval(corpus, lookup_trainer(answers), cfg, "oracle");
  const PatternScore& s = r.patterns.front();
  int omitted = 0;
  for (const FoldScore& f : s.folds) omitted += f.roc_auc ? 0 : 1;
  CHECK(omitted == 1);
  CHECK(std::any_of(s.flags.begin(), s.flags.end(), [](const std::string& f) { return f.find("ROC omitted") != std::string::npos; }));
}

TEST_CASE("latency statistics") {
  const LatencyStats s = latency_stats({5, 1, 3, 2, 4});
  CHECK(s.median_ms == 3);
  CHECK(s.p95_ms == 5);
  CHECK(s.mean_ms == 3);
  CHECK(s.count == 5);
  const LatencyStats e = latency_stats({4, 2});
  CHECK(e.median_ms == 3);
  std::vector<double> many(100);
  std::iota(many.begin(), many.end(), 1.0);
  CHECK(latency_stats(many).p95_ms == 95);
}
