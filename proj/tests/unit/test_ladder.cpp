#include <doctest.h>

#include <set>
#include <thread>

#include "formcheck/eval.hpp"
#include "formcheck/io.hpp"
#include "formcheck/synthgen.hpp"
#include "support/oracles.hpp"

using namespace formcheck;

namespace {

LabelRow row_of(std::initializer_list<std::pair<ErrorPattern, Label>> entries, Label rest = Label::absent) {
  LabelRow r;
  r.fill(rest);
  for (const auto& [p, l] : entries) r[index_of(p)] = l;
  return r;
}

// One squat of `subject` with the listed errors at full intensity; the labels
// cover `scope` only.
LabeledSample squat(int subject, int rep, std::vector<ErrorPattern> errors, const std::vector<ErrorPattern>& scope) {
  SquatParams p = sample_params(make_style(77, subject), mix_seed(mix_seed(77, static_cast<std::uint64_t>(subject)), static_cast<std::uint64_t>(rep)));
  for (ErrorPattern e : errors) p = inject_error(p, {e, 1.0});
  const std::string s = "q" + std::to_string(subject);
  LabeledSample out{synthesize(p, s, s + "_r" + std::to_string(rep)).trajectory, {}};
  out.labels.fill(Label::unlabeled);
  for (ErrorPattern e : scope) {
    out.labels[index_of(e)] = std::find(errors.begin(), errors.end(), e) != errors.end() ? Label::present : Label::absent;
  }
  return out;
}

const Corpus& corpus() {
  static const Corpus c = generate_corpus({});
  return c;
}

const Corpus& small() {
  static const Corpus c = [] {
    CorpusConfig cfg;
    cfg.subjects = 12;
    cfg.single_sample_subjects = 0;
    cfg.seed = 5;
    return generate_corpus(cfg);
  }();
  return c;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (Variant v : kVariants) CHECK(variant_from_string(to_string(v)) == v);
  CHECK(to_string(Variant::segment_rf_svm) == "segment-rf-svm");
  CHECK_THROWS_AS(variant_from_string("svm"), ConfigError);
}

TEST_CASE("nearest labeled neighbor skips unlabeled rows") {
  const std::vector<double> d{0.1, 0.3, 0.5};
  const std::vector<LabelRow> labels{row_of({}, Label::unlabeled), row_of({{ErrorPattern::too_deep, Label::present}}),
                                     row_of({{ErrorPattern::too_deep, Label::absent}})};
  const auto [arg, score] = nearest_labeled(d, labels, ErrorPattern::too_deep);
  CHECK(arg == 1);
  CHECK(score == doctest::Approx(0.2));
  const auto [arg2, score2] = nearest_labeled(d, labels, ErrorPattern::arched_neck);
  CHECK(arg2 == 1);
  CHECK(score2 == doctest::Approx(-1.3));
  const std::vector<LabelRow> none(3, row_of({}, Label::unlabeled));
  CHECK_THROWS_AS(nearest_labeled(d, none, ErrorPattern::too_deep), NoDataError);
}

TEST_CASE("1nn-dtw returns the label of an identical training sample") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::nn_dtw;
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  const LabeledSample& s = c.samples[3];
  const Prediction p = predict(ladder, s.trajectory);
  for (const PatternPrediction& q : p.patterns) {
    if (!s.labeled(q.pattern)) continue;
    CHECK(q.label == s.label(q.pattern));
    CHECK(std::isfinite(q.score));
  }
  CHECK(dtw_distance(s.trajectory, ladder.neighbors.trajectories[3]) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("1nn-dtw follows the oracle-nearer of two samples") {
  std::mt19937_64 rng(8);
  const auto sk = oracle::chain_skeleton(3);
  int decided = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const Trajectory q = oracle::random_trajectory(rng, sk, 5, "q");
    // One candidate is a jittered copy of the query with a repeated frame.
    std::vector<Frame> near = q.frames();
    near.insert(near.begin() + 2, near[2]);
    const Trajectory copy = q.with_frames(near);
    const Trajectory other = oracle::random_trajectory(rng, sk, 6, "o");
    const bool a_is_copy = trial % 2 == 0;
    const Trajectory a = a_is_copy ? copy : other, b = a_is_copy ? other : copy;
    const auto cost = [&](const Trajectory& x) {
      std::vector<double> c;
      for (Index i = 0; i < q.size(); ++i) {
        for (Index j = 0; j < x.size(); ++j) c.push_back(frame_distance(q.frame(i), x.frame(j)));
      }
      return oracle::brute_force_path_cost(c, q.size(), x.size());
    };
    // Path lengths lie in [max(n, m), n + m - 1]: bound the normalized distance both ways.
    const auto bounds = [&](const Trajectory& x) {
      const double c = cost(x);
      return std::pair{c / static_cast<double>(q.size() + x.size() - 1), c / static_cast<double>(std::max(q.size(), x.size()))};
    };
    const auto [lo_a, hi_a] = bounds(a);
    const auto [lo_b, hi_b] = bounds(b);
    if (!(hi_a < lo_b || hi_b < lo_a)) continue;
    ++decided;
    std::vector<LabeledSample> training{{a, row_of({{ErrorPattern::too_deep, Label::present}})},
                                        {b, row_of({{ErrorPattern::too_deep, Label::absent}})}};
    LadderConfig cfg;
    cfg.variant = Variant::nn_dtw;
    cfg.patterns = {ErrorPattern::too_deep};
    const Prediction p = predict(train_ladder(training, cfg), q);
    CHECK(p.patterns[0].label == (hi_a < lo_b ? Label::present : Label::absent));
  }
  CHECK(decided >= 20);
}

TEST_CASE("1nn-refdtw mostly agrees with 1nn-dtw") {
  const Corpus& c = small();
  std::vector<LabeledSample> train(c.samples.begin(), c.samples.begin() + 18);
  LadderConfig a, b;
  a.variant = Variant::nn_dtw;
  b.variant = Variant::nn_refdtw;
  const TrainedLadder la = train_ladder(train, a), lb = train_ladder(train, b);
  int agree = 0, total = 0;
  for (std::size_t i = 18; i < c.samples.size(); ++i) {
    const Prediction pa = predict(la, c.samples[i].trajectory), pb = predict(lb, c.samples[i].trajectory);
    for (std::size_t k = 0; k < pa.patterns.size(); ++k) {
      agree += pa.patterns[k].label == pb.patterns[k].label ? 1 : 0;
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.7);
}

TEST_CASE("refdtw-svm detects narrow feet on held-out subjects") {
  const Corpus& c = corpus();
  std::vector<LabeledSample> train, test;
  for (const LabeledSample& s : c.samples) (s.trajectory.subject_id() < "s39" ? train : test).push_back(s);
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_svm;
  cfg.patterns = {ErrorPattern::feet_distance};
  const TrainedLadder ladder = train_ladder(train, cfg);
  ConfusionCounts counts;
  for (const LabeledSample& s : test) {
    if (!s.labeled(ErrorPattern::feet_distance)) continue;
    counts.add(s.label(ErrorPattern::feet_distance) == Label::present,
               predict(ladder, s.trajectory).patterns[0].label == Label::present);
  }
  REQUIRE(counts.total() >= 10);
  CHECK(accuracy(counts) >= 0.9);
}

TEST_CASE("single-class patterns warn and predict their class") {
  std::vector<LabeledSample> training;
  const std::vector<ErrorPattern> scope{ErrorPattern::too_deep, ErrorPattern::arched_neck};
  for (int s = 0; s < 6; ++s) training.push_back(squat(s, 0, s % 2 ? std::vector{ErrorPattern::too_deep} : std::vector<ErrorPattern>{}, scope));
  for (Variant v : {Variant::refdtw_svm, Variant::refdtw_rf_svm, Variant::segment_rf_svm, Variant::nn_refdtw}) {
    INFO(to_string(v));
    LadderConfig cfg;
    cfg.variant = v;
    cfg.patterns = scope;
    cfg.selection.forest.trees = 40;
    const TrainedLadder ladder = train_ladder(training, cfg);
    REQUIRE(ladder.warnings.size() == 1);
    CHECK(ladder.warnings[0].pattern == ErrorPattern::arched_neck);
    const Prediction p = predict(ladder, training[0].trajectory);
    CHECK(p.find(ErrorPattern::arched_neck)->label == Label::absent);
  }
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_svm;
  cfg.patterns = {ErrorPattern::hollow_back, ErrorPattern::too_deep};
  const TrainedLadder ladder = train_ladder(training, cfg);
  REQUIRE(ladder.skipped.size() == 1);
  CHECK(ladder.skipped[0].pattern == ErrorPattern::hollow_back);
  CHECK(predict(ladder, training[0].trajectory).find(ErrorPattern::hollow_back) == nullptr);
  cfg.patterns = {ErrorPattern::hollow_back};
  CHECK_THROWS_AS(train_ladder(training, cfg), NoDataError);
}

TEST_CASE("margin ladders predict label combinations missing from training") {
  const std::vector<ErrorPattern> scope{ErrorPattern::too_deep, ErrorPattern::arched_neck};
  std::vector<LabeledSample> training;
  for (int s = 0; s < 8; ++s) {
    training.push_back(squat(s, 0, {}, scope));
    training.push_back(squat(s, 1, {ErrorPattern::too_deep}, scope));
    training.push_back(squat(s, 2, {ErrorPattern::arched_neck}, scope));
  }
  const LabeledSample query = squat(20, 0, {ErrorPattern::too_deep, ErrorPattern::arched_neck}, scope);
  LadderConfig svm;
  svm.variant = Variant::refdtw_rf_svm;
  svm.patterns = scope;
  const TrainedLadder margin = train_ladder(training, svm);
  const Prediction both = predict(margin, query.trajectory);
  CHECK(both.find(ErrorPattern::too_deep)->label == Label::present);
  CHECK(both.find(ErrorPattern::arched_neck)->label == Label::present);

  LadderConfig nn;
  nn.variant = Variant::nn_dtw;
  nn.patterns = scope;
  const Prediction copy = predict(train_ladder(training, nn), query.trajectory);
  const bool deep = copy.find(ErrorPattern::too_deep)->label == Label::present;
  const bool neck = copy.find(ErrorPattern::arched_neck)->label == Label::present;
  CHECK(!(deep && neck));
}

TEST_CASE("too deep is read from the descent or the bottom") {
  const Corpus& c = corpus();
  LadderConfig cfg;
  cfg.variant = Variant::segment_rf_svm;
  cfg.patterns = {ErrorPattern::too_deep};
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  const PatternModel* m = ladder.model(ErrorPattern::too_deep);
  REQUIRE(m);
  REQUIRE(m->segment);
  CHECK((*m->segment == SegmentLabel::is_down || *m->segment == SegmentLabel::going_down));
  CHECK(m->segment_accuracy.size() == 5);
  CHECK(m->mask.indices.size() < static_cast<std::size_t>(m->layout.size()) / 20);
}

TEST_CASE("segment ladders refuse queries that do not segment") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::segment_nn_dtw;
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  const Trajectory& t = c.samples[0].trajectory;
  const Trajectory still = t.with_frames(std::vector<Frame>(200, t.frame(0)));
  CHECK_THROWS_AS(predict(ladder, still), SegmentationError);
}

TEST_CASE("forest votes are fractions and margin scores are finite") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_rf;
  cfg.forest.trees = 50;
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  for (const LabeledSample& s : c.samples) {
    for (const PatternPrediction& q : predict(ladder, s.trajectory).patterns) {
      CHECK(q.score >= 0.0);
      CHECK(q.score <= 1.0);
      CHECK((q.label == Label::present) == (q.score > 0.5));
      CHECK(q.latency.align_ms >= 0.0);
    }
  }
}

TEST_CASE("per-pattern models do not depend on the other patterns") {
  const Corpus& c = small();
  LadderConfig both;
  both.variant = Variant::refdtw_rf_svm;
  both.patterns = {ErrorPattern::too_deep, ErrorPattern::feet_distance};
  LadderConfig one = both;
  one.patterns = {ErrorPattern::too_deep};
  const TrainedLadder a = train_ladder(c.samples, both), b = train_ladder(c.samples, one);
  CHECK(serialize_pattern_model(*a.model(ErrorPattern::too_deep)) == serialize_pattern_model(*b.model(ErrorPattern::too_deep)));
}

TEST_CASE("training is deterministic and independent of the worker count") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::segment_rf_svm;
  cfg.selection.forest.trees = 60;
  cfg.workers = 1;
  LadderConfig many = cfg;
  many.workers = 4;
  const TrainedLadder a = train_ladder(c.samples, cfg), b = train_ladder(c.samples, many);
  REQUIRE(a.models.size() == b.models.size());
  for (std::size_t i = 0; i < a.models.size(); ++i) CHECK(serialize_pattern_model(a.models[i]) == serialize_pattern_model(b.models[i]));
  CHECK(model_hashes(a) == model_hashes(b));
}

TEST_CASE("a trained ladder serves concurrent predictions") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_rf_svm;
  cfg.selection.forest.trees = 60;
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  std::vector<Prediction> out(4);
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < out.size(); ++t) threads.emplace_back([&, t] { out[t] = predict(ladder, c.samples[t].trajectory); });
  for (auto& t : threads) t.join();
  for (std::size_t t = 0; t < out.size(); ++t) {
    const Prediction again = predict(ladder, c.samples[t].trajectory);
    for (std::size_t k = 0; k < again.patterns.size(); ++k) CHECK(again.patterns[k].score == out[t].patterns[k].score);
  }
}

TEST_CASE("query latency counts each shared stage once") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_svm;
  const TrainedLadder ladder = train_ladder(c.samples, cfg);
  const Prediction p = predict(ladder, c.samples[0].trajectory);
  double widest = 0.0;
  for (const PatternPrediction& q : p.patterns) widest = std::max(widest, q.latency.align_ms);
  CHECK(p.latency.align_ms == widest);
  CHECK(p.latency.total() > 0.0);
}

TEST_CASE("quaternion masks expand to whole quaternions") {
  const FeatureLayout layout(2, 3, FeatureSet::quaternions);
  FeatureMask m{{1, 6, 7, 21}, false, 0.0};
  CHECK(expand_quaternion_groups(m, layout).indices == std::vector<Index>{0, 1, 2, 3, 4, 5, 6, 7, 20, 21, 22, 23});
  const FeatureLayout euler(2, 3, FeatureSet::euler);
  CHECK(expand_quaternion_groups(m, euler) == m);
}

TEST_CASE("a pinned reference must be in the training data") {
  const Corpus& c = small();
  LadderConfig cfg;
  cfg.variant = Variant::refdtw_svm;
  cfg.reference_id = c.samples[4].trajectory.sample_id();
  CHECK(train_ladder(c.samples, cfg).reference->sample_id() == *cfg.reference_id);
  cfg.reference_id = "nobody";
  CHECK_THROWS_AS(train_ladder(c.samples, cfg), ConfigError);
}
