#include <doctest.h>
#include <set>

#include "formcheck/align.hpp"
#include "formcheck/synthgen.hpp"

using namespace formcheck;

namespace {

CorpusConfig small_config(int subjects, std::uint64_t seed) {
  CorpusConfig cfg;
  cfg.subjects = subjects;
  cfg.single_sample_subjects = 0;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("same seed gives identical corpora") {
  const CorpusConfig cfg = small_config(4, 11);
  const Corpus a = generate_corpus(cfg), b = generate_corpus(cfg);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].trajectory == b.samples[i].trajectory);
    CHECK(a.samples[i].labels == b.samples[i].labels);
    CHECK(a.truth_segments[i] == b.truth_segments[i]);
  }
  CorpusConfig other = cfg;
  other.seed = 12;
  CHECK_FALSE(generate_corpus(other).samples[0].trajectory == a.samples[0].trajectory);
}

TEST_CASE("default shape mirrors the reference corpus counts") {
  const Corpus c = generate_corpus({});
  CHECK(c.samples.size() == 95);
  const int erroneous[] = {33, 45, 23, 34, 51, 23, 42, 17, 51, 61};
  const int correct[] = {29, 33, 51, 42, 16, 33, 38, 46, 34, 27};
  for (ErrorPattern p : kErrorPatterns) {
    int pos = 0, neg = 0;
    for (const LabeledSample& s : c.samples) {
      pos += s.label(p) == Label::present ? 1 : 0;
      neg += s.label(p) == Label::absent ? 1 : 0;
    }
    CHECK(pos == erroneous[index_of(p)]);
    CHECK(neg == correct[index_of(p)]);
  }
  std::set<std::string> subjects;
  for (const LabeledSample& s : c.samples) {
    subjects.insert(s.trajectory.subject_id());
    CHECK_NOTHROW(validate_labels(s.labels, s.trajectory.sample_id()));
    CHECK(s.trajectory.joint_count() == 19);
    CHECK(s.trajectory.sample_rate() == 120.0);
  }
  CHECK(subjects.size() == 49);
}

TEST_CASE("geometric checks agree with the injected truth on the whole corpus") {
  const Corpus c = generate_corpus({});
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    for (ErrorPattern p : kErrorPatterns) {
      INFO(to_string(p), " sample ", c.samples[i].trajectory.sample_id(), " statistic ",
           geometric_statistic(p, c.samples[i].trajectory));
      CHECK(geometric_check(p, c.samples[i].trajectory) == c.truth[i][index_of(p)]);
      if (c.samples[i].labeled(p)) {
        CHECK((c.samples[i].label(p) == Label::present) == c.truth[i][index_of(p)]);
      }
    }
  }
}

TEST_CASE("zero rates give clean, fully absent samples") {
  CorpusConfig cfg = small_config(10, 3);
  for (auto& r : cfg.rates) r = {0.0, 1.0};
  const Corpus c = generate_corpus(cfg);
  for (const LabeledSample& s : c.samples) {
    for (ErrorPattern p : kErrorPatterns) CHECK(s.label(p) == Label::absent);
    CHECK(is_correct_squat(s.trajectory));
  }
}

TEST_CASE("too deep at rate one puts every sample below the clean depth band") {
  CorpusConfig cfg = small_config(8, 5);
  for (auto& r : cfg.rates) r = {0.0, 1.0};
  cfg.rates[index_of(ErrorPattern::too_deep)] = {1.0, 1.0};
  const Corpus deep = generate_corpus(cfg);
  for (auto& r : cfg.rates) r = {0.0, 1.0};
  const Corpus clean = generate_corpus(cfg);
  double clean_min = 1e9;
  for (const LabeledSample& s : clean.samples) {
    clean_min = std::min(clean_min, geometric_statistic(ErrorPattern::too_deep, s.trajectory));
  }
  for (const LabeledSample& s : deep.samples) {
    CHECK(s.label(ErrorPattern::too_deep) == Label::present);
    CHECK(geometric_statistic(ErrorPattern::too_deep, s.trajectory) < clean_min);
  }
}

TEST_CASE("intensity zero leaves the squat unchanged") {
  const SquatParams p = sample_params(make_style(1, 0), 42);
  const GeneratedSquat clean = synthesize(p, "s", "a");
  for (ErrorPattern e : kErrorPatterns) {
    const GeneratedSquat same = synthesize(inject_error(p, {e, 0.0}), "s", "a");
    CHECK(same.trajectory == clean.trajectory);
  }
  CHECK_THROWS_AS(inject_error(p, {ErrorPattern::too_deep, 1.5}), InvalidInputError);
}

TEST_CASE("feet distance edit narrows the foot gap") {
  for (int subject = 0; subject < 10; ++subject) {
    const SquatParams p = sample_params(make_style(2, subject), 7 + subject);
    const double clean = geometric_statistic(ErrorPattern::feet_distance, synthesize(p, "s", "a").trajectory);
    const double edited = geometric_statistic(
        ErrorPattern::feet_distance,
        synthesize(inject_error(p, {ErrorPattern::feet_distance, 0.5}), "s", "a").trajectory);
    CHECK(edited < clean);
  }
}

TEST_CASE("edits compose") {
  for (int subject = 0; subject < 6; ++subject) {
    SquatParams p = sample_params(make_style(3, subject), 100 + subject);
    p = inject_error(p, {ErrorPattern::arched_neck, 0.7});
    p = inject_error(p, {ErrorPattern::too_deep, 0.7});
    const Trajectory t = synthesize(p, "s", "a").trajectory;
    CHECK(geometric_check(ErrorPattern::arched_neck, t));
    CHECK(geometric_check(ErrorPattern::too_deep, t));
    CHECK_FALSE(geometric_check(ErrorPattern::hollow_back, t));
  }
}

TEST_CASE("every pattern fires at its minimum detectable intensity") {
  for (int subject = 0; subject < 12; ++subject) {
    const SquatParams p = sample_params(make_style(4, subject), 200 + subject);
    for (ErrorPattern e : kErrorPatterns) {
      const Trajectory t = synthesize(inject_error(p, {e, min_detectable_intensity(e)}), "s", "a").trajectory;
      INFO(to_string(e), " statistic ", geometric_statistic(e, t));
      CHECK(geometric_check(e, t));
      for (ErrorPattern other : kErrorPatterns) {
        if (other != e) {
          INFO("cross ", to_string(other), " ", geometric_statistic(other, t));
          CHECK_FALSE(geometric_check(other, t));
        }
      }
    }
  }
}

TEST_CASE("inter-subject variation exceeds intra-subject variation") {
  CorpusConfig cfg = small_config(8, 9);
  for (auto& r : cfg.rates) r = {0.0, 1.0};
  const Corpus c = generate_corpus(cfg);
  double intra = 0.0, inter = 0.0;
  int n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    for (std::size_t j = i + 1; j < c.samples.size(); ++j) {
      const double d = dtw_distance(c.samples[i].trajectory, c.samples[j].trajectory);
      if (c.samples[i].trajectory.subject_id() == c.samples[j].trajectory.subject_id()) {
        intra += d;
        ++n_intra;
      } else {
        inter += d;
        ++n_inter;
      }
    }
  }
  CHECK(intra / n_intra < inter / n_inter);
}

TEST_CASE("invalid corpus configuration") {
  CorpusConfig cfg;
  cfg.rates[0].error_rate = 1.5;
  CHECK_THROWS_AS(generate_corpus(cfg), InvalidInputError);
  cfg = CorpusConfig{};
  cfg.subjects = 0;
  CHECK_THROWS_AS(generate_corpus(cfg), InvalidInputError);
}

TEST_CASE("squat length is near 480 frames") {
  const Corpus c = generate_corpus(small_config(10, 21));
  for (const LabeledSample& s : c.samples) {
    CHECK(s.trajectory.size() > 380);
    CHECK(s.trajectory.size() < 620);
  }
}
