#include "formcheck/ladder.hpp"

#include <chrono>
#include <limits>
#include <map>
#include <numeric>

#include "formcheck/eval.hpp"
#include "formcheck/parallel.hpp"

namespace formcheck {
namespace {

constexpr const char* kVariantNames[] = {"1nn-dtw",   "1nn-refdtw",     "refdtw-svm",     "refdtw-rf-svm",
                                         "refdtw-rf", "segment-rf-svm", "segment-1nn-dtw"};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  /// Milliseconds since construction or the previous lap.
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

std::optional<Segmentation> try_segment(const Trajectory& t, const SegmentConfig& cfg) {
  try {
    return segment(t, cfg);
  } catch (const SegmentationError&) {
    return std::nullopt;
  } catch (const InvalidInputError&) {
    return std::nullopt;
  }
}

std::vector<Trajectory> warp_all(std::span<const Trajectory> ts, const Trajectory& reference, const DtwOptions& opt,
                                 int workers) {
  std::vector<std::optional<Trajectory>> out(ts.size());
  parallel_for(ts.size(), [&](std::size_t i) { out[i] = warp_to_reference(ts[i], reference, opt); }, workers);
  std::vector<Trajectory> warped;
  warped.reserve(ts.size());
  for (auto& w : out) warped.push_back(std::move(*w));
  return warped;
}

Eigen::MatrixXd full_rows(std::span<const Trajectory> warped, FeatureSet set, int workers) {
  if (warped.empty()) return {};
  const FeatureLayout layout(warped.front().size(), warped.front().joint_count(), set);
  Eigen::MatrixXd x(static_cast<Index>(warped.size()), layout.size());
  parallel_for(warped.size(), [&](std::size_t i) {
    x.row(static_cast<Index>(i)) = extract(warped[i], set).values.transpose();
  }, workers);
  return x;
}

std::vector<Index> all_indices(Index d) {
  std::vector<Index> v(static_cast<std::size_t>(d));
  std::iota(v.begin(), v.end(), Index{0});
  return v;
}

PatternModel bare_model(ErrorPattern p) {
  PatternModel m;
  m.pattern = p;
  return m;
}

bool covers_all(const PatternModel& m) { return static_cast<Index>(m.mask.indices.size()) == m.layout.size(); }

// Which training rows are labeled for the pattern, and their labels.
struct PatternRows {
  std::vector<Index> rows;
  Labels y;
};

PatternRows labeled_rows(std::span<const LabelRow> labels, std::span<const Index> candidates, ErrorPattern p) {
  PatternRows out;
  std::vector<int> ys;
  for (Index r : candidates) {
    const Label l = labels[static_cast<std::size_t>(r)][index_of(p)];
    if (l == Label::unlabeled) continue;
    out.rows.push_back(r);
    ys.push_back(l == Label::present ? 1 : 0);
  }
  out.y = Eigen::Map<const Eigen::VectorXi>(ys.data(), static_cast<Index>(ys.size()));
  return out;
}

std::optional<Label> single_class(const Labels& y) {
  if (y.size() == 0) return std::nullopt;
  const int s = y.sum();
  if (s == 0) return Label::absent;
  if (s == y.size()) return Label::present;
  return std::nullopt;
}

// Mask, scaler and classifier trained on rows of a full feature matrix.
void fit_model(PatternModel& m, const Eigen::MatrixXd& x, const PatternRows& data, const LadderConfig& cfg,
               std::uint64_t seed) {
  m.constant = single_class(data.y);
  m.linear.reset();
  m.rbf.reset();
  m.forest.reset();
  if (m.constant) {
    m.mask = {};
    m.scaler = {};
    return;
  }
  const Eigen::MatrixXd rows = x(data.rows, Eigen::all);
  const Variant v = cfg.variant;
  if (v == Variant::refdtw_rf) {
    m.mask = {all_indices(m.layout.size()), false, 0.0};
    m.scaler = {};
    ForestConfig fc = cfg.forest;
    fc.seed = seed;
    fc.workers = 1;
    m.forest = train_forest(rows, data.y, fc);
    return;
  }
  Eigen::MatrixXd masked;
  if (v == Variant::refdtw_svm) {
    m.mask = {all_indices(m.layout.size()), false, 0.0};
    masked = rows;
  } else {
    SelectionConfig sc = cfg.selection;
    sc.forest.seed = seed;
    sc.forest.workers = 1;
    m.mask = expand_quaternion_groups(select_features(rows, data.y, m.layout, sc).mask, m.layout);
    masked = rows(Eigen::all, m.mask.indices);
  }
  m.scaler = Scaler::fit(masked);
  m.scaler.transform_rows_in_place(masked);
  if (cfg.kernel == Kernel::linear) {
    m.linear = train_linear(masked, data.y, cfg.svm);
  } else {
    m.rbf = train_rbf(masked, data.y, cfg.svm);
  }
}

double decision_value(const PatternModel& m, const Eigen::VectorXd& raw) {
  if (m.forest) return m.forest->vote_fraction(raw);
  const Eigen::VectorXd x = m.scaler.transform(raw);
  return m.linear ? m.linear->decision_value(x) : m.rbf->decision_value(x);
}

bool decide(const PatternModel& m, double score) { return m.forest ? score > 0.5 : score > 0.0; }

std::uint64_t pattern_seed(const LadderConfig& cfg, ErrorPattern p, int segment) {
  return mix_seed(cfg.seed, 0x7061747465726eULL + 16 * index_of(p) + static_cast<std::uint64_t>(segment + 1));
}

// Inner subject-disjoint folds over the given rows.
std::vector<std::vector<Index>> inner_folds(std::span<const std::string> all_subjects, std::span<const LabelRow> all_labels,
                                            const std::vector<Index>& rows, int k, std::uint64_t seed) {
  std::vector<std::string> subjects;
  std::vector<LabelRow> labels;
  for (Index r : rows) {
    subjects.push_back(all_subjects[static_cast<std::size_t>(r)]);
    labels.push_back(all_labels[static_cast<std::size_t>(r)]);
  }
  std::vector<std::string> unique = subjects;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  const int folds = std::min<int>(k, static_cast<int>(unique.size()));
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(std::max(folds, 0)));
  if (folds < 2) return {};
  const FoldPlan plan = make_folds(subjects, labels, folds, seed);
  for (std::size_t i = 0; i < rows.size(); ++i) out[plan.fold_of(subjects[i])].push_back(static_cast<Index>(i));
  return out;
}

// Rows of `data` at the given positions.
PatternRows subset(const PatternRows& data, const std::vector<Index>& positions) {
  PatternRows out;
  out.y.resize(static_cast<Index>(positions.size()));
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.rows.push_back(data.rows[static_cast<std::size_t>(positions[i])]);
    out.y[static_cast<Index>(i)] = data.y[positions[i]];
  }
  return out;
}

double inner_accuracy_model(const Eigen::MatrixXd& x, const PatternRows& data, const LadderConfig& cfg,
                            const FeatureLayout& layout, std::uint64_t seed,
                            const std::vector<std::vector<Index>>& folds) {
  long correct = 0, total = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<Index> train;
    for (std::size_t g = 0; g < folds.size(); ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    const PatternRows tr = subset(data, train), te = subset(data, folds[f]);
    PatternModel m;
    m.layout = layout;
    fit_model(m, x, tr, cfg, mix_seed(seed, f));
    for (Index i = 0; i < te.y.size(); ++i) {
      int pred = 0;
      if (m.constant) {
        pred = *m.constant == Label::present ? 1 : 0;
      } else {
        const Eigen::VectorXd raw = x(te.rows[static_cast<std::size_t>(i)], m.mask.indices).transpose();
        pred = decide(m, decision_value(m, raw)) ? 1 : 0;
      }
      correct += pred == te.y[i] ? 1 : 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

double inner_accuracy_nn(const Eigen::MatrixXd& dist, const PatternRows& data, std::span<const LabelRow> labels,
                         ErrorPattern p, const std::vector<std::vector<Index>>& folds) {
  long correct = 0, total = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::vector<char> inside(data.rows.size(), 0);
    for (Index i : folds[f]) inside[static_cast<std::size_t>(i)] = 1;
    for (Index i : folds[f]) {
      double best = std::numeric_limits<double>::infinity();
      int pred = 0;
      bool any = false;
      for (std::size_t j = 0; j < data.rows.size(); ++j) {
        if (inside[j]) continue;
        const double d = dist(data.rows[static_cast<std::size_t>(i)], data.rows[j]);
        if (d < best) {
          best = d;
          pred = labels[static_cast<std::size_t>(data.rows[j])][index_of(p)] == Label::present ? 1 : 0;
          any = true;
        }
      }
      if (!any) continue;
      correct += pred == data.y[i] ? 1 : 0;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

std::size_t pick_reference(std::span<const LabeledSample> corpus, const LadderConfig& cfg,
                           std::vector<std::optional<Segmentation>>& segs) {
  if (cfg.reference_id) {
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].trajectory.sample_id() == *cfg.reference_id) {
        if (uses_segments(cfg.variant) && !segs[i]) {
          throw ConfigError("reference '" + *cfg.reference_id + "' does not segment");
        }
        return i;
      }
    }
    throw ConfigError("reference sample '" + *cfg.reference_id + "' is not in the training data");
  }
  std::vector<Trajectory> ts;
  std::vector<std::vector<SegmentLabel>> labels;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    ts.push_back(corpus[i].trajectory);
    labels.push_back(segs[i] ? segs[i]->labels() : std::vector<SegmentLabel>{});
  }
  return select_reference(ts, labels);
}

}  // namespace

std::string_view to_string(Variant v) { return kVariantNames[static_cast<int>(v)]; }

Variant variant_from_string(std::string_view name) {
  for (Variant v : kVariants) {
    if (to_string(v) == name) return v;
  }
  throw ConfigError("unknown classifier variant '" + std::string(name) + "'");
}

bool uses_reference(Variant v) { return v != Variant::nn_dtw && v != Variant::segment_nn_dtw; }
bool uses_segments(Variant v) { return v == Variant::segment_rf_svm || v == Variant::segment_nn_dtw; }
bool is_nearest_neighbor(Variant v) {
  return v == Variant::nn_dtw || v == Variant::nn_refdtw || v == Variant::segment_nn_dtw;
}

const PatternModel* TrainedLadder::model(ErrorPattern p) const {
  for (const PatternModel& m : models) {
    if (m.pattern == p) return &m;
  }
  return nullptr;
}

const PatternPrediction* Prediction::find(ErrorPattern p) const {
  for (const PatternPrediction& q : patterns) {
    if (q.pattern == p) return &q;
  }
  return nullptr;
}

std::pair<std::size_t, double> nearest_labeled(std::span<const double> distances, std::span<const LabelRow> labels,
                                               ErrorPattern p) {
  if (distances.size() != labels.size()) throw StructuralError("nearest_labeled: one label row per distance");
  constexpr double inf = std::numeric_limits<double>::infinity();
  double best = inf, present = inf, absent = inf;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const Label l = labels[i][index_of(p)];
    if (l == Label::unlabeled) continue;
    const double d = distances[i];
    if (d < best) {
      best = d;
      arg = i;
    }
    (l == Label::present ? present : absent) = std::min(l == Label::present ? present : absent, d);
  }
  if (best == inf) throw NoDataError("no training sample is labeled for '" + std::string(to_string(p)) + "'");
  double score;
  if (present == inf) {
    score = -1.0 - absent;
  } else if (absent == inf) {
    score = 1.0 + present;
  } else {
    score = absent - present;
  }
  return {arg, score};
}

Eigen::MatrixXd feature_rows(std::span<const Trajectory> warped, const FeatureLayout& layout,
                             std::span<const Index> mask) {
  Eigen::MatrixXd x(static_cast<Index>(warped.size()), static_cast<Index>(mask.size()));
  for (std::size_t i = 0; i < warped.size(); ++i) {
    x.row(static_cast<Index>(i)) = extract_selected(warped[i], layout, mask).transpose();
  }
  return x;
}

FeatureMask expand_quaternion_groups(const FeatureMask& mask, const FeatureLayout& layout) {
  if (layout.set() != FeatureSet::quaternions) return mask;
  FeatureMask out = mask;
  out.indices.clear();
  for (Index i : mask.indices) {
    const Index base = i - i % 4;
    if (!out.indices.empty() && out.indices.back() >= base) continue;
    for (Index c = 0; c < 4; ++c) out.indices.push_back(base + c);
  }
  return out;
}

TrainedLadder train_ladder(std::span<const LabeledSample> corpus, const LadderConfig& cfg) {
  if (corpus.empty()) throw NoDataError("train_ladder: empty training data");
  if (cfg.inner_folds < 2) throw ConfigError("inner_folds must be at least 2");
  const auto skeleton = corpus.front().trajectory.skeleton();
  for (const LabeledSample& s : corpus) {
    if (!(*s.trajectory.skeleton() == *skeleton)) throw StructuralError("training trajectories use different skeletons");
  }

  TrainedLadder out;
  out.config = cfg;
  const Variant v = cfg.variant;
  const std::size_t n = corpus.size();

  std::vector<Trajectory> raw;
  std::vector<LabelRow> labels;
  for (const LabeledSample& s : corpus) {
    raw.push_back(s.trajectory);
    labels.push_back(s.labels);
  }

  std::vector<ErrorPattern> patterns;
  for (ErrorPattern p : cfg.patterns) {
    const bool any = std::any_of(labels.begin(), labels.end(), [&](const LabelRow& r) { return r[index_of(p)] != Label::unlabeled; });
    if (any) {
      patterns.push_back(p);
    } else {
      out.skipped.push_back({p, "no training sample is labeled for this pattern"});
    }
  }
  if (patterns.empty()) throw NoDataError("train_ladder: no configured pattern has labeled training data");
  for (ErrorPattern p : patterns) {
    const bool pos = std::any_of(labels.begin(), labels.end(), [&](const LabelRow& r) { return r[index_of(p)] == Label::present; });
    const bool neg = std::any_of(labels.begin(), labels.end(), [&](const LabelRow& r) { return r[index_of(p)] == Label::absent; });
    if (!pos || !neg) {
      out.warnings.push_back({p, std::string("training labels are all ") + (pos ? "present" : "absent") +
                                     "; the pattern predicts that label"});
    }
  }

  if (v == Variant::nn_dtw) {
    out.neighbors = {raw, labels};
    for (ErrorPattern p : patterns) out.models.push_back(bare_model(p));
    return out;
  }

  std::vector<std::optional<Segmentation>> segs(n);
  parallel_for(n, [&](std::size_t i) { segs[i] = try_segment(raw[i], cfg.segmentation); }, cfg.workers);

  std::size_t ref_index = 0;
  if (uses_reference(v) || uses_segments(v)) {
    ref_index = pick_reference(corpus, cfg, segs);
    out.reference = raw[ref_index];
    out.reference_segments = segs[ref_index];
  }

  if (!uses_segments(v)) {
    const Trajectory& ref = *out.reference;
    std::vector<Trajectory> warped = warp_all(raw, ref, cfg.dtw, cfg.workers);
    if (v == Variant::nn_refdtw) {
      out.neighbors = {std::move(warped), labels};
      for (ErrorPattern p : patterns) out.models.push_back(bare_model(p));
      return out;
    }
    const FeatureLayout layout(ref.size(), ref.joint_count(), cfg.features);
    const Eigen::MatrixXd x = full_rows(warped, cfg.features, cfg.workers);
    const std::vector<Index> every = all_indices(static_cast<Index>(n));
    out.models.resize(patterns.size());
    parallel_for(patterns.size(), [&](std::size_t k) {
      PatternModel& m = out.models[k];
      m.pattern = patterns[k];
      m.layout = layout;
      fit_model(m, x, labeled_rows(labels, every, m.pattern), cfg, pattern_seed(cfg, m.pattern, -1));
    }, cfg.workers);
    return out;
  }

  // Segment variants: per canonical segment, the training segments (warped for rf-svm).
  std::vector<Index> segmented;
  for (std::size_t i = 0; i < n; ++i) {
    if (segs[i]) {
      segmented.push_back(static_cast<Index>(i));
    } else {
      out.unsegmented.push_back(raw[i].sample_id());
    }
  }
  const Segmentation& ref_seg = *out.reference_segments;
  std::array<std::vector<Trajectory>, 5> parts;
  for (std::size_t s = 0; s < 5; ++s) {
    for (Index i : segmented) {
      parts[s].push_back(extract_segment(raw[static_cast<std::size_t>(i)], *segs[static_cast<std::size_t>(i)], kSegmentLabels[s]));
    }
  }

  // Positions in `segmented` double as row numbers of the per-segment matrices.
  std::vector<LabelRow> seg_labels;
  for (Index i : segmented) seg_labels.push_back(labels[static_cast<std::size_t>(i)]);
  std::vector<Index> seg_rows = all_indices(static_cast<Index>(segmented.size()));

  std::array<Eigen::MatrixXd, 5> x;
  std::array<FeatureLayout, 5> layouts;
  std::array<Eigen::MatrixXd, 5> dist;
  for (std::size_t s = 0; s < 5; ++s) {
    const Trajectory ref_part = extract_segment(*out.reference, ref_seg, kSegmentLabels[s]);
    layouts[s] = FeatureLayout(ref_part.size(), ref_part.joint_count(), cfg.features);
    if (v == Variant::segment_rf_svm) {
      x[s] = full_rows(warp_all(parts[s], ref_part, cfg.dtw, cfg.workers), cfg.features, cfg.workers);
    } else {
      const std::size_t m = parts[s].size();
      dist[s] = Eigen::MatrixXd::Zero(static_cast<Index>(m), static_cast<Index>(m));
      parallel_for(m, [&](std::size_t a) {
        for (std::size_t b = a + 1; b < m; ++b) {
          const double d = dtw_distance(parts[s][a], parts[s][b], cfg.dtw);
          dist[s](static_cast<Index>(a), static_cast<Index>(b)) = d;
          dist[s](static_cast<Index>(b), static_cast<Index>(a)) = d;
        }
      }, cfg.workers);
      out.segment_neighbors[s] = {parts[s], seg_labels};
    }
  }

  std::vector<std::string> seg_subjects;
  for (Index i : segmented) seg_subjects.push_back(raw[static_cast<std::size_t>(i)].subject_id());

  out.models.resize(patterns.size());
  parallel_for(patterns.size(), [&](std::size_t k) {
    PatternModel& m = out.models[k];
    m.pattern = patterns[k];
    const PatternRows data = labeled_rows(seg_labels, seg_rows, m.pattern);
    if (data.rows.empty() || single_class(data.y)) {
      // Nothing to choose between; read the bottom of the movement.
      m.segment = SegmentLabel::is_down;
      m.layout = layouts[static_cast<std::size_t>(SegmentLabel::is_down)];
      m.constant = data.rows.empty() ? Label::absent : *single_class(data.y);
      return;
    }
    const std::vector<std::vector<Index>> folds =
        inner_folds(seg_subjects, seg_labels, data.rows, cfg.inner_folds, mix_seed(cfg.seed, 0x696e6e6572ULL + index_of(m.pattern)));
    std::size_t best = 0;
    for (std::size_t s = 0; s < 5; ++s) {
      double acc = 0.0;
      if (!folds.empty()) {
        acc = v == Variant::segment_rf_svm
                  ? inner_accuracy_model(x[s], data, cfg, layouts[s], pattern_seed(cfg, m.pattern, static_cast<int>(s)), folds)
                  : inner_accuracy_nn(dist[s], data, seg_labels, m.pattern, folds);
      }
      m.segment_accuracy.push_back(acc);
      if (acc > m.segment_accuracy[best]) best = s;
    }
    m.segment = kSegmentLabels[best];
    m.layout = layouts[best];
    if (v == Variant::segment_rf_svm) fit_model(m, x[best], data, cfg, pattern_seed(cfg, m.pattern, static_cast<int>(best)));
  }, cfg.workers);
  return out;
}

Prediction predict(const TrainedLadder& ladder, const Trajectory& query) {
  const LadderConfig& cfg = ladder.config;
  const Variant v = cfg.variant;
  const auto& sk = ladder.reference ? ladder.reference->skeleton()
                                    : (ladder.neighbors.trajectories.empty() ? query.skeleton()
                                                                             : ladder.neighbors.trajectories.front().skeleton());
  if (query.joint_count() != sk->size()) throw StructuralError("query skeleton does not match the trained model");

  Prediction out;
  Stopwatch clock;

  if (v == Variant::nn_dtw || v == Variant::nn_refdtw) {
    const NeighborSet& nb = ladder.neighbors;
    std::vector<double> d(nb.trajectories.size());
    double align_ms = 0.0, classify_ms = 0.0;
    if (v == Variant::nn_dtw) {
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = dtw_distance(query, nb.trajectories[i], cfg.dtw);
      align_ms = clock.lap();
    } else {
      const Trajectory warped = warp_to_reference(query, *ladder.reference, cfg.dtw);
      align_ms = clock.lap();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] = framewise_distance(warped, nb.trajectories[i]);
      classify_ms = clock.lap();
    }
    out.latency.align_ms = align_ms;
    out.latency.classify_ms = classify_ms;
    for (const PatternModel& m : ladder.models) {
      Stopwatch pick;
      const auto [arg, score] = nearest_labeled(d, nb.labels, m.pattern);
      PatternPrediction q;
      q.pattern = m.pattern;
      q.label = nb.labels[arg][index_of(m.pattern)];
      q.score = score;
      const double ms = pick.lap();
      q.latency.align_ms = align_ms;
      q.latency.classify_ms = classify_ms + ms;
      out.latency.classify_ms += ms;
      out.patterns.push_back(q);
    }
    return out;
  }

  std::optional<Segmentation> seg;
  if (uses_segments(v)) {
    seg = segment(query, cfg.segmentation);
    out.latency.segment_ms = clock.lap();
  }

  // Warped query (whole or per segment), computed on first use.
  std::array<std::optional<Trajectory>, 5> warped;
  std::array<double, 5> warp_ms{};
  std::optional<Trajectory> warped_full;
  double full_ms = 0.0;
  // Full extraction per segment, index 5 for the whole trajectory.
  std::array<std::optional<FeatureVector>, 6> full_features;
  std::array<double, 6> full_feature_ms{};
  std::array<std::optional<std::vector<double>>, 5> seg_dist;

  for (const PatternModel& m : ladder.models) {
    PatternPrediction q;
    q.pattern = m.pattern;
    q.segment = m.segment;
    q.latency.segment_ms = out.latency.segment_ms;
    if (v == Variant::segment_nn_dtw) {
      const auto s = static_cast<std::size_t>(*m.segment);
      if (!seg_dist[s]) {
        Stopwatch w;
        const Trajectory part = extract_segment(query, *seg, *m.segment);
        const NeighborSet& nb = ladder.segment_neighbors[s];
        std::vector<double> d(nb.trajectories.size());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = dtw_distance(part, nb.trajectories[i], cfg.dtw);
        seg_dist[s] = std::move(d);
        warp_ms[s] = w.lap();
        out.latency.align_ms += warp_ms[s];
      }
      q.latency.align_ms = warp_ms[s];
      Stopwatch c;
      if (m.constant) {
        q.label = *m.constant;
        q.score = *m.constant == Label::present ? 1.0 : -1.0;
        q.constant = true;
      } else {
        const NeighborSet& nb = ladder.segment_neighbors[s];
        const auto [arg, score] = nearest_labeled(*seg_dist[s], nb.labels, m.pattern);
        q.label = nb.labels[arg][index_of(m.pattern)];
        q.score = score;
      }
      q.latency.classify_ms = c.lap();
      out.latency.classify_ms += q.latency.classify_ms;
      out.patterns.push_back(q);
      continue;
    }

    if (m.constant) {
      q.label = *m.constant;
      q.score = *m.constant == Label::present ? 1.0 : -1.0;
      q.constant = true;
      out.patterns.push_back(q);
      continue;
    }

    const Trajectory* w = nullptr;
    if (m.segment) {
      const auto s = static_cast<std::size_t>(*m.segment);
      if (!warped[s]) {
        Stopwatch t;
        const Trajectory ref_part = extract_segment(*ladder.reference, *ladder.reference_segments, *m.segment);
        warped[s] = warp_to_reference(extract_segment(query, *seg, *m.segment), ref_part, cfg.dtw);
        warp_ms[s] = t.lap();
        out.latency.align_ms += warp_ms[s];
      }
      w = &*warped[s];
      q.latency.align_ms = warp_ms[s];
    } else {
      if (!warped_full) {
        Stopwatch t;
        warped_full = warp_to_reference(query, *ladder.reference, cfg.dtw);
        full_ms = t.lap();
        out.latency.align_ms += full_ms;
      }
      w = &*warped_full;
      q.latency.align_ms = full_ms;
    }

    Stopwatch f;
    Eigen::VectorXd raw;
    if (covers_all(m)) {
      const std::size_t slot = m.segment ? static_cast<std::size_t>(*m.segment) : 5;
      if (!full_features[slot]) {
        full_features[slot] = extract(*w, m.layout.set());
        full_feature_ms[slot] = f.lap();
        out.latency.feature_ms += full_feature_ms[slot];
      }
      raw = full_features[slot]->values;
      q.latency.feature_ms = full_feature_ms[slot];
    } else {
      raw = extract_selected(*w, m.layout, m.mask.indices);
      q.latency.feature_ms = f.lap();
      out.latency.feature_ms += q.latency.feature_ms;
    }
    Stopwatch c;
    q.score = decision_value(m, raw);
    q.label = decide(m, q.score) ? Label::present : Label::absent;
    q.latency.classify_ms = c.lap();
    out.latency.classify_ms += q.latency.classify_ms;
    out.patterns.push_back(q);
  }
  return out;
}

}  // namespace formcheck
