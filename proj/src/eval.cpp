#include "formcheck/eval.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "formcheck/hash.hpp"
#include "formcheck/io.hpp"
#include "formcheck/parallel.hpp"

namespace formcheck {
namespace {

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  if (v.empty()) return out;
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(ss / static_cast<double>(v.size()));
  return out;
}

void hash_label_rows(std::uint64_t& h, const NeighborSet& nb, ErrorPattern p) {
  for (std::size_t i = 0; i < nb.trajectories.size(); ++i) {
    const Label l = nb.labels[i][index_of(p)];
    if (l == Label::unlabeled) continue;
    h = fnv1a(nb.trajectories[i].sample_id(), h);
    h = fnv1a(to_string(l), h);
    const std::uint64_t content = trajectory_hash(nb.trajectories[i]);
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&content), sizeof content), h);
  }
}

}  // namespace

std::size_t FoldPlan::fold_of(const std::string& subject) const {
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (std::find(folds[f].begin(), folds[f].end(), subject) != folds[f].end()) return f;
  }
  throw NotFoundError("subject '" + subject + "' is in no fold");
}

FoldPlan make_folds(std::span<const std::string> subjects, std::span<const LabelRow> labels, int k,
                    std::uint64_t seed) {
  if (subjects.size() != labels.size()) throw StructuralError("make_folds: one label row per sample");
  if (k < 2) throw InvalidInputError("cross-validation needs at least two folds");
  std::vector<std::string> unique(subjects.begin(), subjects.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (static_cast<int>(unique.size()) < k) {
    throw InvalidInputError("cannot split " + std::to_string(unique.size()) + " subjects into " + std::to_string(k) +
                            " folds");
  }

  struct Tally {
    long samples = 0;
    std::array<long, kPatternCount> pos{}, neg{};
  };
  std::map<std::string, Tally> per_subject;
  Tally total;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    Tally& t = per_subject[subjects[i]];
    ++t.samples;
    ++total.samples;
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      if (labels[i][p] == Label::present) {
        ++t.pos[p];
        ++total.pos[p];
      } else if (labels[i][p] == Label::absent) {
        ++t.neg[p];
        ++total.neg[p];
      }
    }
  }

  std::mt19937_64 rng(mix_seed(seed, 0x666f6c6473ULL));
  std::shuffle(unique.begin(), unique.end(), rng);
  std::stable_sort(unique.begin(), unique.end(), [&](const std::string& a, const std::string& b) {
    return per_subject[a].samples > per_subject[b].samples;
  });

  const double kd = static_cast<double>(k);
  const auto cap = static_cast<long>(std::ceil(static_cast<double>(total.samples) / kd));
  const auto deviation = [&](const Tally& t) {
    double d = 0.0;
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      const double ep = static_cast<double>(total.pos[p]) / kd, en = static_cast<double>(total.neg[p]) / kd;
      d += std::abs(static_cast<double>(t.pos[p]) - ep) / std::max(ep, 1.0);
      d += std::abs(static_cast<double>(t.neg[p]) - en) / std::max(en, 1.0);
    }
    return d;
  };

  std::vector<Tally> folds(static_cast<std::size_t>(k));
  FoldPlan plan;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (const std::string& s : unique) {
    const Tally& add = per_subject[s];
    long min_size = std::numeric_limits<long>::max();
    for (const Tally& f : folds) min_size = std::min(min_size, f.samples);
    std::size_t best = 0;
    double best_delta = std::numeric_limits<double>::infinity();
    bool any_fits = false;
    for (const Tally& f : folds) any_fits = any_fits || f.samples + add.samples <= cap;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const bool allowed = any_fits ? folds[f].samples + add.samples <= cap : folds[f].samples == min_size;
      if (!allowed) continue;
      Tally after = folds[f];
      after.samples += add.samples;
      for (std::size_t p = 0; p < kPatternCount; ++p) {
        after.pos[p] += add.pos[p];
        after.neg[p] += add.neg[p];
      }
      const double delta = deviation(after) - deviation(folds[f]);
      if (delta < best_delta - 1e-12 ||
          (std::abs(delta - best_delta) <= 1e-12 && folds[f].samples < folds[best].samples)) {
        best_delta = delta;
        best = f;
      }
    }
    Tally& f = folds[best];
    f.samples += add.samples;
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      f.pos[p] += add.pos[p];
      f.neg[p] += add.neg[p];
    }
    plan.folds[best].push_back(s);
  }
  // Swap equal-size subjects between folds while that lowers the total deviation.
  const auto moved = [&](const Tally& f, const Tally& out, const Tally& in) {
    Tally t = f;
    for (std::size_t p = 0; p < kPatternCount; ++p) {
      t.pos[p] += in.pos[p] - out.pos[p];
      t.neg[p] += in.neg[p] - out.neg[p];
    }
    return t;
  };
  for (int pass = 0; pass < 100; ++pass) {
    bool improved = false;
    for (std::size_t fa = 0; fa < folds.size(); ++fa) {
      for (std::size_t fb = fa + 1; fb < folds.size(); ++fb) {
        for (std::size_t ia = 0; ia < plan.folds[fa].size(); ++ia) {
          for (std::size_t ib = 0; ib < plan.folds[fb].size(); ++ib) {
            const Tally& a = per_subject[plan.folds[fa][ia]];
            const Tally& b = per_subject[plan.folds[fb][ib]];
            if (a.samples != b.samples) continue;
            const Tally na = moved(folds[fa], a, b), nb = moved(folds[fb], b, a);
            const double delta = deviation(na) + deviation(nb) - deviation(folds[fa]) - deviation(folds[fb]);
            if (delta < -1e-9) {
              folds[fa] = na;
              folds[fb] = nb;
              std::swap(plan.folds[fa][ia], plan.folds[fb][ib]);
              improved = true;
            }
          }
        }
      }
    }
    if (!improved) break;
  }
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  return plan;
}

FoldPlan make_folds(std::span<const LabeledSample> corpus, int k, std::uint64_t seed) {
  std::vector<std::string> subjects;
  std::vector<LabelRow> labels;
  for (const LabeledSample& s : corpus) {
    subjects.push_back(s.trajectory.subject_id());
    labels.push_back(s.labels);
  }
  return make_folds(subjects, labels, k, seed);
}

void validate_fold_plan(const FoldPlan& plan, std::span<const LabeledSample> corpus) {
  std::set<std::string> seen;
  for (const auto& f : plan.folds) {
    if (f.empty()) throw InvalidInputError("fold plan has an empty fold");
    for (const std::string& s : f) {
      if (!seen.insert(s).second) throw InvalidInputError("subject '" + s + "' appears in two folds");
    }
  }
  std::set<std::string> present;
  for (const LabeledSample& s : corpus) present.insert(s.trajectory.subject_id());
  if (present != seen) throw InvalidInputError("fold plan subjects do not match the corpus subjects");
}

void ConfusionCounts::add(bool truth, bool predicted) {
  if (truth) {
    ++(predicted ? tp : fn);
  } else {
    ++(predicted ? fp : tn);
  }
}

double accuracy(const ConfusionCounts& c) {
  return c.total() == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1(const ConfusionCounts& c) {
  const long den = 2 * c.tp + c.fp + c.fn;
  return den == 0 ? 0.0 : static_cast<double>(2 * c.tp) / static_cast<double>(den);
}

double roc_auc(std::span<const std::pair<double, bool>> scored) {
  std::vector<std::pair<double, bool>> v(scored.begin(), scored.end());
  for (const auto& [s, _] : v) {
    if (!std::isfinite(s)) throw InvalidInputError("roc_auc: non-finite score");
  }
  std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  long pos = 0, neg = 0;
  for (const auto& e : v) (e.second ? pos : neg) += 1;
  if (pos == 0 || neg == 0) throw DegenerateLabelsError("roc_auc needs both classes");
  // Twice the number of (positive, negative) pairs ranked correctly, ties counting one.
  long double twice = 0;
  long neg_below = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    long p = 0, n = 0;
    while (j < v.size() && v[j].first == v[i].first) {
      (v[j].second ? p : n) += 1;
      ++j;
    }
    twice += static_cast<long double>(p) * static_cast<long double>(2 * neg_below + n);
    neg_below += n;
    i = j;
  }
  return static_cast<double>(twice / (2.0L * static_cast<long double>(pos) * static_cast<long double>(neg)));
}

LatencyStats latency_stats(std::vector<double> ms) {
  LatencyStats s;
  s.count = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  const std::size_t n = ms.size();
  s.median_ms = n % 2 == 1 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  s.p95_ms = ms[std::clamp<std::size_t>(rank, 1, n) - 1];
  s.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(n);
  return s;
}

LatencySummary summarize_latency(std::span<const Latency> per_query) {
  std::vector<double> seg, align, feat, cls, total;
  for (const Latency& l : per_query) {
    seg.push_back(l.segment_ms);
    align.push_back(l.align_ms);
    feat.push_back(l.feature_ms);
    cls.push_back(l.classify_ms);
    total.push_back(l.total());
  }
  return {latency_stats(seg), latency_stats(align), latency_stats(feat), latency_stats(cls), latency_stats(total)};
}

const PatternScore* ScoreReport::find(ErrorPattern p) const {
  for (const PatternScore& s : patterns) {
    if (s.pattern == p) return &s;
  }
  return nullptr;
}

ScoreReport run_crossval(std::span<const LabeledSample> corpus, const FoldTrainer& trainer, const CrossvalConfig& cfg,
                         const std::string& name) {
  ScoreReport report;
  report.variant = name;
  report.seed = cfg.seed;
  report.plan = cfg.plan ? *cfg.plan : make_folds(corpus, cfg.folds, cfg.seed);
  validate_fold_plan(report.plan, corpus);
  report.folds = static_cast<int>(report.plan.size());
  const std::size_t k = report.plan.size();

  std::vector<std::size_t> fold_of(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) fold_of[i] = report.plan.fold_of(corpus[i].trajectory.subject_id());

  struct FoldRun {
    std::map<ErrorPattern, std::uint64_t> hashes;
    std::map<ErrorPattern, std::string> segments;
    std::vector<std::pair<std::size_t, Prediction>> predictions;
    std::vector<std::string> failures;
  };
  std::vector<FoldRun> runs(k);
  parallel_for(k, [&](std::size_t f) {
    std::vector<LabeledSample> training;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fold_of[i] != f) training.push_back(corpus[i]);
    }
    const TrainedFold trained = trainer(training);
    runs[f].hashes = trained.model_hashes;
    runs[f].segments = trained.segments;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fold_of[i] != f) continue;
      try {
        runs[f].predictions.emplace_back(i, trained.predict(corpus[i].trajectory));
      } catch (const SegmentationError& e) {
        runs[f].failures.push_back(corpus[i].trajectory.sample_id() + ": " + e.what());
      }
    }
  }, cfg.workers);

  std::vector<Latency> latencies;
  for (const FoldRun& r : runs) {
    for (const auto& [i, pred] : r.predictions) latencies.push_back(pred.latency);
  }
  report.latency = summarize_latency(latencies);

  for (ErrorPattern p : cfg.patterns) {
    PatternScore ps;
    ps.pattern = p;
    std::vector<double> accs, f1s, aucs;
    for (std::size_t f = 0; f < k; ++f) {
      FoldScore fs;
      const auto h = runs[f].hashes.find(p);
      fs.model_hash = h == runs[f].hashes.end() ? 0 : h->second;
      const auto sg = runs[f].segments.find(p);
      if (sg != runs[f].segments.end()) ps.segments.push_back(sg->second);
      for (const std::string& msg : runs[f].failures) ps.flags.push_back("fold " + std::to_string(f) + ": " + msg);
      std::vector<std::pair<double, bool>> scored;
      for (const auto& [i, pred] : runs[f].predictions) {
        const Label truth = corpus[i].label(p);
        if (truth == Label::unlabeled) continue;
        const PatternPrediction* q = pred.find(p);
        if (!q) continue;
        fs.constant = fs.constant || q->constant;
        fs.counts.add(truth == Label::present, q->label == Label::present);
        scored.emplace_back(q->score, truth == Label::present);
      }
      if (fs.counts.total() > 0) {
        accs.push_back(accuracy(fs.counts));
        f1s.push_back(f1(fs.counts));
        const bool both = fs.counts.tp + fs.counts.fn > 0 && fs.counts.tn + fs.counts.fp > 0;
        if (both) {
          fs.roc_auc = roc_auc(scored);
          aucs.push_back(*fs.roc_auc);
        } else {
          ps.flags.push_back("fold " + std::to_string(f) + ": ROC omitted, single-class test labels");
        }
      }
      if (fs.constant) ps.flags.push_back("fold " + std::to_string(f) + ": constant model, single-class training labels");
      ps.pooled.tp += fs.counts.tp;
      ps.pooled.tn += fs.counts.tn;
      ps.pooled.fp += fs.counts.fp;
      ps.pooled.fn += fs.counts.fn;
      ps.folds.push_back(fs);
    }
    ps.accuracy = mean_sd(accs);
    ps.f1 = mean_sd(f1s);
    if (!aucs.empty()) ps.roc_auc = mean_sd(aucs);
    report.patterns.push_back(std::move(ps));
  }
  return report;
}

std::map<ErrorPattern, std::uint64_t> model_hashes(const TrainedLadder& ladder) {
  std::map<ErrorPattern, std::uint64_t> out;
  const std::uint64_t ref = ladder.reference ? trajectory_hash(*ladder.reference) : 0;
  for (const PatternModel& m : ladder.models) {
    std::uint64_t h = fnv1a(serialize_pattern_model(m));
    h = fnv1a(std::string_view(reinterpret_cast<const char*>(&ref), sizeof ref), h);
    if (ladder.config.variant == Variant::nn_dtw || ladder.config.variant == Variant::nn_refdtw) {
      hash_label_rows(h, ladder.neighbors, m.pattern);
    } else if (ladder.config.variant == Variant::segment_nn_dtw && m.segment) {
      hash_label_rows(h, ladder.segment_neighbors[static_cast<std::size_t>(*m.segment)], m.pattern);
    }
    out[m.pattern] = h;
  }
  return out;
}

ScoreReport run_crossval(std::span<const LabeledSample> corpus, const LadderConfig& ladder, const CrossvalConfig& cfg) {
  LadderConfig lc = ladder;
  lc.patterns = cfg.patterns;
  const FoldTrainer trainer = [lc](std::span<const LabeledSample> training) {
    auto trained = std::make_shared<const TrainedLadder>(train_ladder(training, lc));
    TrainedFold out;
    out.model_hashes = model_hashes(*trained);
    for (const PatternModel& m : trained->models) {
      if (m.segment) out.segments[m.pattern] = std::string(to_string(*m.segment));
    }
    out.predict = [trained](const Trajectory& q) { return predict(*trained, q); };
    return out;
  };
  return run_crossval(corpus, trainer, cfg, std::string(to_string(ladder.variant)));
}

BenchResult bench_latency(const TrainedLadder& ladder, std::span<const Trajectory> queries, const BenchConfig& cfg) {
  if (queries.empty()) throw InvalidInputError("bench_latency: no queries");
  if (cfg.warmup < 0 || cfg.repetitions < 1) throw ConfigError("bench: warmup >= 0 and repetitions >= 1 required");
  BenchResult out;
  out.variant = std::string(to_string(ladder.config.variant));
  for (int w = 0; w < cfg.warmup; ++w) predict(ladder, queries.front());
  std::vector<Latency> lat;
  for (int r = 0; r < cfg.repetitions; ++r) {
    for (const Trajectory& q : queries) lat.push_back(predict(ladder, q).latency);
  }
  out.per_query = summarize_latency(lat);

  const Trajectory* other = ladder.reference ? &*ladder.reference
                            : !ladder.neighbors.trajectories.empty() ? &ladder.neighbors.trajectories.front()
                                                                      : &queries[queries.size() > 1 ? 1 : 0];
  std::vector<double> dtw_ms;
  for (int r = 0; r < cfg.repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    volatile double d = dtw_distance(queries.front(), *other, ladder.config.dtw);
    (void)d;
    dtw_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  out.single_dtw = latency_stats(dtw_ms);
  return out;
}

}  // namespace formcheck
