#include "formcheck/align.hpp"

#include <algorithm>
#include <tuple>

namespace formcheck {
namespace {

void require_non_empty(const Trajectory& a, const Trajectory& b) {
  // Trajectory guarantees non-empty frames; joint counts must still agree.
  if (a.joint_count() != b.joint_count()) {
    throw StructuralError("dtw: joint counts differ between '" + a.sample_id() + "' and '" + b.sample_id() + "'");
  }
}

}  // namespace

WarpResult dtw(const Trajectory& a, const Trajectory& b, const DtwOptions& opt) {
  require_non_empty(a, b);
  return dtw_with_cost(
      a.size(), b.size(), [&](Index i, Index j) { return frame_distance(a.frame(i), b.frame(j)); }, opt);
}

WarpResult dtw(const Trajectory& a, const Trajectory& b, const FrameDistanceFn& dist, const DtwOptions& opt) {
  require_non_empty(a, b);
  return dtw_with_cost(
      a.size(), b.size(), [&](Index i, Index j) { return dist(a.frame(i), b.frame(j)); }, opt);
}

double dtw_distance(const Trajectory& a, const Trajectory& b, const DtwOptions& opt) {
  require_non_empty(a, b);
  return dtw_distance_with_cost(
      a.size(), b.size(), [&](Index i, Index j) { return frame_distance(a.frame(i), b.frame(j)); }, opt);
}

std::size_t select_reference(std::span<const Trajectory> corpus, std::span<const std::vector<SegmentLabel>> segments) {
  if (corpus.empty()) throw ConfigError("select_reference: empty corpus");
  if (segments.size() != corpus.size()) {
    throw StructuralError("select_reference: one segment label list per trajectory is required");
  }
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& labels = segments[i];
    const bool complete = std::all_of(kSegmentLabels.begin(), kSegmentLabels.end(), [&](SegmentLabel l) {
      return std::find(labels.begin(), labels.end(), l) != labels.end();
    });
    if (!complete) continue;
    if (!best) {
      best = i;
      continue;
    }
    const Trajectory& c = corpus[i];
    const Trajectory& b = corpus[*best];
    if (c.size() > b.size() ||
        (c.size() == b.size() &&
         std::tie(c.subject_id(), c.sample_id()) < std::tie(b.subject_id(), b.sample_id()))) {
      best = i;
    }
  }
  if (!best) throw ConfigError("select_reference: no trajectory contains all movement segments");
  return *best;
}

WarpResult warp_with_path(const Trajectory& t, const Trajectory& reference, const DtwOptions& opt) {
  require_non_empty(t, reference);
  const Index n = t.size();
  const Index m = reference.size();
  std::vector<double> local;
  WarpResult result = dtw_with_cost(
      n, m, [&](Index i, Index j) { return frame_distance(t.frame(i), reference.frame(j)); }, opt, &local);

  std::vector<Index> chosen(static_cast<std::size_t>(m), -1);
  std::vector<double> chosen_cost(static_cast<std::size_t>(m), 0.0);
  for (const auto& [i, j] : result.path.pairs) {
    const double c = local[static_cast<std::size_t>(i * m + j)];
    auto& slot = chosen[static_cast<std::size_t>(j)];
    // Pairs arrive with increasing i, so strict < keeps the smallest index on ties.
    if (slot < 0 || c < chosen_cost[static_cast<std::size_t>(j)]) {
      slot = i;
      chosen_cost[static_cast<std::size_t>(j)] = c;
    }
  }
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(m));
  for (Index r = 0; r < m; ++r) frames.push_back(t.frame(chosen[static_cast<std::size_t>(r)]));
  result.warped = Trajectory(t.skeleton(), std::move(frames), reference.sample_rate(), t.subject_id(), t.sample_id());
  return result;
}

Trajectory warp_to_reference(const Trajectory& t, const Trajectory& reference, const DtwOptions& opt) {
  return std::move(*warp_with_path(t, reference, opt).warped);
}

double framewise_distance(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    throw InvalidInputError("framewise_distance: lengths differ (" + std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()) + ")");
  }
  double sum = 0.0;
  for (Index t = 0; t < a.size(); ++t) sum += frame_distance(a.frame(t), b.frame(t));
  return sum / static_cast<double>(a.size());
}

}  // namespace formcheck
