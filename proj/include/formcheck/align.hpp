#pragma once

// Dynamic time warping over arbitrary local costs, plus the trajectory-level
// operations built on it: 1NN distance, reference selection and warping a
// trajectory onto a reference timeline.

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "formcheck/motion.hpp"
#include "formcheck/segment.hpp"

namespace formcheck {

struct WarpPath {
  /// (i, j) pairs from (0, 0) to (n-1, m-1), each step advancing i, j or both by one.
  std::vector<std::pair<Index, Index>> pairs;
  bool operator==(const WarpPath&) const = default;
};

struct WarpResult {
  /// Mean local cost along the path.
  double distance = 0.0;
  /// Sum of local costs along the path; this is what the path minimizes.
  double total_cost = 0.0;
  WarpPath path;
  std::optional<Trajectory> warped;
};

struct DtwOptions {
  /// Sakoe-Chiba half width in frames around the (rescaled) diagonal. Off by default.
  std::optional<Index> band;
};

using FrameDistanceFn = std::function<double(const Frame&, const Frame&)>;

namespace detail {

inline bool in_band(Index i, Index j, Index n, Index m, const DtwOptions& opt) {
  if (!opt.band) return true;
  const double diag = n > 1 ? static_cast<double>(i) * static_cast<double>(m - 1) / static_cast<double>(n - 1) : 0.0;
  return std::abs(static_cast<double>(j) - diag) <= static_cast<double>(*opt.band);
}

/// Predecessor choice shared by the forward pass and backtracking: minimal
/// accumulated cost, ties prefer diagonal, then (i-1, j), then (i, j-1).
/// Returns 0 diagonal, 1 up, 2 left.
inline int best_predecessor(double diag, double up, double left) {
  int best = 0;
  double v = diag;
  if (up < v) {
    best = 1;
    v = up;
  }
  if (left < v) best = 2;
  return best;
}

}  // namespace detail

/// Full DTW over an n x m local cost `cost(i, j)`; recovers the optimal path.
/// `local` receives the local cost matrix (row-major, n*m) when non-null.
template <typename CostFn>
WarpResult dtw_with_cost(Index n, Index m, CostFn&& cost, const DtwOptions& opt = {},
                         std::vector<double>* local = nullptr) {
  if (n <= 0 || m <= 0) throw InvalidInputError("dtw: empty sequence");
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto idx = [m](Index i, Index j) { return static_cast<std::size_t>(i * m + j); };
  std::vector<double> acc(static_cast<std::size_t>(n * m), inf);
  std::vector<double> own_local;
  std::vector<double>& lc = local ? *local : own_local;
  lc.assign(static_cast<std::size_t>(n * m), inf);

  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      if (!detail::in_band(i, j, n, m, opt)) continue;
      const double c = cost(i, j);
      lc[idx(i, j)] = c;
      if (i == 0 && j == 0) {
        acc[idx(i, j)] = c;
        continue;
      }
      const double diag = (i > 0 && j > 0) ? acc[idx(i - 1, j - 1)] : inf;
      const double up = i > 0 ? acc[idx(i - 1, j)] : inf;
      const double left = j > 0 ? acc[idx(i, j - 1)] : inf;
      acc[idx(i, j)] = c + std::min({diag, up, left});
    }
  }
  if (!std::isfinite(acc[idx(n - 1, m - 1)])) {
    throw InvalidInputError("dtw: no admissible path (band too narrow or non-finite costs)");
  }

  WarpResult result;
  result.total_cost = acc[idx(n - 1, m - 1)];
  auto& pairs = result.path.pairs;
  pairs.reserve(static_cast<std::size_t>(n + m));
  Index i = n - 1;
  Index j = m - 1;
  pairs.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      switch (detail::best_predecessor(acc[idx(i - 1, j - 1)], acc[idx(i - 1, j)], acc[idx(i, j - 1)])) {
        case 0: --i; --j; break;
        case 1: --i; break;
        default: --j; break;
      }
    }
    pairs.emplace_back(i, j);
  }
  std::reverse(pairs.begin(), pairs.end());
  result.distance = result.total_cost / static_cast<double>(pairs.size());
  return result;
}

/// Distance-only DTW in O(m) memory. Tracks the length of the same path
/// `dtw_with_cost` would backtrack, so both report identical distances.
template <typename CostFn>
double dtw_distance_with_cost(Index n, Index m, CostFn&& cost, const DtwOptions& opt = {}) {
  if (n <= 0 || m <= 0) throw InvalidInputError("dtw: empty sequence");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(static_cast<std::size_t>(m), inf), cur(static_cast<std::size_t>(m), inf);
  std::vector<std::int64_t> prev_len(static_cast<std::size_t>(m), 0), cur_len(static_cast<std::size_t>(m), 0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      if (!detail::in_band(i, j, n, m, opt)) {
        cur[uj] = inf;
        cur_len[uj] = 0;
        continue;
      }
      const double c = cost(i, j);
      if (i == 0 && j == 0) {
        cur[uj] = c;
        cur_len[uj] = 1;
        continue;
      }
      if (i == 0) {
        cur[uj] = c + cur[uj - 1];
        cur_len[uj] = cur_len[uj - 1] + 1;
      } else if (j == 0) {
        cur[uj] = c + prev[uj];
        cur_len[uj] = prev_len[uj] + 1;
      } else {
        const double diag = prev[uj - 1];
        const double up = prev[uj];
        const double left = cur[uj - 1];
        switch (detail::best_predecessor(diag, up, left)) {
          case 0: cur[uj] = c + diag; cur_len[uj] = prev_len[uj - 1] + 1; break;
          case 1: cur[uj] = c + up; cur_len[uj] = prev_len[uj] + 1; break;
          default: cur[uj] = c + left; cur_len[uj] = cur_len[uj - 1] + 1; break;
        }
      }
    }
    std::swap(prev, cur);
    std::swap(prev_len, cur_len);
  }
  const double total = prev[static_cast<std::size_t>(m - 1)];
  if (!std::isfinite(total)) throw InvalidInputError("dtw: no admissible path (band too narrow or non-finite costs)");
  return total / static_cast<double>(prev_len[static_cast<std::size_t>(m - 1)]);
}

/// DTW between trajectories with the summed quaternion distance as local cost.
WarpResult dtw(const Trajectory& a, const Trajectory& b, const DtwOptions& opt = {});
WarpResult dtw(const Trajectory& a, const Trajectory& b, const FrameDistanceFn& dist, const DtwOptions& opt = {});
/// Same distance as dtw(a, b).distance without materializing the path.
double dtw_distance(const Trajectory& a, const Trajectory& b, const DtwOptions& opt = {});

/// Index of the longest trajectory whose label set contains every SegmentLabel;
/// ties go to the smallest (subject_id, sample_id). `segments[i]` lists the
/// labels found in `corpus[i]`. Throws ConfigError when no trajectory qualifies.
std::size_t select_reference(std::span<const Trajectory> corpus,
                             std::span<const std::vector<SegmentLabel>> segments);

/// Resample `t` onto the timeline of `reference`: output frame r is the frame of
/// `t` paired with reference frame r on the DTW path; when several are paired,
/// the one with the smallest local cost wins, ties to the smallest index.
/// Metadata of `t` is kept, the sample rate becomes the reference's.
Trajectory warp_to_reference(const Trajectory& t, const Trajectory& reference, const DtwOptions& opt = {});
/// As above, also returning the DTW result (with `warped` set).
WarpResult warp_with_path(const Trajectory& t, const Trajectory& reference, const DtwOptions& opt = {});

/// Mean over frames of the summed per-joint quaternion distance. Throws
/// InvalidInputError when lengths differ.
double framewise_distance(const Trajectory& a, const Trajectory& b);

}  // namespace formcheck
