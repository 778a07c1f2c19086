#include <algorithm>
#include <numeric>

#include "formcheck/learn.hpp"

namespace formcheck {

SelectionResult select_features(const Eigen::MatrixXd& x, const Labels& y, const FeatureLayout& layout,
                                const SelectionConfig& cfg) {
  require_binary(x, y, "select_features");
  const Index d = x.cols();
  if (d != layout.size()) throw StructuralError("select_features: matrix width does not match the layout");
  if (cfg.probes_per_frame < 1) throw ConfigError("select_features: probes_per_frame must be positive");
  const Index probes = static_cast<Index>(cfg.probes_per_frame) * layout.frames();

  Eigen::MatrixXd aug(x.rows(), d + probes);
  aug.leftCols(d) = x;
  std::mt19937_64 rng(mix_seed(cfg.forest.seed, 0x70726f6265ULL));
  std::normal_distribution<double> g;
  for (Index j = d; j < d + probes; ++j) {
    for (Index i = 0; i < x.rows(); ++i) aug(i, j) = g(rng);
  }
  const RandomForest forest = train_forest(aug, y, cfg.forest);
  const Eigen::VectorXd& imp = forest.importances();

  SelectionResult out;
  out.importances = imp.head(d);
  out.mask.threshold = imp.tail(probes).mean();
  for (Index k = 0; k < d; ++k) {
    if (imp[k] > out.mask.threshold) out.mask.indices.push_back(k);
  }
  if (out.mask.indices.empty()) {
    std::vector<Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Index{0});
    const Index keep = std::min(cfg.fallback_count, d);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), [&](Index a, Index b) {
      return imp[a] > imp[b] || (imp[a] == imp[b] && a < b);
    });
    out.mask.indices.assign(order.begin(), order.begin() + keep);
    std::sort(out.mask.indices.begin(), out.mask.indices.end());
    out.mask.fallback = true;
  }
  return out;
}

}  // namespace formcheck
