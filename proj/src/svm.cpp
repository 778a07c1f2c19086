#include <cmath>
#include <functional>
#include <limits>

#include "formcheck/learn.hpp"

namespace formcheck {
namespace {

constexpr double kTau = 1e-12;

Eigen::VectorXd signed_labels(const Labels& y) { return (2 * y.array() - 1).cast<double>().matrix(); }

Eigen::VectorXd box_bounds(const Labels& y, const SvmConfig& cfg) {
  if (!(cfg.c > 0.0) || !std::isfinite(cfg.c)) throw ConfigError("svm: C must be a positive finite number");
  const Index n = y.size();
  Eigen::VectorXd c = Eigen::VectorXd::Constant(n, cfg.c);
  if (cfg.balanced) {
    const double pos = y.cast<double>().sum(), neg = static_cast<double>(n) - pos;
    for (Index i = 0; i < n; ++i) c[i] *= static_cast<double>(n) / (2.0 * (y[i] == 1 ? pos : neg));
  }
  return c;
}

struct DualSolution {
  Eigen::VectorXd alpha;
  double bias = 0.0;
};

// SMO with second-order working set selection on a precomputed Gram matrix.
// Minimizes f(a) = 1/2 a'Qa - e'a subject to 0 <= a_i <= C_i, y'a = 0.
DualSolution solve_dual(const Eigen::MatrixXd& k, const Eigen::VectorXd& s, const Eigen::VectorXd& c,
                        const SvmConfig& cfg, SvmTrace* trace,
                        const std::function<double(const DualSolution&)>& primal) {
  const Index n = s.size();
  const Eigen::MatrixXd q = s.asDiagonal() * k * s.asDiagonal();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = -Eigen::VectorXd::Ones(n);
  const auto objective = [&] { return 0.5 * a.dot(g - Eigen::VectorXd::Ones(n)); };
  const auto up = [&](Index t) { return (s[t] > 0 && a[t] < c[t]) || (s[t] < 0 && a[t] > 0); };
  const auto low = [&](Index t) { return (s[t] > 0 && a[t] > 0) || (s[t] < 0 && a[t] < c[t]); };
  const auto bias = [&] {
    double ub = std::numeric_limits<double>::infinity(), lb = -ub, sum = 0.0;
    int free = 0;
    for (Index t = 0; t < n; ++t) {
      const double yg = s[t] * g[t];
      if (a[t] > 0 && a[t] < c[t]) {
        sum += yg;
        ++free;
      } else if ((a[t] >= c[t] && s[t] < 0) || (a[t] <= 0 && s[t] > 0)) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    }
    const double rho = free > 0 ? sum / free : (ub + lb) / 2.0;
    return -rho;
  };

  long iter = 0;
  bool converged = false;
  if (trace) trace->dual_objective.push_back(objective());
  while (iter < cfg.max_iterations) {
    Index i = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (up(t) && -s[t] * g[t] > gmax) {
        gmax = -s[t] * g[t];
        i = t;
      }
    }
    Index j = -1;
    double gmin = std::numeric_limits<double>::infinity(), best = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      if (!low(t)) continue;
      const double v = -s[t] * g[t];
      gmin = std::min(gmin, v);
      if (i >= 0 && v < gmax) {
        const double diff = gmax - v;
        double quad = k(i, i) + k(t, t) - 2.0 * k(i, t);
        if (quad <= 0) quad = kTau;
        const double gain = -diff * diff / quad;
        if (gain < best) {
          best = gain;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax - gmin < cfg.tolerance) {
      converged = true;
      break;
    }

    const double ai = a[i], aj = a[j];
    if (s[i] != s[j]) {
      double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-g[i] - g[j]) / quad;
      const double diff = a[i] - a[j];
      a[i] += delta;
      a[j] += delta;
      if (diff > 0) {
        if (a[j] < 0) {
          a[j] = 0;
          a[i] = diff;
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = -diff;
      }
      if (diff > c[i] - c[j]) {
        if (a[i] > c[i]) {
          a[i] = c[i];
          a[j] = c[i] - diff;
        }
      } else if (a[j] > c[j]) {
        a[j] = c[j];
        a[i] = c[j] + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (g[i] - g[j]) / quad;
      const double sum = a[i] + a[j];
      a[i] -= delta;
      a[j] += delta;
      if (sum > c[i]) {
        if (a[i] > c[i]) {
          a[i] = c[i];
          a[j] = sum - c[i];
        }
      } else if (a[j] < 0) {
        a[j] = 0;
        a[i] = sum;
      }
      if (sum > c[j]) {
        if (a[j] > c[j]) {
          a[j] = c[j];
          a[i] = sum - c[j];
        }
      } else if (a[i] < 0) {
        a[i] = 0;
        a[j] = sum;
      }
    }
    g += q.col(i) * (a[i] - ai) + q.col(j) * (a[j] - aj);
    ++iter;
    if (trace) {
      trace->dual_objective.push_back(objective());
      if (primal && iter % 25 == 0) trace->primal.emplace_back(iter, primal({a, bias()}));
    }
  }

  DualSolution out{a, bias()};
  if (trace) {
    trace->iterations = iter;
    trace->converged = converged;
    trace->final_dual = objective();
    if (primal) {
      trace->final_primal = primal(out);
      trace->primal.emplace_back(iter, trace->final_primal);
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Kernel k) { return k == Kernel::linear ? "linear" : "rbf"; }

Kernel kernel_from_string(std::string_view name) {
  if (name == "linear") return Kernel::linear;
  if (name == "rbf") return Kernel::rbf;
  throw InvalidInputError("unknown kernel '" + std::string(name) + "'");
}

double LinearModel::decision_value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != weights_.size()) {
    throw StructuralError("linear model expects " + std::to_string(weights_.size()) + " features, got " +
                          std::to_string(x.size()));
  }
  return weights_.dot(x) + bias_;
}

double RbfModel::decision_value(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (x.size() != support_.cols()) throw StructuralError("rbf model: query length does not match");
  double v = bias_;
  for (Index i = 0; i < support_.rows(); ++i) {
    v += coef_[i] * std::exp(-gamma_ * (support_.row(i).transpose() - x).squaredNorm());
  }
  return v;
}

double hinge_objective(const Eigen::VectorXd& w, double b, const Eigen::MatrixXd& x, const Labels& y,
                       const SvmConfig& cfg) {
  const Eigen::VectorXd c = box_bounds(y, cfg);
  const Eigen::VectorXd s = signed_labels(y);
  const Eigen::ArrayXd margin = 1.0 - s.array() * ((x * w).array() + b);
  return 0.5 * w.squaredNorm() + (c.array() * margin.max(0.0)).sum();
}

LinearModel train_linear(const Eigen::MatrixXd& x, const Labels& y, const SvmConfig& cfg, SvmTrace* trace) {
  require_binary(x, y, "train_linear");
  const Eigen::VectorXd s = signed_labels(y);
  const Eigen::VectorXd c = box_bounds(y, cfg);
  const Eigen::MatrixXd k = x * x.transpose();
  const auto weights = [&](const Eigen::VectorXd& a) -> Eigen::VectorXd {
    return x.transpose() * a.cwiseProduct(s);
  };
  const auto primal = [&](const DualSolution& d) { return hinge_objective(weights(d.alpha), d.bias, x, y, cfg); };
  const DualSolution sol = solve_dual(k, s, c, cfg, trace, primal);
  return LinearModel(weights(sol.alpha), sol.bias, cfg.c);
}

RbfModel train_rbf(const Eigen::MatrixXd& x, const Labels& y, const SvmConfig& cfg, SvmTrace* trace) {
  require_binary(x, y, "train_rbf");
  const double gamma = cfg.gamma.value_or(1.0 / static_cast<double>(std::max<Index>(1, x.cols())));
  if (!(gamma > 0.0)) throw ConfigError("rbf gamma must be positive");
  const Eigen::VectorXd s = signed_labels(y);
  const Eigen::VectorXd c = box_bounds(y, cfg);
  const Eigen::VectorXd sq = x.rowwise().squaredNorm();
  Eigen::MatrixXd dist = (-2.0 * x * x.transpose()).colwise() + sq;
  dist.rowwise() += sq.transpose();
  const Eigen::MatrixXd k = (-gamma * dist.array().max(0.0)).exp().matrix();
  const DualSolution sol = solve_dual(k, s, c, cfg, trace, {});

  std::vector<Index> sv;
  for (Index i = 0; i < x.rows(); ++i) {
    if (sol.alpha[i] > 0.0) sv.push_back(i);
  }
  Eigen::MatrixXd support(static_cast<Index>(sv.size()), x.cols());
  Eigen::VectorXd coef(static_cast<Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    support.row(static_cast<Index>(r)) = x.row(sv[r]);
    coef[static_cast<Index>(r)] = sol.alpha[sv[r]] * s[sv[r]];
  }
  return RbfModel(std::move(support), std::move(coef), sol.bias, gamma, cfg.c);
}

}  // namespace formcheck
