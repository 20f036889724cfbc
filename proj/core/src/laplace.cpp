#include "bdwd/laplace.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <string>

#include "bdwd/error.hpp"
#include "bdwd/parallel.hpp"
#include "bdwd/rng.hpp"
#include "bdwd/stats.hpp"

namespace bdwd {

namespace {

Matrix spd_inverse(const Matrix& A, const char* what) {
  Eigen::LLT<Matrix> llt(A);
  if (llt.info() != Eigen::Success)
    throw NumericError(std::string("Cholesky factorization failed for ") + what);
  Matrix inv = llt.solve(Matrix::Identity(A.rows(), A.cols()));
  return 0.5 * (inv + inv.transpose());
}

double z_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must be in (0,1)");
  return stats::normal_quantile(0.5 * (1.0 + level));
}

Interval percentile_interval(std::vector<double>& values, double estimate, double level) {
  std::sort(values.begin(), values.end());
  return Interval{estimate, stats::quantile_sorted(values, 0.5 * (1.0 - level)),
                  stats::quantile_sorted(values, 0.5 * (1.0 + level))};
}

}  // namespace

std::vector<IntervalRow> to_rows(const IntervalSet& set) {
  std::vector<IntervalRow> rows;
  auto push = [&](std::string name, const Interval& iv) {
    rows.push_back(IntervalRow{std::move(name), iv.estimate, iv.lower, iv.upper, set.method});
  };
  if (set.beta0) push("beta0", *set.beta0);
  for (std::size_t j = 0; j < set.beta.size(); ++j) push("beta_" + std::to_string(j + 1), set.beta[j]);
  if (set.lambda) push("lambda", *set.lambda);
  for (std::size_t i = 0; i < set.scores.size(); ++i) push("u_" + std::to_string(i + 1), set.scores[i]);
  return rows;
}

IntervalSet to_interval_set(const PosteriorSummary& summary, std::string method) {
  auto conv = [](const ParamSummary& s) { return Interval{s.mean, s.lower, s.upper}; };
  IntervalSet set;
  set.method = std::move(method);
  set.level = summary.level;
  for (const auto& s : summary.beta) set.beta.push_back(conv(s));
  set.beta0 = conv(summary.beta0);
  if (summary.lambda) set.lambda = conv(*summary.lambda);
  for (const auto& s : summary.scores) set.scores.push_back(conv(s));
  return set;
}

Matrix laplace_precision(const Dataset& data, const ModelState& mode) {
  const Scores s = scores(mode, data);
  const Eigen::Index d = data.dim();
  Matrix P = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    const double si = s.signed_u[i];
    if (!(si > 0.5)) continue;
    P.selfadjointView<Eigen::Lower>().rankUpdate(data.X.col(i), 1.0 / (2.0 * si * si * si));
  }
  P.diagonal().array() += static_cast<double>(data.size()) * mode.lambda;
  return P.selfadjointView<Eigen::Lower>();
}

LaplaceApprox laplace_from_mode(const Dataset& data, ModelState mode,
                                const LaplaceOptions& options) {
  data.validate_supervised();
  if (!(mode.lambda > 0.0)) throw InvalidArgument("Laplace approximation requires lambda > 0");
  LaplaceApprox out;
  const Scores s = scores(mode, data);
  for (Eigen::Index i = 0; i < data.size(); ++i)
    if (s.signed_u[i] > 0.5) out.active_set.push_back(i);
  out.cov_beta = spd_inverse(laplace_precision(data, mode), "the Laplace precision");

  if (options.joint_intercept) {
    const Eigen::Index d = data.dim();
    Matrix H = Matrix::Zero(d + 1, d + 1);
    H.bottomRightCorner(d, d) = laplace_precision(data, mode);
    for (Eigen::Index i : out.active_set) {
      const double c = 1.0 / (2.0 * std::pow(s.signed_u[i], 3));
      H(0, 0) += c;
      H.col(0).tail(d) += c * data.X.col(i);
    }
    H.row(0).tail(d) = H.col(0).tail(d).transpose();
    out.joint_cov = spd_inverse(H, "the joint intercept Hessian");
  }
  out.mode = std::move(mode);
  return out;
}

LaplaceApprox laplace_fit(const Dataset& data, double lambda, const LaplaceOptions& options) {
  if (!(lambda > 0.0)) throw InvalidArgument("Laplace approximation requires lambda > 0");
  SolverOptions solver;
  solver.fixed_beta0 = options.fixed_beta0;
  return laplace_from_mode(data, solve_mode(data, lambda, solver), options);
}

IntervalSet laplace_intervals(const LaplaceApprox& approx, double level, const Matrix* newX) {
  const double z = z_value(level);
  IntervalSet set;
  set.method = "clt";
  set.level = level;
  const Vector& beta = approx.mode.beta;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    const double half = z * std::sqrt(approx.cov_beta(j, j));
    set.beta.push_back(Interval{beta[j], beta[j] - half, beta[j] + half});
  }
  if (approx.joint_cov) {
    const double half = z * std::sqrt((*approx.joint_cov)(0, 0));
    const double b0 = approx.mode.beta0;
    set.beta0 = Interval{b0, b0 - half, b0 + half};
  }
  if (newX != nullptr) {
    if (newX->rows() != beta.size())
      throw InvalidArgument("score matrix dimension does not match the fitted dimension");
    const Vector u = scores(approx.mode, *newX);
    for (Eigen::Index i = 0; i < newX->cols(); ++i) {
      const auto x = newX->col(i);
      const double half = z * std::sqrt(std::max(0.0, x.dot(approx.cov_beta * x)));
      set.scores.push_back(Interval{u[i], u[i] - half, u[i] + half});
    }
  }
  return set;
}

BootstrapResult bootstrap_intervals(const Dataset& data, double lambda, int B, double level,
                                    std::uint64_t seed, const Matrix* scoreX,
                                    std::optional<double> fixed_beta0) {
  SolverOptions solver;
  solver.fixed_beta0 = fixed_beta0;
  data.validate_supervised();
  if (B < 2) throw InvalidArgument("bootstrap needs B >= 2 resamples");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("interval level must be in (0,1)");
  const Matrix& X = scoreX != nullptr ? *scoreX : data.X;
  if (X.rows() != data.dim()) throw InvalidArgument("score matrix dimension does not match data");

  const auto n = static_cast<std::size_t>(data.size());
  const std::int64_t max_redraws = 100 * static_cast<std::int64_t>(B);
  std::vector<std::int64_t> redraws(static_cast<std::size_t>(B), 0);
  std::atomic<std::int64_t> total_redraws{0};
  BootstrapResult out;
  out.fits.resize(static_cast<std::size_t>(B));

  parallel_for(static_cast<std::size_t>(B), [&](std::size_t b) {
    Rng rng = make_rng(seed, {b});
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<Eigen::Index> idx(n);
    for (;;) {
      for (auto& i : idx) i = static_cast<Eigen::Index>(pick(rng));
      Dataset resample = data.subset(idx);
      if (resample.has_both_classes()) {
        out.fits[b] = solve_mode(resample, lambda, solver);
        return;
      }
      ++redraws[b];
      if (total_redraws.fetch_add(1) + 1 > max_redraws)
        throw InvalidArgument("bootstrap exceeded " + std::to_string(max_redraws) +
                              " single-class redraws; labels are too unbalanced");
    }
  });
  for (auto r : redraws) out.redraws += r;

  const ModelState full = solve_mode(data, lambda, solver);
  const Vector u_full = scores(full, X);
  out.intervals.method = "boot";
  out.intervals.level = level;
  std::vector<double> buf(static_cast<std::size_t>(B));
  for (Eigen::Index j = 0; j < data.dim(); ++j) {
    for (std::size_t b = 0; b < buf.size(); ++b) buf[b] = out.fits[b].beta[j];
    out.intervals.beta.push_back(percentile_interval(buf, full.beta[j], level));
  }
  for (std::size_t b = 0; b < buf.size(); ++b) buf[b] = out.fits[b].beta0;
  out.intervals.beta0 = percentile_interval(buf, full.beta0, level);

  Matrix U(X.cols(), B);
  for (std::size_t b = 0; b < buf.size(); ++b) U.col(static_cast<Eigen::Index>(b)) = scores(out.fits[b], X);
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    for (std::size_t b = 0; b < buf.size(); ++b) buf[b] = U(i, static_cast<Eigen::Index>(b));
    out.intervals.scores.push_back(percentile_interval(buf, u_full[i], level));
  }
  return out;
}

}  // namespace bdwd
