#include "mmsurv/survmetrics.hpp"

#include "mmsurv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mmsurv {

namespace {

struct Columns {
  std::vector<double> times;
  std::vector<std::uint8_t> events;
};

Columns split_columns(std::span<const SurvivalOutcome> outcomes) {
  Columns c;
  c.times.reserve(outcomes.size());
  c.events.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    c.times.push_back(static_cast<double>(o.duration_days));
    c.events.push_back(o.event ? 1 : 0);
  }
  return c;
}

void check_time_range(std::span<const SurvivalOutcome> test, std::span<const double> times) {
  if (times.empty()) throw Error("no evaluation times");
  if (test.empty()) throw Error("empty test set");
  if (!std::is_sorted(times.begin(), times.end())) throw Error("evaluation times must be sorted");
  long long lo = test.front().duration_days, hi = lo;
  for (const auto& o : test) {
    lo = std::min(lo, o.duration_days);
    hi = std::max(hi, o.duration_days);
  }
  if (times.front() < static_cast<double>(lo) || times.back() >= static_cast<double>(hi)) {
    throw Error("evaluation times outside follow-up range");
  }
}

}  // namespace

ConcordanceResult concordance_index(std::span<const SurvivalOutcome> outcomes,
                                    std::span<const double> risks) {
  if (outcomes.size() != risks.size()) throw Error("length mismatch");
  const auto cols = split_columns(outcomes);
  const auto c = kernels::omp::concordance_counts(cols.times, cols.events, risks);
  if (c.comparable == 0) throw NotComputable();
  ConcordanceResult r;
  r.n_concordant = c.concordant;
  r.n_discordant = c.discordant;
  r.n_tied_risk = c.tied_risk;
  r.n_comparable = c.comparable;
  r.c_index = (static_cast<double>(c.concordant) + 0.5 * static_cast<double>(c.tied_risk)) /
              static_cast<double>(c.comparable);
  return r;
}

StepFunction kaplan_meier(std::span<const SurvivalOutcome> outcomes) {
  if (outcomes.empty()) throw Error("empty sample");
  std::vector<SurvivalOutcome> sorted(outcomes.begin(), outcomes.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.duration_days < b.duration_days; });
  StepFunction km;
  double surv = 1.0;
  std::size_t at_risk = sorted.size();
  for (std::size_t p = 0; p < sorted.size();) {
    std::size_t q = p;
    std::size_t deaths = 0;
    while (q < sorted.size() && sorted[q].duration_days == sorted[p].duration_days) {
      if (sorted[q].event) ++deaths;
      ++q;
    }
    if (deaths > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      km.times.push_back(static_cast<double>(sorted[p].duration_days));
      km.values.push_back(surv);
    }
    at_risk -= q - p;
    p = q;
  }
  return km;
}

StepFunction censoring_km(std::span<const SurvivalOutcome> outcomes) {
  std::vector<SurvivalOutcome> flipped(outcomes.begin(), outcomes.end());
  for (auto& o : flipped) o.event = !o.event;
  return kaplan_meier(flipped);
}

AucCurve cumulative_dynamic_auc(std::span<const SurvivalOutcome> train_outcomes,
                                std::span<const SurvivalOutcome> test_outcomes,
                                std::span<const double> risks, std::span<const double> times,
                                MeanAucWeighting weighting) {
  if (test_outcomes.size() != risks.size()) throw Error("length mismatch");
  check_time_range(test_outcomes, times);
  const StepFunction g = censoring_km(train_outcomes);
  const auto cols = split_columns(test_outcomes);

  // Only cases (events) that fall within some evaluation time need a weight.
  std::vector<double> weights(test_outcomes.size(), 0.0);
  for (std::size_t i = 0; i < test_outcomes.size(); ++i) {
    if (!cols.events[i] || cols.times[i] > times.back()) continue;
    const double gi = g.left_limit(cols.times[i]);
    if (!(gi > 0.0)) throw Error("censoring survival is zero at a case time");
    weights[i] = 1.0 / gi;
  }

  const auto terms = kernels::omp::cumulative_dynamic_terms(cols.times, cols.events, weights, risks, times);
  AucCurve out;
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  out.valid.resize(times.size());
  std::vector<std::size_t> valid_idx;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const bool ok = terms[k].n_cases > 0 && terms[k].n_controls > 0;
    out.valid[k] = ok ? 1 : 0;
    out.values[k] = ok ? terms[k].numerator / terms[k].denominator
                       : std::numeric_limits<double>::quiet_NaN();
    if (ok) valid_idx.push_back(k);
  }
  if (valid_idx.empty()) throw NotComputable();
  if (valid_idx.size() == 1) {
    out.mean_auc = out.values[valid_idx.front()];
    return out;
  }

  auto trapezoid = [&] {
    double area = 0.0;
    for (std::size_t m = 1; m < valid_idx.size(); ++m) {
      const auto a = valid_idx[m - 1], b = valid_idx[m];
      area += 0.5 * (out.values[a] + out.values[b]) * (times[b] - times[a]);
    }
    const double span = times[valid_idx.back()] - times[valid_idx.front()];
    if (span > 0.0) return area / span;
    double sum = 0.0;
    for (auto k : valid_idx) sum += out.values[k];
    return sum / static_cast<double>(valid_idx.size());
  };

  if (weighting == MeanAucWeighting::Trapezoid) {
    out.mean_auc = trapezoid();
    return out;
  }
  const StepFunction s = kaplan_meier(test_outcomes);
  double num = 0.0;
  for (std::size_t m = 1; m < valid_idx.size(); ++m) {
    const auto a = valid_idx[m - 1], b = valid_idx[m];
    num += out.values[b] * (s(times[a]) - s(times[b]));
  }
  const double den = s(times[valid_idx.front()]) - s(times[valid_idx.back()]);
  // No test deaths between the first and last valid time: fall back to the
  // time average.
  out.mean_auc = den > 0.0 ? num / den : trapezoid();
  return out;
}

BrierCurve brier_curve(std::span<const SurvivalOutcome> train_outcomes,
                       std::span<const SurvivalOutcome> test_outcomes, const Matrix& surv,
                       std::span<const double> times) {
  if (surv.rows() != static_cast<Eigen::Index>(test_outcomes.size()) ||
      surv.cols() != static_cast<Eigen::Index>(times.size())) {
    throw Error("survival matrix shape mismatch");
  }
  check_time_range(test_outcomes, times);
  const StepFunction g = censoring_km(train_outcomes);
  const auto n = static_cast<double>(test_outcomes.size());

  BrierCurve out;
  out.times.assign(times.begin(), times.end());
  out.values.resize(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double t = times[k];
    const double g_t = g(t);
    double sum = 0.0;
    for (std::size_t i = 0; i < test_outcomes.size(); ++i) {
      const auto ti = static_cast<double>(test_outcomes[i].duration_days);
      const double s = surv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      if (ti <= t && test_outcomes[i].event) {
        const double gi = g.left_limit(ti);
        if (!(gi > 0.0)) throw Error("censoring survival is zero at a case time");
        sum += s * s / gi;
      } else if (ti > t) {
        if (!(g_t > 0.0)) throw Error("censoring survival is zero at an evaluation time");
        sum += (1.0 - s) * (1.0 - s) / g_t;
      }
    }
    out.values[k] = sum / n;
  }
  if (times.size() == 1) {
    out.ibs = out.values.front();
  } else {
    double area = 0.0;
    for (std::size_t k = 1; k < times.size(); ++k) {
      area += 0.5 * (out.values[k - 1] + out.values[k]) * (times[k] - times[k - 1]);
    }
    const double span = times.back() - times.front();
    out.ibs = span > 0.0 ? area / span : out.values.front();
  }
  return out;
}

RiskGroups risk_stratify(std::span<const double> risks, std::span<const SurvivalOutcome> outcomes) {
  if (risks.size() != outcomes.size()) throw Error("length mismatch");
  if (risks.size() < 4) throw Error("risk stratification needs at least 4 subjects");
  std::vector<double> sorted(risks.begin(), risks.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  RiskGroups g;
  g.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<SurvivalOutcome> low, high;
  for (std::size_t i = 0; i < n; ++i) {
    if (risks[i] > g.median) {
      g.high.push_back(i);
      high.push_back(outcomes[i]);
    } else {
      g.low.push_back(i);
      low.push_back(outcomes[i]);
    }
  }
  if (low.empty() || high.empty()) throw Error("degenerate stratification");
  g.low_curve = kaplan_meier(low);
  g.high_curve = kaplan_meier(high);
  return g;
}

CurveBand average_curves(std::span<const StepFunction> curves, const std::vector<double>& grid) {
  if (curves.empty()) throw Error("no curves to average");
  CurveBand band;
  band.mean.assign(grid.size(), 0.0);
  band.std.assign(grid.size(), 0.0);
  const auto m = static_cast<double>(curves.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    double sum = 0.0;
    for (const auto& c : curves) sum += c(grid[k]);
    const double mean = sum / m;
    double ss = 0.0;
    for (const auto& c : curves) {
      const double dev = c(grid[k]) - mean;
      ss += dev * dev;
    }
    band.mean[k] = mean;
    band.std[k] = std::sqrt(ss / m);
  }
  return band;
}

std::vector<double> evaluation_grid(double start, double end, int points) {
  if (points < 1) throw Error("grid needs at least one point");
  if (points == 1) return {start};
  if (!(end > start)) throw Error("grid end must exceed start");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double step = (end - start) / static_cast<double>(points - 1);
  for (int k = 0; k < points; ++k) grid[static_cast<std::size_t>(k)] = start + step * k;
  grid.back() = end;
  return grid;
}

}  // namespace mmsurv
