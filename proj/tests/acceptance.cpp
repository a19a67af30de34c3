// Runs every acceptance criterion at its stated tolerance and prints one
// PASS/FAIL line per criterion. Exit status is nonzero if any fails.

#include "mmsurv/coxph.hpp"
#include "mmsurv/pipeline.hpp"
#include "mmsurv/summarizer.hpp"
#include "mmsurv/survmetrics.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace mmsurv;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failures = 0;

void criterion(const char* name, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s  %-28s %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<Eigen::Index>& idx) {
  std::vector<T> out;
  for (auto i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

std::span<const double> span_of(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome c_index_oracle() {
  Rng rng(1001);
  const auto start = std::chrono::steady_clock::now();
  int mismatches = 0, checked = 0;
  while (checked < 100) {
    const auto n = 2 + rng.below(29);
    std::vector<SurvivalOutcome> y(n);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = {1 + static_cast<long long>(rng.below(20)), rng.uniform() < 0.6};
      r[i] = checked % 2 ? rng.normal() : static_cast<double>(rng.below(5));
    }
    const auto p = oracle::harrell_pairs(y, r);
    if (p.comparable == 0) continue;
    ++checked;
    const auto c = concordance_index(y, r);
    if (c.c_index != oracle::harrell_c(y, r) || c.n_comparable != static_cast<std::int64_t>(p.comparable)) ++mismatches;
  }
  const double t = seconds_since(start);
  return {mismatches == 0 && t < 5.0, fmt("%d/100 exact, %.3fs < 5s", 100 - mismatches, t)};
}

Outcome cox_gradient_check() {
  Rng rng(1002);
  const auto start = std::chrono::steady_clock::now();
  double worst_g = 0, worst_h = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(49));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const auto data = testing::random_cox_instance(rng, n, d);
    std::vector<double> beta(static_cast<std::size_t>(d));
    for (auto& b : beta) b = 0.5 * rng.normal();
    const auto pl = partial_loglik(data.x, data.y, beta, 0.1);
    const auto fd = oracle::fd_gradient(
        [&](const std::vector<double>& b) { return oracle::penalized_loglik(data.x, data.y, b, 0.1); }, beta);
    double gnorm = 0, gdiff = 0;
    for (Eigen::Index j = 0; j < d; ++j) {
      gnorm = std::max(gnorm, std::abs(pl.gradient[j]));
      gdiff = std::max(gdiff, std::abs(pl.gradient[j] - fd[static_cast<std::size_t>(j)]));
    }
    worst_g = std::max(worst_g, gdiff / std::max(1.0, gnorm));
    double hnorm = pl.hessian.cwiseAbs().maxCoeff(), hdiff = 0;
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto row = oracle::fd_gradient(
          [&](const std::vector<double>& b) { return partial_loglik(data.x, data.y, b, 0.1).gradient[c]; }, beta);
      for (Eigen::Index r = 0; r < d; ++r) hdiff = std::max(hdiff, std::abs(pl.hessian(c, r) - row[static_cast<std::size_t>(r)]));
    }
    worst_h = std::max(worst_h, hdiff / std::max(1.0, hnorm));
  }
  const double t = seconds_since(start);
  return {worst_g < 1e-6 && worst_h < 1e-4 && t < 30.0,
          fmt("grad rel %.2e < 1e-6, hessian rel %.2e < 1e-4, %.3fs < 30s", worst_g, worst_h, t)};
}

Outcome cox_1d_oracle() {
  Rng rng(1003);
  double worst = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(20));
    auto data = testing::random_cox_instance(rng, n, 1);
    const auto m = cox_fit(data.x, data.y, 0.1);
    const double ref = oracle::golden_section_max(
        [&](double b) { return oracle::penalized_loglik(data.x, data.y, {b}, 0.1); }, -30.0, 30.0);
    worst = std::max(worst, std::abs(m.beta[0] - ref));
  }
  return {worst < 1e-6, fmt("20 instances, max |beta - golden| %.2e < 1e-6", worst)};
}

Outcome km_breslow_fixtures() {
  double worst = 0;
  auto check = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const std::vector<SurvivalOutcome> a = {{1, true}, {2, false}, {3, true}};
  const auto km = kaplan_meier(a);
  check(km(0.5), 1.0);
  check(km(1), 2.0 / 3.0);
  check(km(2.5), 2.0 / 3.0);
  check(km(3), 0.0);
  const std::vector<SurvivalOutcome> none = {{1, false}, {2, false}};
  check(kaplan_meier(none)(5), 1.0);
  const std::vector<SurvivalOutcome> two = {{1, true}, {2, true}};
  check(kaplan_meier(two)(1), 0.5);
  check(kaplan_meier(two)(2), 0.0);
  const std::vector<SurvivalOutcome> cens = {{5, false}, {5, false}};
  check(censoring_km(cens)(4), 1.0);
  check(censoring_km(cens)(5), 0.0);

  Matrix x(2, 1);
  x << 0.7, -0.2;
  const std::vector<double> zero = {0.0};
  const auto h = breslow_baseline(x, two, zero);
  check(h(0.5), 0.0);
  check(h(1), 0.5);
  check(h(2), 1.5);
  check(h(50), 1.5);
  Matrix same(2, 1);
  same << 0.9, 0.9;
  const std::vector<double> b = {1.7};
  const auto hb = breslow_baseline(same, two, b);
  check(hb(2), 1.5 * std::exp(-0.9 * 1.7));
  return {worst <= 1e-12, fmt("max deviation %.2e <= 1e-12", worst)};
}

Outcome ipcw_reductions() {
  Rng rng(1004);
  double worst_auc = 0, worst_ibs = 0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto n = 8 + rng.below(30);
    std::vector<SurvivalOutcome> y(n);
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = {1 + static_cast<long long>(rng.below(40)), true};
      r[i] = static_cast<double>(rng.below(6));
    }
    long long lo = y[0].duration_days, hi = lo;
    for (const auto& o : y) lo = std::min(lo, o.duration_days), hi = std::max(hi, o.duration_days);
    if (hi - lo < 3) continue;
    const auto grid = evaluation_grid(static_cast<double>(lo), static_cast<double>(hi) - 1, 9);
    try {
      const auto a = cumulative_dynamic_auc(y, y, r, grid);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (a.valid[k]) worst_auc = std::max(worst_auc, std::abs(a.values[k] - oracle::plain_auc(y, r, grid[k])));
      }
    } catch (const NotComputable&) {
    }
    Matrix surv(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < grid.size(); ++k)
        surv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            grid[k] < static_cast<double>(y[i].duration_days) ? 1.0 : 0.0;
    worst_ibs = std::max(worst_ibs, brier_curve(y, y, surv, grid).ibs);
  }
  return {worst_auc <= 1e-12 && worst_ibs < 1e-12,
          fmt("AUC vs unweighted %.2e <= 1e-12, oracle IBS %.2e < 1e-12", worst_auc, worst_ibs)};
}

Outcome leakage() {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(300, 1005));
  const auto plan = stratified_kfold(ds, 5, 1005);
  const auto y0 = ds.outcomes();
  Rng rng(1005);
  int changed = 0, trials = 0;
  for (int f = 0; f < 5; ++f) {
    const auto split = fold_indices(ds, plan, f);
    for (int rep = 0; rep < 4; ++rep) {
      // perturb one test row: features of every modality and its outcome
      const auto row = split.test[rng.below(split.test.size())];
      auto pert = ds;
      for (auto& [name, mm] : pert.modalities) {
        for (Eigen::Index j = 0; j < mm.values.cols(); ++j) {
          mm.values(row, j) = mm.kind == ModalityKind::Embedding ? 100 * rng.normal() : 1.0 - mm.values(row, j);
        }
      }
      auto& o = pert.patients[static_cast<std::size_t>(row)].outcome;
      o.duration_days = 1 + static_cast<long long>(rng.below(10000));
      o.event = !o.event;
      const auto y1 = pert.outcomes();
      ++trials;
      Matrix r0(static_cast<Eigen::Index>(split.train.size()), 4), r1 = r0;
      Eigen::Index col = 0;
      bool same = true, visible = false;
      for (const char* name : {"expr", "histo", "text", "demographics"}) {
        const auto a = train_unimodal(ds.modality(name), split, y0, 8);
        const auto b = train_unimodal(pert.modality(name), split, y1, 8);
        same = same && a.model.standardizer == b.model.standardizer && a.model.cox.beta == b.model.cox.beta &&
               a.model.cox.baseline_cumhaz.values == b.model.cox.baseline_cumhaz.values;
        if (a.model.pca) same = same && a.model.pca->components == b.model.pca->components &&
                                a.model.pca->train_means == b.model.pca->train_means;
        visible = visible || a.test_risks != b.test_risks;
        r0.col(col) = a.train_risks;
        r1.col(col) = b.train_risks;
        ++col;
      }
      const Matrix te = Matrix::Zero(1, 4);
      const std::vector<std::string> names = {"a", "b", "c", "d"};
      const auto f0 = train_fusion(names, r0, te, take(y0, split.train));
      const auto f1 = train_fusion(names, r1, te, take(y1, split.train));
      same = same && f0.model.risk_standardizer == f1.model.risk_standardizer && f0.model.cox.beta == f1.model.cox.beta;
      const auto g0 = censoring_km(take(y0, split.train)), g1 = censoring_km(take(y1, split.train));
      same = same && g0.times == g1.times && g0.values == g1.values;
      if (!same || !visible) ++changed;
    }
  }
  return {changed == 0, fmt("%d/%d perturbations moved test risks but left standardizer, PCA, beta, fusion, G unchanged", trials - changed, trials)};
}

Outcome fusion_additivity() {
  const auto start = std::chrono::steady_clock::now();
  double fused_sum = 0, best_uni_sum = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    const auto ds = testing::synthetic_dataset(testing::three_modality_config(600, 2000 + static_cast<std::uint64_t>(s)));
    const auto plan = stratified_kfold(ds, 5, static_cast<std::uint64_t>(s));
    ExperimentConfig cfg;
    cfg.modalities = {{"expr"}, {"histo"}, {"text"}};
    cfg.pca_dims = {8};
    cfg.combos = {{"expr"}, {"histo"}, {"text"}, {"expr", "histo", "text"}};
    const auto result = run_experiment(cfg, ds, plan);
    std::map<std::string, double> mean;
    for (const auto& m : result.metrics) mean[m.combo] += m.c_index / 5.0;
    fused_sum += mean["expr+histo+text"];
    best_uni_sum += std::max({mean["expr"], mean["histo"], mean["text"]});
  }
  const double fused = fused_sum / seeds, best = best_uni_sum / seeds;
  const double t = seconds_since(start);
  return {fused >= best - 0.005 && t < 120.0,
          fmt("fused %.4f >= best unimodal %.4f - 0.005 over 20 seeds, %.1fs < 120s", fused, best, t)};
}

Outcome fusion_of_one() {
  double worst = 0;
  int used = 0, skipped = 0;
  for (int s = 0; s < 10; ++s) {
    const auto ds = testing::synthetic_dataset(testing::three_modality_config(300, 3000 + static_cast<std::uint64_t>(s)));
    const auto plan = stratified_kfold(ds, 5, static_cast<std::uint64_t>(s));
    const auto y = ds.outcomes();
    for (int f = 0; f < 5; ++f) {
      const auto split = fold_indices(ds, plan, f);
      const auto train_y = take(y, split.train), test_y = take(y, split.test);
      for (const char* name : {"expr", "histo", "text", "cancer_type"}) {
        const auto u = train_unimodal(ds.modality(name), split, y, std::string(name) == "cancer_type" ? PcaDim{} : PcaDim{4});
        const auto fz = train_fusion({name}, Matrix(u.train_risks), Matrix(u.test_risks), train_y);
        if (!(fz.model.cox.beta[0] > 0)) {
          ++skipped;
          continue;
        }
        ++used;
        worst = std::max(worst, std::abs(concordance_index(test_y, span_of(fz.test_risks)).c_index -
                                         concordance_index(test_y, span_of(u.test_risks)).c_index));
      }
    }
  }
  return {used > 0 && worst < 1e-9, fmt("%d fits with positive coefficient (%d skipped), max diff %.2e < 1e-9", used, skipped, worst)};
}

ExperimentConfig five_modality() {
  ExperimentConfig cfg;
  cfg.modalities = {{"expr"}, {"histo"}, {"text"},
                    {"demographics", ModalityKind::TabularOneHot},
                    {"cancer_type", ModalityKind::TabularOneHot}};
  cfg.pca_dims = {4, 8, std::nullopt};
  cfg.evaluate_on_train = true;
  return cfg;
}

Outcome combinatorics() {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(300, 4000));
  const auto plan = stratified_kfold(ds, 5, 4);
  const auto cfg = five_modality();
  const auto dir = testing::scratch("acceptance_combos");
  write_experiment_outputs(run_experiment(cfg, ds, plan), dir);
  std::ifstream in(dir / "metrics.csv");
  std::string line;
  std::getline(in, line);
  std::set<std::string> keys;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ls(line);
    std::string fold, combo, dim;
    std::getline(ls, fold, ',');
    std::getline(ls, combo, ',');
    std::getline(ls, dim, ',');
    keys.insert(combo + "|" + dim + "|" + fold);
  }
  const int want = 31 * 5 * 3;
  return {rows == want && static_cast<int>(keys.size()) == want,
          fmt("%d rows, %zu distinct (combo, pca_dim, fold); expected 31 x 5 x 3 = %d", rows, keys.size(), want)};
}

Outcome determinism() {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(300, 5000));
  const auto plan = stratified_kfold(ds, 5, 5);
  auto cfg = five_modality();
  const auto a = testing::scratch("acceptance_det_a"), b = testing::scratch("acceptance_det_b"),
             c = testing::scratch("acceptance_det_c");
  write_experiment_outputs(run_experiment(cfg, ds, plan), a);
  write_experiment_outputs(run_experiment(cfg, ds, plan), b);
  cfg.threads = 1;
  write_experiment_outputs(run_experiment(cfg, ds, plan), c);
  int identical = 0, files = 0;
  for (const char* f : {"metrics.csv", "per_cancer.csv", "hazard_ratios.csv", "km_curves.csv", "train_vs_test.csv"}) {
    ++files;
    const auto ref = slurp(a / f);
    if (!ref.empty() && ref == slurp(b / f) && ref == slurp(c / f)) ++identical;
  }
  return {identical == files, fmt("%d/%d CSVs byte-identical across two runs and a single-thread run", identical, files)};
}

Outcome prompt_fidelity() {
  using namespace mmsurv::summarizer;
  const std::filesystem::path fixtures(MMSURV_FIXTURE_DIR);
  const auto body = serialize_request("test-model", build_prompt(slurp(fixtures / "report.txt")), DecodingParams{});
  const bool golden = body == slurp(fixtures / "summarize_request.json");
  const DecodingParams p;
  const auto j = nlohmann::json::parse(body);
  const bool decoding = p.temperature == 0.0 && p.max_tokens == 1024 && j["temperature"] == 0.0 && j["max_tokens"] == 1024;
  return {golden && decoding, fmt("golden body %s, temperature 0 / max_tokens 1024 %s", golden ? "matches" : "differs",
                                  decoding ? "fixed" : "wrong")};
}

Outcome per_cancer_guards() {
  const std::vector<SurvivalOutcome> y = {{3, true}, {5, false}, {9, true}, {7, false},  // OK
                                          {2, false}, {4, false}, {6, false},            // ZERO: no events
                                          {1, false}, {2, false}, {8, true},             // LATE: death after censoring
                                          {4, true}};                                    // ONE: single patient
  const std::vector<double> r = {0.9, 0.1, 0.3, 0.2, 1, 2, 3, 1, 2, 3, 5};
  const std::vector<std::string> proj = {"OK", "OK", "OK", "OK", "ZERO", "ZERO", "ZERO", "LATE", "LATE", "LATE", "ONE"};
  const auto out = evaluate_per_cancer(y, r, proj);
  const std::vector<SurvivalOutcome> ok(y.begin(), y.begin() + 4);
  const std::vector<double> okr(r.begin(), r.begin() + 4);
  const bool pass = out.at("OK").c_index == concordance_index(ok, okr).c_index && !out.at("ZERO").c_index &&
                    !out.at("LATE").c_index && !out.at("ONE").c_index && out.at("LATE").n_events == 1 &&
                    out.at("ZERO").n == 3;
  return {pass, "zero-event and death-after-censoring subsets flagged not computable"};
}

}  // namespace

int main() {
  criterion("c-index oracle", c_index_oracle);
  criterion("cox gradient check", cox_gradient_check);
  criterion("cox 1-d oracle", cox_1d_oracle);
  criterion("km/breslow fixtures", km_breslow_fixtures);
  criterion("ipcw reductions", ipcw_reductions);
  criterion("leakage", leakage);
  criterion("fusion additivity", fusion_additivity);
  criterion("fusion-of-one equivalence", fusion_of_one);
  criterion("combinatorics", combinatorics);
  criterion("determinism", determinism);
  criterion("prompt fidelity", prompt_fidelity);
  criterion("per-cancer guards", per_cancer_guards);
  std::printf("%d failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
