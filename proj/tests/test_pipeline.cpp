#include "mmsurv/pipeline.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

using namespace mmsurv;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig five_modality_config() {
  ExperimentConfig c;
  c.modalities = {{"expr"}, {"histo"}, {"text"},
                  {"demographics", ModalityKind::TabularOneHot},
                  {"cancer_type", ModalityKind::TabularOneHot}};
  c.pca_dims = {4, 8};
  c.k = 5;
  c.evaluate_on_train = true;
  return c;
}

std::vector<double> as_vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

double c_index(std::span<const SurvivalOutcome> y, const Vector& r) {
  return concordance_index(y, std::span<const double>(r.data(), static_cast<std::size_t>(r.size()))).c_index;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<Eigen::Index>& idx) {
  std::vector<T> out;
  for (auto i : idx) out.push_back(v[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto j = nlohmann::json::parse(R"({
    "modalities": ["expr", {"name": "cancer_type", "kind": "tabular_onehot"}, {"name": "histo", "pca_dim": "none"}],
    "pca_dims": [4, "none", 16],
    "alpha": 0.5, "k": 3, "seed": 9,
    "eval_interval_days": [100, 900], "eval_points": 10,
    "mean_auc_weighting": "trapezoid",
    "combos": [["expr"], ["expr", "histo"]],
    "evaluate_on_train": true,
    "fit": {"max_iter": 50},
    "manifest": "data/manifest.json", "out_dir": "/tmp/out"
  })");
  const auto c = parse_experiment_config(j, "/base");
  REQUIRE(c.modalities.size() == 3);
  CHECK(c.modalities[0].kind == ModalityKind::Embedding);
  CHECK(c.modalities[1].kind == ModalityKind::TabularOneHot);
  CHECK(c.modalities[2].pca_dim_override == std::optional<PcaDim>(PcaDim{}));
  CHECK(c.pca_dims == std::vector<PcaDim>{4, std::nullopt, 16});
  CHECK(c.alpha == 0.5);
  CHECK(c.k == 3);
  CHECK(c.seed == 9);
  CHECK(c.eval_start_days == 100);
  CHECK(c.eval_end_days == 900);
  CHECK(c.auc_weighting == MeanAucWeighting::Trapezoid);
  CHECK(c.combos.size() == 2);
  CHECK(c.evaluate_on_train);
  CHECK(c.fit.max_iter == 50);
  CHECK(c.fit.tol == 1e-9);
  CHECK(c.manifest == std::filesystem::path("/base/data/manifest.json"));
  CHECK(c.out_dir == std::filesystem::path("/tmp/out"));

  const auto d = parse_experiment_config(nlohmann::json::parse(R"({"modalities": ["expr"]})"));
  CHECK(d.pca_dims == std::vector<PcaDim>{4, 8, 16, 32, 64, 128, 256});
  CHECK(d.alpha == 0.1);
  CHECK(d.k == 5);
  CHECK(d.eval_start_days == 365);
  CHECK(d.eval_end_days == 1825);
  CHECK(d.eval_points == 100);

  CHECK_THROWS_AS(parse_experiment_config(nlohmann::json::parse(R"({})")), Error);
  CHECK_THROWS_AS(parse_experiment_config(nlohmann::json::parse(R"({"modalities": ["a"], "k": 1})")), Error);
  CHECK_THROWS_AS(parse_experiment_config(nlohmann::json::parse(R"({"modalities": ["a"], "pca_dims": ["x"]})")),
                  Error);
  CHECK_THROWS_AS(
      parse_experiment_config(nlohmann::json::parse(R"({"modalities": ["a"], "mean_auc_weighting": "x"})")),
      Error);
}

TEST_CASE("power set and labels") {
  const auto ps = modality_power_set({"a", "b", "c"});
  REQUIRE(ps.size() == 7);
  CHECK(ps[0] == std::vector<std::string>{"a"});
  CHECK(ps[3] == std::vector<std::string>{"a", "b"});
  CHECK(ps[6] == std::vector<std::string>{"a", "b", "c"});
  CHECK(modality_power_set({"1", "2", "3", "4", "5"}).size() == 31);
  CHECK(combo_label({"a", "b"}) == "a+b");
  CHECK(pca_dim_label(std::nullopt) == "none");
  CHECK(pca_dim_label(64) == "64");
}

TEST_CASE("unimodal training") {
  // Single strong factor; the true log-hazard alone reaches a C-index near 0.89.
  SyntheticConfig cfg;
  cfg.n_patients = 600;
  cfg.seed = 31;
  cfg.modalities = {{"expr", 16, 0, 3.0, true}};
  cfg.factor_weights = {3.0};
  const auto cohort = make_synthetic_cohort(cfg);
  const auto ds = assemble_cohort(cohort.clinical, cohort.embeddings);
  std::vector<double> true_lh;
  for (const auto& p : ds.patients) true_lh.push_back(cohort.log_hazard.at(p.patient_id));
  CHECK(concordance_index(ds.outcomes(), true_lh).c_index > 0.85);
  const auto plan = stratified_kfold(ds, 5, 1);
  const auto split = fold_indices(ds, plan, 0);
  const auto y = ds.outcomes();
  const auto test_y = take(y, split.test);

  const auto r = train_unimodal(ds.modality("expr"), split, y, 4);
  CHECK(static_cast<std::size_t>(r.train_risks.size()) == split.train.size());
  CHECK(static_cast<std::size_t>(r.test_risks.size()) == split.test.size());
  CHECK(r.model.pca->q() == 4);
  CHECK(r.warnings.empty());
  CHECK(c_index(test_y, r.test_risks) > 0.8);

  const auto t = train_unimodal(ds.modality("cancer_type"), split, y, 4);
  REQUIRE(t.warnings.size() == 1);
  CHECK(t.warnings[0].find("not reduced") != std::string::npos);
  CHECK_FALSE(t.model.pca.has_value());
  CHECK_FALSE(t.model.standardizer.has_value());
  CHECK(t.train_features.cols() == schema::kCancerTypeDim);

  SUBCASE("precomputed basis gives the same model") {
    Matrix train_x(static_cast<Eigen::Index>(split.train.size()), 16);
    for (std::size_t i = 0; i < split.train.size(); ++i) train_x.row(static_cast<Eigen::Index>(i)) = ds.modality("expr").values.row(split.train[i]);
    const auto basis = PcaBasis::fit(standardize_apply(standardize_fit(train_x), train_x));
    const auto b = train_unimodal(ds.modality("expr"), split, y, 4, 0.1, {}, &basis);
    CHECK(b.model.cox.beta == r.model.cox.beta);
    CHECK(b.test_risks == r.test_risks);
  }
  SUBCASE("errors carry modality context") {
    CHECK_THROWS_WITH(train_unimodal(ds.modality("expr"), split, y, 99), doctest::Contains("modality expr"));
  }
}

TEST_CASE("fusion") {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(600, 32));
  const auto plan = stratified_kfold(ds, 5, 2);
  const auto split = fold_indices(ds, plan, 1);
  const auto y = ds.outcomes();
  const auto train_y = take(y, split.train), test_y = take(y, split.test);
  const auto u = train_unimodal(ds.modality("expr"), split, y, 8);

  SUBCASE("fusion of one reproduces the unimodal ranking") {
    const auto f = train_fusion({"expr"}, Matrix(u.train_risks), Matrix(u.test_risks), train_y);
    REQUIRE(f.model.cox.beta[0] > 0);
    CHECK(std::abs(c_index(test_y, f.test_risks) - c_index(test_y, u.test_risks)) < 1e-9);
    CHECK(f.model.risk_standardizer.means.size() == 1);
  }
  SUBCASE("duplicated modality keeps the ranking") {
    Matrix tr(u.train_risks.size(), 2), te(u.test_risks.size(), 2);
    tr << u.train_risks, u.train_risks;
    te << u.test_risks, u.test_risks;
    const auto f = train_fusion({"a", "b"}, tr, te, train_y);
    CHECK(std::abs(c_index(test_y, f.test_risks) - c_index(test_y, u.test_risks)) < 1e-9);
  }
  SUBCASE("constant risk column is zeroed and the fit proceeds") {
    Matrix tr(u.train_risks.size(), 2), te(u.test_risks.size(), 2);
    tr << u.train_risks, Vector::Constant(u.train_risks.size(), 3.0);
    te << u.test_risks, Vector::Constant(u.test_risks.size(), 3.0);
    const auto f = train_fusion({"a", "const"}, tr, te, train_y);
    CHECK(f.model.risk_standardizer.stds[1] == 1.0);
    CHECK(std::abs(f.model.cox.beta[1]) < 1e-8);
  }
  SUBCASE("shape checks") {
    CHECK_THROWS_AS(train_fusion({"a"}, Matrix(3, 2), Matrix(2, 2), train_y), Error);
  }
}

TEST_CASE("noise modality does not hurt fusion") {
  double fused = 0, informative = 0;
  const int seeds = 20;
  for (int s = 0; s < seeds; ++s) {
    auto cfg = testing::three_modality_config(600, 500 + static_cast<std::uint64_t>(s));
    cfg.modalities = {{"signal", 16, 0}, {"noise", 16, -1}};
    cfg.factor_weights = {1.0};
    const auto ds = testing::synthetic_dataset(cfg);
    const auto plan = stratified_kfold(ds, 5, static_cast<std::uint64_t>(s));
    const auto split = fold_indices(ds, plan, 0);
    const auto y = ds.outcomes();
    const auto train_y = take(y, split.train), test_y = take(y, split.test);
    const auto a = train_unimodal(ds.modality("signal"), split, y, 8);
    const auto b = train_unimodal(ds.modality("noise"), split, y, 8);
    Matrix tr(a.train_risks.size(), 2), te(a.test_risks.size(), 2);
    tr << a.train_risks, b.train_risks;
    te << a.test_risks, b.test_risks;
    const auto f = train_fusion({"signal", "noise"}, tr, te, train_y);
    fused += c_index(test_y, f.test_risks) / seeds;
    informative += c_index(test_y, a.test_risks) / seeds;
  }
  MESSAGE("fused " << fused << " informative " << informative);
  CHECK(fused >= informative - 0.02);
}

TEST_CASE("hazard ratios") {
  FusionModel m;
  m.modality_names = {"a", "b"};
  m.cox.beta = {0.0, std::log(2.0)};
  const auto hr = extract_hazard_ratios(m);
  REQUIRE(hr.size() == 2);
  CHECK(hr[0] == std::pair<std::string, double>{"a", 1.0});
  CHECK(hr[1].first == "b");
  CHECK(hr[1].second == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("per-cancer guards") {
  const std::vector<SurvivalOutcome> y = {{5, false}, {7, false}, {3, true}, {9, true},  // A: computable
                                          {2, false}, {4, false},                        // B: no events
                                          {1, false}, {2, false}, {8, true}};            // C: death after all censoring
  const std::vector<double> r = {0.1, 0.3, 0.9, 0.2, 1, 2, 1, 2, 3};
  const std::vector<std::string> proj = {"A", "A", "A", "A", "B", "B", "C", "C", "C"};
  const auto out = evaluate_per_cancer(y, r, proj);
  REQUIRE(out.size() == 3);
  const std::vector<SurvivalOutcome> ya(y.begin(), y.begin() + 4);
  const std::vector<double> ra(r.begin(), r.begin() + 4);
  CHECK(out.at("A").c_index == concordance_index(ya, ra).c_index);
  CHECK(out.at("A").n == 4);
  CHECK(out.at("A").n_events == 2);
  CHECK_FALSE(out.at("B").c_index.has_value());
  CHECK(out.at("B").n_events == 0);
  CHECK_FALSE(out.at("C").c_index.has_value());
  CHECK(out.at("C").n_events == 1);
}

TEST_CASE("full experiment outputs") {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(250, 33));
  const auto plan = stratified_kfold(ds, 5, 3);
  auto cfg = five_modality_config();
  const auto result = run_experiment(cfg, ds, plan);

  SUBCASE("combinatorics and completeness") {
    CHECK(result.metrics.size() == 31 * 5 * 2);
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& m : result.metrics) CHECK(seen.emplace(m.combo, m.pca_dim, m.fold).second);
    CHECK(seen.size() == 310);
  }
  SUBCASE("singleton combo reports the unimodal model") {
    const auto split = fold_indices(ds, plan, 2);
    const auto y = ds.outcomes();
    const auto u = train_unimodal(ds.modality("histo"), split, y, 8);
    const auto test_y = take(y, split.test);
    bool found = false;
    for (const auto& m : result.metrics) {
      if (m.combo == "histo" && m.pca_dim == "8" && m.fold == 2) {
        CHECK(m.c_index == c_index(test_y, u.test_risks));
        found = true;
      }
    }
    CHECK(found);
  }
  SUBCASE("hazard ratio and km tables") {
    CHECK(result.hazard_ratios.size() == 2 * 5);
    for (const auto& h : result.hazard_ratios) {
      CHECK(h.per_fold.size() == 5);
      double s = 0;
      for (double v : h.per_fold) s += v;
      CHECK(h.mean == doctest::Approx(s / 5).epsilon(1e-15));
    }
    REQUIRE_FALSE(result.km_curves.empty());
    CHECK(result.km_curves.front().group == "low");
    CHECK(result.km_curves.back().group == "high");
    CHECK(result.km_curves.front().time == 0.0);
    CHECK(result.km_curves.front().mean == 1.0);
  }
  SUBCASE("tabular pca warning surfaces") {
    bool warned = false;
    for (const auto& w : result.warnings) warned = warned || w.find("cancer_type") != std::string::npos;
    CHECK(warned);
  }
  SUBCASE("files and byte-identical reruns") {
    const auto a = testing::scratch("pipeline_a"), b = testing::scratch("pipeline_b"), c = testing::scratch("pipeline_c");
    write_experiment_outputs(result, a);
    write_experiment_outputs(run_experiment(cfg, ds, plan), b);
    auto serial = cfg;
    serial.threads = 1;
    auto wide = cfg;
    wide.threads = 4;
    write_experiment_outputs(run_experiment(serial, ds, plan), c);
    const auto d = testing::scratch("pipeline_d");
    write_experiment_outputs(run_experiment(wide, ds, plan), d);
    for (const char* f : {"metrics.csv", "per_cancer.csv", "hazard_ratios.csv", "km_curves.csv", "train_vs_test.csv"}) {
      const auto ref = slurp(a / f);
      CHECK(!ref.empty());
      CHECK(ref == slurp(b / f));
      CHECK(ref == slurp(c / f));
      CHECK(ref == slurp(d / f));
      CHECK(ref.find('\r') == std::string::npos);
    }
    const auto metrics = slurp(a / "metrics.csv");
    CHECK(metrics.rfind("fold,modality_combo,pca_dim,c_index,mean_auc,ibs,n_comparable\n", 0) == 0);
    CHECK(slurp(a / "hazard_ratios.csv").rfind("pca_dim,modality,fold_0,fold_1,fold_2,fold_3,fold_4,mean\n", 0) == 0);

    const auto summary = summarize_metrics_csv(a / "metrics.csv");
    CHECK(summary.size() == 62);
    for (const auto& s : summary) CHECK(s.n_folds == 5);
    double mean = 0;
    for (const auto& m : result.metrics)
      if (m.combo == summary[0].combo && m.pca_dim == summary[0].pca_dim) mean += m.c_index / 5;
    CHECK(summary[0].c_index_mean == doctest::Approx(mean).epsilon(1e-14));
    write_summary_csv(summary, a / "summary.csv");
    const auto pcs = summarize_per_cancer_csv(a / "per_cancer.csv");
    CHECK_FALSE(pcs.empty());
    for (const auto& p : pcs) {
      CHECK(p.folds_total <= 5);
      if (p.folds_computable < p.folds_total) CHECK(std::isnan(p.c_index_mean));
    }
  }
}

TEST_CASE("no leakage from test rows") {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(300, 34));
  const auto plan = stratified_kfold(ds, 5, 4);
  const auto split = fold_indices(ds, plan, 0);
  auto perturbed = ds;
  Rng rng(99);
  for (auto i : split.test) {
    for (auto& [name, mm] : perturbed.modalities) {
      if (mm.kind != ModalityKind::Embedding) continue;
      for (Eigen::Index j = 0; j < mm.values.cols(); ++j) mm.values(i, j) += 50 * rng.normal();
    }
    auto& o = perturbed.patients[static_cast<std::size_t>(i)].outcome;
    o.duration_days = 1 + static_cast<long long>(rng.below(9000));
    o.event = !o.event;
  }
  const auto y0 = ds.outcomes(), y1 = perturbed.outcomes();
  CHECK(y0 != y1);

  std::vector<Vector> train_risks0, train_risks1;
  for (const char* name : {"expr", "histo", "text"}) {
    const auto a = train_unimodal(ds.modality(name), split, y0, 8);
    const auto b = train_unimodal(perturbed.modality(name), split, y1, 8);
    CHECK(a.model.standardizer == b.model.standardizer);
    CHECK(a.model.pca->components == b.model.pca->components);
    CHECK(a.model.pca->train_means == b.model.pca->train_means);
    CHECK(a.model.cox.beta == b.model.cox.beta);
    CHECK(a.model.cox.baseline_cumhaz.values == b.model.cox.baseline_cumhaz.values);
    CHECK(a.train_risks == b.train_risks);
    CHECK(a.test_risks != b.test_risks);
    train_risks0.push_back(a.train_risks);
    train_risks1.push_back(b.train_risks);
  }
  const auto g0 = censoring_km(take(y0, split.train)), g1 = censoring_km(take(y1, split.train));
  CHECK(g0.times == g1.times);
  CHECK(g0.values == g1.values);

  Matrix tr0(train_risks0[0].size(), 3), tr1(train_risks1[0].size(), 3);
  tr0 << train_risks0[0], train_risks0[1], train_risks0[2];
  tr1 << train_risks1[0], train_risks1[1], train_risks1[2];
  const Matrix te = Matrix::Zero(static_cast<Eigen::Index>(split.test.size()), 3);
  const auto f0 = train_fusion({"a", "b", "c"}, tr0, te, take(y0, split.train));
  const auto f1 = train_fusion({"a", "b", "c"}, tr1, te, take(y1, split.train));
  CHECK(f0.model.risk_standardizer == f1.model.risk_standardizer);
  CHECK(f0.model.cox.beta == f1.model.cox.beta);

  SUBCASE("end to end: fold 0 hazard ratios are untouched") {
    ExperimentConfig cfg;
    cfg.modalities = {{"expr"}, {"histo"}, {"text"}};
    cfg.pca_dims = {8};
    const auto r0 = run_experiment(cfg, ds, plan), r1 = run_experiment(cfg, perturbed, plan);
    for (std::size_t h = 0; h < r0.hazard_ratios.size(); ++h)
      CHECK(r0.hazard_ratios[h].per_fold[0] == r1.hazard_ratios[h].per_fold[0]);
  }
}

TEST_CASE("run_experiment input checks") {
  const auto ds = testing::synthetic_dataset(testing::three_modality_config(120, 35));
  const auto plan = stratified_kfold(ds, 5, 5);
  ExperimentConfig cfg;
  cfg.modalities = {{"expr"}};
  cfg.pca_dims = {4};
  cfg.k = 4;
  CHECK_THROWS_AS(run_experiment(cfg, ds, plan), Error);
  cfg.k = 5;
  cfg.modalities = {{"demographics"}};
  CHECK_THROWS_AS(run_experiment(cfg, ds, plan), Error);  // kind mismatch
  cfg.modalities = {{"expr"}};
  cfg.combos = {{"nope"}};
  CHECK_THROWS_AS(run_experiment(cfg, ds, plan), Error);
  cfg.combos = {};
  cfg.pca_dims = {64};
  CHECK_THROWS_WITH(run_experiment(cfg, ds, plan), doctest::Contains("pca dim out of range"));
}
