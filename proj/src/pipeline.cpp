#include "mmsurv/pipeline.hpp"

#include "mmsurv/csv.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <tuple>

namespace mmsurv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix take_rows(const Matrix& x, std::span<const Eigen::Index> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(rows[r]);
  return out;
}

template <typename T>
std::vector<T> take(std::span<const T> values, std::span<const Eigen::Index> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(values[static_cast<std::size_t>(r)]);
  return out;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

std::string num(double x) { return std::isfinite(x) ? csv::format_double(x) : "NA"; }

// Runs body(i) for i in [0, n) across OpenMP threads. The first failing task
// (lowest index) is rethrown with its context prefix.
void parallel_tasks(std::size_t n, int threads, const std::function<void(std::size_t)>& body,
                    const std::function<std::string(std::size_t)>& context) {
  std::vector<std::exception_ptr> errors(n);
  const int nt = threads > 0 ? threads : omp_get_max_threads();
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(nt)
  for (std::int64_t i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      throw Error(context(i) + ": " + e.what());
    }
  }
}

void append_unique(std::vector<std::string>& into, const std::vector<std::string>& from) {
  for (const auto& w : from) {
    if (std::find(into.begin(), into.end(), w) == into.end()) into.push_back(w);
  }
}

}  // namespace

std::string pca_dim_label(const PcaDim& dim) { return dim ? std::to_string(*dim) : "none"; }

PcaDim parse_pca_dim(const nlohmann::json& value) {
  if (value.is_string()) {
    if (value.get<std::string>() == "none") return std::nullopt;
    throw Error("pca dim must be a positive integer or \"none\"");
  }
  if (value.is_null()) return std::nullopt;
  if (!value.is_number_integer() || value.get<long long>() < 1) {
    throw Error("pca dim must be a positive integer or \"none\"");
  }
  return value.get<int>();
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  try {
    if (!j.contains("modalities") || !j["modalities"].is_array() || j["modalities"].empty()) {
      throw Error("\"modalities\" must be a non-empty list");
    }
    for (const auto& m : j["modalities"]) {
      ModalitySpec spec;
      if (m.is_string()) {
        spec.name = m.get<std::string>();
        spec.kind = spec.name == kDemographicsModality || spec.name == kCancerTypeModality
                        ? ModalityKind::TabularOneHot
                        : ModalityKind::Embedding;
      } else {
        spec.name = m.at("name").get<std::string>();
        spec.kind = parse_modality_kind(m.value("kind", std::string("embedding")));
        if (m.contains("pca_dim")) spec.pca_dim_override = parse_pca_dim(m["pca_dim"]);
      }
      c.modalities.push_back(std::move(spec));
    }
    if (j.contains("pca_dims")) {
      c.pca_dims.clear();
      const auto& dims = j["pca_dims"];
      if (!dims.is_array() || dims.empty()) throw Error("\"pca_dims\" must be a non-empty list");
      for (const auto& d : dims) c.pca_dims.push_back(parse_pca_dim(d));
    }
    c.alpha = j.value("alpha", c.alpha);
    c.k = j.value("k", c.k);
    c.seed = j.value("seed", c.seed);
    if (j.contains("eval_interval_days")) {
      const auto& iv = j["eval_interval_days"];
      if (!iv.is_array() || iv.size() != 2) throw Error("\"eval_interval_days\" must be [start, end]");
      c.eval_start_days = iv[0].get<double>();
      c.eval_end_days = iv[1].get<double>();
    }
    c.eval_points = j.value("eval_points", c.eval_points);
    if (j.contains("mean_auc_weighting")) {
      const auto w = j["mean_auc_weighting"].get<std::string>();
      if (w == "km") {
        c.auc_weighting = MeanAucWeighting::KaplanMeier;
      } else if (w == "trapezoid") {
        c.auc_weighting = MeanAucWeighting::Trapezoid;
      } else {
        throw Error("\"mean_auc_weighting\" must be \"km\" or \"trapezoid\"");
      }
    }
    if (j.contains("combos")) {
      const auto& combos = j["combos"];
      if (combos.is_string()) {
        if (combos.get<std::string>() != "all") throw Error("\"combos\" must be \"all\" or a list");
      } else {
        for (const auto& combo : combos) c.combos.push_back(combo.get<std::vector<std::string>>());
      }
    }
    c.evaluate_on_train = j.value("evaluate_on_train", c.evaluate_on_train);
    if (j.contains("fit")) {
      const auto& f = j["fit"];
      c.fit.max_iter = f.value("max_iter", c.fit.max_iter);
      c.fit.tol = f.value("tol", c.fit.tol);
      c.fit.step_halving_max = f.value("step_halving_max", c.fit.step_halving_max);
    }
    if (j.contains("km_combo")) c.km_combo = j["km_combo"].get<std::vector<std::string>>();
    if (j.contains("km_pca_dim")) c.km_pca_dim = parse_pca_dim(j["km_pca_dim"]);
    c.km_grid_step_days = j.value("km_grid_step_days", c.km_grid_step_days);
    c.threads = j.value("threads", c.threads);
    if (j.contains("manifest")) c.manifest = resolve(j["manifest"].get<std::string>());
    if (j.contains("splits")) c.splits = resolve(j["splits"].get<std::string>());
    if (j.contains("out_dir")) c.out_dir = resolve(j["out_dir"].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("experiment config: ") + e.what());
  }
  if (c.k < 2) throw Error("experiment config: k must be at least 2");
  if (c.alpha < 0.0) throw Error("experiment config: alpha must be nonnegative");
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

UnimodalResult train_unimodal(const ModalityMatrix& modality, const FoldIndices& split,
                              std::span<const SurvivalOutcome> outcomes, const PcaDim& pca_dim,
                              double alpha, const FitConfig& fit, const PcaBasis* basis) {
  if (static_cast<std::size_t>(modality.values.rows()) != outcomes.size()) {
    throw Error("modality " + modality.name + ": row count does not match outcomes");
  }
  UnimodalResult r;
  r.model.modality = modality.name;
  r.model.kind = modality.kind;
  try {
    Matrix train_x = take_rows(modality.values, split.train);
    Matrix test_x = take_rows(modality.values, split.test);
    const auto train_outcomes = take<SurvivalOutcome>(outcomes, split.train);

    if (modality.kind == ModalityKind::TabularOneHot) {
      if (pca_dim) {
        r.warnings.push_back("modality " + modality.name +
                             ": one-hot tabular input is not reduced; pca dim " +
                             std::to_string(*pca_dim) + " ignored");
      }
      r.train_features = std::move(train_x);
      r.test_features = std::move(test_x);
    } else {
      r.model.pca_dim = pca_dim;
      auto standardizer = standardize_fit(train_x);
      Matrix train_z = standardize_apply(standardizer, train_x);
      Matrix test_z = standardize_apply(standardizer, test_x);
      r.model.standardizer = std::move(standardizer);
      if (pca_dim) {
        PcaModel pca = basis ? basis->truncate(*pca_dim) : pca_fit(train_z, *pca_dim);
        r.train_features = pca_apply(pca, train_z);
        r.test_features = pca_apply(pca, test_z);
        r.model.pca = std::move(pca);
      } else {
        r.train_features = std::move(train_z);
        r.test_features = std::move(test_z);
      }
    }
    r.model.cox = cox_fit(r.train_features, train_outcomes, alpha, fit);
    r.train_risks = cox_risk(r.model.cox, r.train_features);
    r.test_risks = cox_risk(r.model.cox, r.test_features);
  } catch (const std::exception& e) {
    throw Error("modality " + modality.name + ": " + e.what());
  }
  return r;
}

FusionResult train_fusion(const std::vector<std::string>& modality_names, const Matrix& train_risks,
                          const Matrix& test_risks, std::span<const SurvivalOutcome> train_outcomes,
                          double alpha, const FitConfig& fit) {
  if (modality_names.empty()) throw Error("fusion needs at least one modality");
  if (train_risks.cols() != static_cast<Eigen::Index>(modality_names.size()) ||
      test_risks.cols() != train_risks.cols()) {
    throw Error("fusion input width does not match modality count");
  }
  FusionResult r;
  r.model.modality_names = modality_names;
  r.model.risk_standardizer = standardize_fit(train_risks);
  r.train_features = standardize_apply(r.model.risk_standardizer, train_risks);
  r.test_features = standardize_apply(r.model.risk_standardizer, test_risks);
  r.model.cox = cox_fit(r.train_features, train_outcomes, alpha, fit);
  r.train_risks = cox_risk(r.model.cox, r.train_features);
  r.test_risks = cox_risk(r.model.cox, r.test_features);
  return r;
}

std::vector<std::pair<std::string, double>> extract_hazard_ratios(const FusionModel& fusion) {
  if (fusion.cox.beta.size() != fusion.modality_names.size()) {
    throw Error("fusion model is not fitted");
  }
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t m = 0; m < fusion.modality_names.size(); ++m) {
    out.emplace_back(fusion.modality_names[m], std::exp(fusion.cox.beta[m]));
  }
  return out;
}

std::map<std::string, PerCancerStat> evaluate_per_cancer(std::span<const SurvivalOutcome> outcomes,
                                                         std::span<const double> risks,
                                                         std::span<const std::string> projects) {
  if (outcomes.size() != risks.size() || outcomes.size() != projects.size()) {
    throw Error("length mismatch");
  }
  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < projects.size(); ++i) members[projects[i]].push_back(i);

  std::map<std::string, PerCancerStat> out;
  for (const auto& [project, idx] : members) {
    std::vector<SurvivalOutcome> sub_outcomes;
    std::vector<double> sub_risks;
    PerCancerStat stat;
    for (auto i : idx) {
      sub_outcomes.push_back(outcomes[i]);
      sub_risks.push_back(risks[i]);
      if (outcomes[i].event) ++stat.n_events;
    }
    stat.n = static_cast<int>(idx.size());
    try {
      stat.c_index = concordance_index(sub_outcomes, sub_risks).c_index;
    } catch (const NotComputable&) {
      stat.c_index.reset();
    }
    out.emplace(project, stat);
  }
  return out;
}

std::vector<std::vector<std::string>> modality_power_set(const std::vector<std::string>& names) {
  if (names.size() > 20) throw Error("too many modalities for a power set");
  std::vector<std::uint32_t> masks;
  for (std::uint32_t mask = 1; mask < (1u << names.size()); ++mask) masks.push_back(mask);
  std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t a, std::uint32_t b) {
    return std::popcount(a) < std::popcount(b);
  });
  std::vector<std::vector<std::string>> out;
  for (auto mask : masks) {
    std::vector<std::string> combo;
    for (std::size_t m = 0; m < names.size(); ++m) {
      if (mask & (1u << m)) combo.push_back(names[m]);
    }
    out.push_back(std::move(combo));
  }
  return out;
}

std::string combo_label(const std::vector<std::string>& combo) {
  std::string out;
  for (const auto& name : combo) {
    if (!out.empty()) out += '+';
    out += name;
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const CohortDataset& dataset,
                                 const SplitPlan& plan) {
  if (config.modalities.empty()) throw Error("no modalities configured");
  if (config.pca_dims.empty()) throw Error("no pca dims configured");
  if (plan.k != config.k) {
    throw Error("split plan has " + std::to_string(plan.k) + " folds, config expects " +
                std::to_string(config.k));
  }
  for (const auto& p : dataset.patients) plan.fold_of(p.patient_id);

  std::vector<std::string> names;
  std::vector<const ModalityMatrix*> matrices;
  for (const auto& spec : config.modalities) {
    const auto& mm = dataset.modality(spec.name);
    if (mm.kind != spec.kind) {
      throw Error("modality " + spec.name + " is " + std::string(to_string(mm.kind)) +
                  " in the cohort but configured as " + std::string(to_string(spec.kind)));
    }
    if (std::find(names.begin(), names.end(), spec.name) != names.end()) {
      throw Error("modality listed twice: " + spec.name);
    }
    names.push_back(spec.name);
    matrices.push_back(&mm);
  }

  // Combos as column-index lists into `names`.
  const auto combo_names = config.combos.empty() ? modality_power_set(names) : config.combos;
  std::vector<std::vector<std::size_t>> combos;
  for (const auto& combo : combo_names) {
    if (combo.empty()) throw Error("empty modality combo");
    std::vector<std::size_t> idx;
    for (const auto& name : combo) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw Error("combo references unknown modality: " + name);
      idx.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    combos.push_back(std::move(idx));
  }
  const std::vector<std::size_t> full_combo = [&] {
    std::vector<std::size_t> all(names.size());
    for (std::size_t m = 0; m < all.size(); ++m) all[m] = m;
    return all;
  }();
  std::vector<std::size_t> km_combo = full_combo;
  if (!config.km_combo.empty()) {
    km_combo.clear();
    for (const auto& name : config.km_combo) {
      const auto it = std::find(names.begin(), names.end(), name);
      if (it == names.end()) throw Error("km_combo references unknown modality: " + name);
      km_combo.push_back(static_cast<std::size_t>(it - names.begin()));
    }
  }
  const PcaDim km_dim = config.km_pca_dim.value_or(config.pca_dims.back());

  const auto outcomes = dataset.outcomes();
  std::vector<std::string> projects;
  for (const auto& p : dataset.patients) projects.push_back(p.project);

  const int k = config.k;
  const std::size_t n_dims = config.pca_dims.size();
  const std::size_t n_mod = names.size();
  const std::size_t n_combo = combos.size();

  std::vector<FoldIndices> folds;
  std::vector<std::vector<SurvivalOutcome>> train_outcomes(static_cast<std::size_t>(k));
  std::vector<std::vector<SurvivalOutcome>> test_outcomes(static_cast<std::size_t>(k));
  std::vector<std::vector<std::string>> test_projects(static_cast<std::size_t>(k));
  std::vector<std::vector<double>> eval_grids(static_cast<std::size_t>(k));
  const auto base_grid = evaluation_grid(config.eval_start_days, config.eval_end_days, config.eval_points);
  for (int f = 0; f < k; ++f) {
    const auto ff = static_cast<std::size_t>(f);
    folds.push_back(fold_indices(dataset, plan, f));
    if (folds.back().train.size() < 2 || folds.back().test.empty()) {
      throw Error("fold " + std::to_string(f) + " is too small");
    }
    train_outcomes[ff] = take<SurvivalOutcome>(outcomes, folds.back().train);
    test_outcomes[ff] = take<SurvivalOutcome>(outcomes, folds.back().test);
    test_projects[ff] = take<std::string>(projects, folds.back().test);
    long long test_lo = test_outcomes[ff].front().duration_days, test_hi = test_lo, train_hi = 0;
    for (const auto& o : test_outcomes[ff]) {
      test_lo = std::min(test_lo, o.duration_days);
      test_hi = std::max(test_hi, o.duration_days);
    }
    for (const auto& o : train_outcomes[ff]) train_hi = std::max(train_hi, o.duration_days);
    for (double t : base_grid) {
      if (t >= static_cast<double>(test_lo) && t < static_cast<double>(test_hi) &&
          t < static_cast<double>(train_hi)) {
        eval_grids[ff].push_back(t);
      }
    }
  }

  auto effective_dim = [&](std::size_t m, std::size_t p) -> PcaDim {
    const auto& spec = config.modalities[m];
    if (spec.pca_dim_override) return *spec.pca_dim_override;
    return config.pca_dims[p];
  };

  ExperimentResult result;
  result.k = k;
  result.evaluate_on_train = config.evaluate_on_train;

  // Stage 1: one SVD per (fold, embedding modality), shared by every swept dimension.
  std::vector<std::optional<PcaBasis>> bases(static_cast<std::size_t>(k) * n_mod);
  parallel_tasks(
      bases.size(), config.threads,
      [&](std::size_t t) {
        const std::size_t f = t / n_mod, m = t % n_mod;
        if (matrices[m]->kind != ModalityKind::Embedding) return;
        bool needed = false;
        for (std::size_t p = 0; p < n_dims; ++p) needed = needed || effective_dim(m, p).has_value();
        if (!needed) return;
        const Matrix train_x = take_rows(matrices[m]->values, folds[f].train);
        const auto standardizer = standardize_fit(train_x);
        bases[t] = PcaBasis::fit(standardize_apply(standardizer, train_x));
      },
      [&](std::size_t t) {
        return "fold " + std::to_string(t / n_mod) + ", modality " + names[t % n_mod];
      });

  // Stage 2: unimodal models per (dim, fold, modality). Only what later stages
  // need is kept.
  struct UnimodalSlim {
    Vector train_risks;
    Vector test_risks;
    Matrix test_survival;  // on the fold's evaluation grid
    std::vector<std::string> warnings;
  };
  std::vector<UnimodalSlim> unimodal(n_dims * static_cast<std::size_t>(k) * n_mod);
  parallel_tasks(
      unimodal.size(), config.threads,
      [&](std::size_t t) {
        const std::size_t p = t / (static_cast<std::size_t>(k) * n_mod);
        const std::size_t f = (t / n_mod) % static_cast<std::size_t>(k);
        const std::size_t m = t % n_mod;
        const auto& basis = bases[f * n_mod + m];
        auto r = train_unimodal(*matrices[m], folds[f], outcomes, effective_dim(m, p), config.alpha,
                                config.fit, basis ? &*basis : nullptr);
        UnimodalSlim slim;
        slim.test_survival = cox_survival_matrix(r.model.cox, r.test_features, eval_grids[f]);
        slim.train_risks = std::move(r.train_risks);
        slim.test_risks = std::move(r.test_risks);
        slim.warnings = std::move(r.warnings);
        unimodal[t] = std::move(slim);
      },
      [&](std::size_t t) {
        const std::size_t p = t / (static_cast<std::size_t>(k) * n_mod);
        const std::size_t f = (t / n_mod) % static_cast<std::size_t>(k);
        return "pca_dim " + pca_dim_label(config.pca_dims[p]) + ", fold " + std::to_string(f);
      });
  for (const auto& u : unimodal) append_unique(result.warnings, u.warnings);

  // Stage 3: fusion and evaluation per (dim, fold, combo).
  struct EvalOut {
    MetricRow metric;
    std::vector<PerCancerRow> per_cancer;
    std::vector<double> hazard_ratios;  // only for the full combo
    std::optional<RiskGroups> km;       // only for the KM combo at the KM dim
    std::vector<std::string> warnings;
  };
  std::vector<EvalOut> evals(n_dims * static_cast<std::size_t>(k) * n_combo);
  parallel_tasks(
      evals.size(), config.threads,
      [&](std::size_t t) {
        const std::size_t p = t / (static_cast<std::size_t>(k) * n_combo);
        const std::size_t f = (t / n_combo) % static_cast<std::size_t>(k);
        const std::size_t c = t % n_combo;
        const auto& combo = combos[c];
        auto uni = [&](std::size_t m) -> const UnimodalSlim& {
          return unimodal[(p * static_cast<std::size_t>(k) + f) * n_mod + m];
        };

        EvalOut out;
        Vector train_risks, test_risks;
        Matrix test_survival;
        std::vector<std::string> combo_names_here;
        for (auto m : combo) combo_names_here.push_back(names[m]);
        if (combo.size() == 1) {
          train_risks = uni(combo[0]).train_risks;
          test_risks = uni(combo[0]).test_risks;
          test_survival = uni(combo[0]).test_survival;
        } else {
          Matrix tr(static_cast<Eigen::Index>(folds[f].train.size()), static_cast<Eigen::Index>(combo.size()));
          Matrix te(static_cast<Eigen::Index>(folds[f].test.size()), static_cast<Eigen::Index>(combo.size()));
          for (std::size_t j = 0; j < combo.size(); ++j) {
            tr.col(static_cast<Eigen::Index>(j)) = uni(combo[j]).train_risks;
            te.col(static_cast<Eigen::Index>(j)) = uni(combo[j]).test_risks;
          }
          auto fused = train_fusion(combo_names_here, tr, te, train_outcomes[f], config.alpha, config.fit);
          if (!fused.model.cox.converged) {
            out.warnings.push_back("fusion " + combo_label(combo_names_here) + " (pca_dim " +
                                   pca_dim_label(config.pca_dims[p]) + ", fold " +
                                   std::to_string(f) + ") did not converge");
          }
          test_survival = cox_survival_matrix(fused.model.cox, fused.test_features, eval_grids[f]);
          if (combo == full_combo) {
            for (const auto& [name, hr] : extract_hazard_ratios(fused.model)) out.hazard_ratios.push_back(hr);
          }
          train_risks = std::move(fused.train_risks);
          test_risks = std::move(fused.test_risks);
        }

        const auto& test_out = test_outcomes[f];
        MetricRow& row = out.metric;
        row.fold = static_cast<int>(f);
        row.combo = combo_label(combo_names_here);
        row.pca_dim = pca_dim_label(config.pca_dims[p]);
        try {
          const auto ci = concordance_index(test_out, as_span(test_risks));
          row.c_index = ci.c_index;
          row.n_comparable = ci.n_comparable;
        } catch (const NotComputable&) {
          row.c_index = kNaN;
          row.n_comparable = 0;
        }
        row.mean_auc = kNaN;
        row.ibs = kNaN;
        if (!eval_grids[f].empty()) {
          try {
            row.mean_auc = cumulative_dynamic_auc(train_outcomes[f], test_out, as_span(test_risks),
                                                  eval_grids[f], config.auc_weighting)
                               .mean_auc;
          } catch (const Error&) {
          }
          try {
            row.ibs = brier_curve(train_outcomes[f], test_out, test_survival, eval_grids[f]).ibs;
          } catch (const Error&) {
          }
        }
        row.train_c_index = kNaN;
        if (config.evaluate_on_train) {
          try {
            row.train_c_index = concordance_index(train_outcomes[f], as_span(train_risks)).c_index;
          } catch (const NotComputable&) {
          }
        }

        for (const auto& [project, stat] :
             evaluate_per_cancer(test_out, as_span(test_risks), test_projects[f])) {
          out.per_cancer.push_back({row.combo, row.pca_dim, row.fold, project, stat});
        }

        if (combo == km_combo && config.pca_dims[p] == km_dim) {
          try {
            out.km = risk_stratify(as_span(test_risks), test_out);
          } catch (const Error& e) {
            out.warnings.push_back("risk stratification skipped for fold " + std::to_string(f) +
                                   ": " + e.what());
          }
        }
        evals[t] = std::move(out);
      },
      [&](std::size_t t) {
        const std::size_t p = t / (static_cast<std::size_t>(k) * n_combo);
        const std::size_t f = (t / n_combo) % static_cast<std::size_t>(k);
        std::vector<std::string> cn;
        for (auto m : combos[t % n_combo]) cn.push_back(names[m]);
        return "pca_dim " + pca_dim_label(config.pca_dims[p]) + ", fold " + std::to_string(f) +
               ", combo " + combo_label(cn);
      });

  // Deterministic assembly in task order.
  std::vector<StepFunction> low_curves, high_curves;
  for (std::size_t t = 0; t < evals.size(); ++t) {
    auto& e = evals[t];
    result.metrics.push_back(e.metric);
    for (auto& r : e.per_cancer) result.per_cancer.push_back(std::move(r));
    append_unique(result.warnings, e.warnings);
    if (e.km) {
      low_curves.push_back(e.km->low_curve);
      high_curves.push_back(e.km->high_curve);
    }
  }
  if (full_combo.size() >= 2) {
    const auto full_it = std::find(combos.begin(), combos.end(), full_combo);
    if (full_it != combos.end()) {
      const auto c = static_cast<std::size_t>(full_it - combos.begin());
      for (std::size_t p = 0; p < n_dims; ++p) {
        for (std::size_t m = 0; m < n_mod; ++m) {
          HazardRatioRow hr{pca_dim_label(config.pca_dims[p]), names[m], {}, 0.0};
          double sum = 0.0;
          for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
            const double v = evals[(p * static_cast<std::size_t>(k) + f) * n_combo + c].hazard_ratios[m];
            hr.per_fold.push_back(v);
            sum += v;
          }
          hr.mean = sum / static_cast<double>(k);
          result.hazard_ratios.push_back(std::move(hr));
        }
      }
    }
  }
  if (!low_curves.empty()) {
    long long max_time = 0;
    for (const auto& o : outcomes) max_time = std::max(max_time, o.duration_days);
    std::vector<double> grid;
    for (double t = 0.0; t <= static_cast<double>(max_time); t += config.km_grid_step_days) grid.push_back(t);
    const auto low = average_curves(low_curves, grid);
    const auto high = average_curves(high_curves, grid);
    for (std::size_t g = 0; g < grid.size(); ++g) result.km_curves.push_back({"low", grid[g], low.mean[g], low.std[g]});
    for (std::size_t g = 0; g < grid.size(); ++g) result.km_curves.push_back({"high", grid[g], high.mean[g], high.std[g]});
  }
  return result;
}

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace

void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    const auto path = out_dir / "metrics.csv";
    auto out = open_output(path);
    out << "fold,modality_combo,pca_dim,c_index,mean_auc,ibs,n_comparable\n";
    for (const auto& r : result.metrics) {
      out << r.fold << ',' << csv::escape(r.combo) << ',' << r.pca_dim << ',' << num(r.c_index) << ','
          << num(r.mean_auc) << ',' << num(r.ibs) << ',' << r.n_comparable << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = out_dir / "per_cancer.csv";
    auto out = open_output(path);
    out << "modality_combo,pca_dim,fold,project,c_index,n,n_events\n";
    for (const auto& r : result.per_cancer) {
      out << csv::escape(r.combo) << ',' << r.pca_dim << ',' << r.fold << ',' << r.project << ','
          << (r.stat.c_index ? num(*r.stat.c_index) : "NA") << ',' << r.stat.n << ','
          << r.stat.n_events << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = out_dir / "hazard_ratios.csv";
    auto out = open_output(path);
    out << "pca_dim,modality";
    for (int f = 0; f < result.k; ++f) out << ",fold_" << f;
    out << ",mean\n";
    for (const auto& r : result.hazard_ratios) {
      out << r.pca_dim << ',' << csv::escape(r.modality);
      for (double v : r.per_fold) out << ',' << num(v);
      out << ',' << num(r.mean) << '\n';
    }
    finish(out, path);
  }
  {
    const auto path = out_dir / "km_curves.csv";
    auto out = open_output(path);
    out << "group,time,mean_survival,std_survival\n";
    for (const auto& r : result.km_curves) {
      out << r.group << ',' << num(r.time) << ',' << num(r.mean) << ',' << num(r.std) << '\n';
    }
    finish(out, path);
  }
  if (result.evaluate_on_train) {
    const auto path = out_dir / "train_vs_test.csv";
    auto out = open_output(path);
    out << "fold,modality_combo,pca_dim,train_c_index,test_c_index\n";
    for (const auto& r : result.metrics) {
      out << r.fold << ',' << csv::escape(r.combo) << ',' << r.pca_dim << ',' << num(r.train_c_index)
          << ',' << num(r.c_index) << '\n';
    }
    finish(out, path);
  }
}

namespace {

double parse_metric(const std::string& cell) {
  if (cell == "NA" || cell.empty()) return kNaN;
  return csv::parse_double(cell);
}

}  // namespace

std::vector<SummaryRow> summarize_metrics_csv(const std::filesystem::path& metrics_csv) {
  csv::Reader reader(metrics_csv);
  std::vector<std::string> header, f;
  if (!reader.next(header)) throw Error(metrics_csv.string() + ": empty file");
  auto col = [&](std::string_view name) {
    const auto idx = csv::column_index(header, name);
    if (!idx) throw Error(metrics_csv.string() + ": missing column " + std::string(name));
    return *idx;
  };
  const auto c_combo = col("modality_combo"), c_dim = col("pca_dim"), c_ci = col("c_index"),
             c_auc = col("mean_auc"), c_ibs = col("ibs");

  struct Acc {
    std::vector<double> ci, auc, ibs;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Acc> acc;
  while (reader.next(f)) {
    if (f.size() != header.size()) throw Error(metrics_csv.string() + ": malformed row");
    const auto key = std::make_pair(f[c_combo], f[c_dim]);
    if (!acc.contains(key)) order.push_back(key);
    auto& a = acc[key];
    a.ci.push_back(parse_metric(f[c_ci]));
    a.auc.push_back(parse_metric(f[c_auc]));
    a.ibs.push_back(parse_metric(f[c_ibs]));
  }
  auto mean_of = [](const std::vector<double>& v) {
    double sum = 0.0;
    int n = 0;
    for (double x : v) {
      if (std::isfinite(x)) {
        sum += x;
        ++n;
      }
    }
    return n ? sum / n : kNaN;
  };
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const auto& a = acc[key];
    SummaryRow r{key.first, key.second, static_cast<int>(a.ci.size()), mean_of(a.ci), 0.0,
                 mean_of(a.auc), mean_of(a.ibs)};
    double ss = 0.0;
    int n = 0;
    for (double x : a.ci) {
      if (std::isfinite(x)) {
        ss += (x - r.c_index_mean) * (x - r.c_index_mean);
        ++n;
      }
    }
    r.c_index_std = n ? std::sqrt(ss / n) : kNaN;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "modality_combo,pca_dim,n_folds,c_index_mean,c_index_std,mean_auc_mean,ibs_mean\n";
  for (const auto& r : rows) {
    out << csv::escape(r.combo) << ',' << r.pca_dim << ',' << r.n_folds << ',' << num(r.c_index_mean)
        << ',' << num(r.c_index_std) << ',' << num(r.mean_auc_mean) << ',' << num(r.ibs_mean) << '\n';
  }
  finish(out, path);
}

std::vector<PerCancerSummaryRow> summarize_per_cancer_csv(const std::filesystem::path& per_cancer_csv) {
  csv::Reader reader(per_cancer_csv);
  std::vector<std::string> header, f;
  if (!reader.next(header)) throw Error(per_cancer_csv.string() + ": empty file");
  auto col = [&](std::string_view name) {
    const auto idx = csv::column_index(header, name);
    if (!idx) throw Error(per_cancer_csv.string() + ": missing column " + std::string(name));
    return *idx;
  };
  const auto c_combo = col("modality_combo"), c_dim = col("pca_dim"), c_fold = col("fold"),
             c_proj = col("project"), c_ci = col("c_index"), c_n = col("n"),
             c_events = col("n_events");

  using Key = std::tuple<std::string, std::string, std::string>;
  std::vector<Key> order;
  std::map<Key, PerCancerSummaryRow> acc;
  std::map<Key, double> ci_sum;
  std::set<long long> folds;
  while (reader.next(f)) {
    if (f.size() != header.size()) throw Error(per_cancer_csv.string() + ": malformed row");
    Key key{f[c_combo], f[c_dim], f[c_proj]};
    if (!acc.contains(key)) {
      order.push_back(key);
      acc[key] = {f[c_combo], f[c_dim], f[c_proj], 0, 0, 0.0, 0.0, 0.0};
    }
    folds.insert(csv::parse_int(f[c_fold]));
    auto& r = acc[key];
    ++r.folds_total;
    r.n_mean += static_cast<double>(csv::parse_int(f[c_n]));
    r.n_events_mean += static_cast<double>(csv::parse_int(f[c_events]));
    const double ci = parse_metric(f[c_ci]);
    if (std::isfinite(ci)) {
      ++r.folds_computable;
      ci_sum[key] += ci;
    }
  }
  const auto k = static_cast<int>(folds.size());
  std::vector<PerCancerSummaryRow> rows;
  for (const auto& key : order) {
    auto r = acc[key];
    // Cross-validated only when every fold produced a C-index.
    r.c_index_mean = r.folds_computable == k && r.folds_total == k ? ci_sum[key] / k : kNaN;
    // Folds without this project contribute zero patients.
    r.n_mean /= k;
    r.n_events_mean /= k;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_per_cancer_summary_csv(const std::vector<PerCancerSummaryRow>& rows,
                                  const std::filesystem::path& path) {
  auto out = open_output(path);
  out << "modality_combo,pca_dim,project,folds_computable,folds_total,c_index_mean,n_mean,n_events_mean\n";
  for (const auto& r : rows) {
    out << csv::escape(r.combo) << ',' << r.pca_dim << ',' << r.project << ',' << r.folds_computable
        << ',' << r.folds_total << ',' << num(r.c_index_mean) << ',' << num(r.n_mean) << ','
        << num(r.n_events_mean) << '\n';
  }
  finish(out, path);
}

}  // namespace mmsurv
