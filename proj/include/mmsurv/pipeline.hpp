#pragma once

#include "mmsurv/cohort.hpp"
#include "mmsurv/coxph.hpp"
#include "mmsurv/splits.hpp"
#include "mmsurv/survmetrics.hpp"
#include "mmsurv/xform.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mmsurv {

// Target PCA dimension; nullopt means "none" (standardize only).
using PcaDim = std::optional<int>;

std::string pca_dim_label(const PcaDim& dim);
PcaDim parse_pca_dim(const nlohmann::json& value);

struct ModalitySpec {
  std::string name;
  ModalityKind kind = ModalityKind::Embedding;
  // Per-modality dimension that replaces the swept value; off by default.
  std::optional<PcaDim> pca_dim_override;
};

struct ExperimentConfig {
  std::vector<ModalitySpec> modalities;
  std::vector<PcaDim> pca_dims = {4, 8, 16, 32, 64, 128, 256};
  double alpha = kDefaultRidgeAlpha;
  int k = 5;
  std::uint64_t seed = 0;
  double eval_start_days = 365.0;
  double eval_end_days = 1825.0;
  int eval_points = 100;
  MeanAucWeighting auc_weighting = MeanAucWeighting::KaplanMeier;
  // Each combo lists modality names; empty = the full power set.
  std::vector<std::vector<std::string>> combos;
  bool evaluate_on_train = false;
  FitConfig fit;
  // Risk-stratified KM output: which combo and dimension (defaults: all
  // modalities, last swept dimension) and the shared time grid spacing.
  std::vector<std::string> km_combo;
  std::optional<PcaDim> km_pca_dim;
  double km_grid_step_days = 30.0;
  int threads = 0;  // 0 = OpenMP default

  // File locations used by the CLI; resolved against the config's directory.
  std::filesystem::path manifest;
  std::filesystem::path splits;
  std::filesystem::path out_dir = "results";
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct UnimodalModel {
  std::string modality;
  ModalityKind kind = ModalityKind::Embedding;
  PcaDim pca_dim;
  std::optional<StandardizerParams> standardizer;
  std::optional<PcaModel> pca;
  CoxModel cox;
};

struct UnimodalResult {
  UnimodalModel model;
  Matrix train_features;  // transformed inputs the Cox model saw
  Matrix test_features;
  Vector train_risks;
  Vector test_risks;
  std::vector<std::string> warnings;
};

// Embedding modalities: standardize on train, PCA on train (unless pca_dim is
// none), Cox fit. Tabular modalities use the raw one-hot columns; a PCA
// dimension for them is ignored with a warning. `outcomes` covers all rows of
// `modality`. A precomputed basis for the same train rows may be passed to
// avoid refitting the SVD for every dimension.
UnimodalResult train_unimodal(const ModalityMatrix& modality, const FoldIndices& split,
                              std::span<const SurvivalOutcome> outcomes, const PcaDim& pca_dim,
                              double alpha = kDefaultRidgeAlpha, const FitConfig& fit = {},
                              const PcaBasis* basis = nullptr);

struct FusionModel {
  std::vector<std::string> modality_names;
  StandardizerParams risk_standardizer;  // from train risks
  CoxModel cox;
};

struct FusionResult {
  FusionModel model;
  Matrix train_features;  // standardized risks
  Matrix test_features;
  Vector train_risks;
  Vector test_risks;
};

// Late fusion: columns of the risk matrices are per-modality risk scores
// (|train| x m and |test| x m).
FusionResult train_fusion(const std::vector<std::string>& modality_names, const Matrix& train_risks,
                          const Matrix& test_risks, std::span<const SurvivalOutcome> train_outcomes,
                          double alpha = kDefaultRidgeAlpha, const FitConfig& fit = {});

// Hazard ratio per standard deviation of each modality's unimodal risk.
std::vector<std::pair<std::string, double>> extract_hazard_ratios(const FusionModel& fusion);

struct PerCancerStat {
  std::optional<double> c_index;  // nullopt = not computable
  int n = 0;
  int n_events = 0;
};

std::map<std::string, PerCancerStat> evaluate_per_cancer(std::span<const SurvivalOutcome> outcomes,
                                                         std::span<const double> risks,
                                                         std::span<const std::string> projects);

// Non-empty subsets of `names` ordered by size, then by position bitmask.
std::vector<std::vector<std::string>> modality_power_set(const std::vector<std::string>& names);
std::string combo_label(const std::vector<std::string>& combo);

struct MetricRow {
  int fold = 0;
  std::string combo;
  std::string pca_dim;
  double c_index = 0.0;  // NaN when not computable
  double mean_auc = 0.0;
  double ibs = 0.0;
  std::int64_t n_comparable = 0;
  double train_c_index = 0.0;  // filled when evaluate_on_train
};

struct PerCancerRow {
  std::string combo;
  std::string pca_dim;
  int fold = 0;
  std::string project;
  PerCancerStat stat;
};

struct HazardRatioRow {
  std::string pca_dim;
  std::string modality;
  std::vector<double> per_fold;
  double mean = 0.0;
};

struct KmBandRow {
  std::string group;  // low | high
  double time = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct ExperimentResult {
  std::vector<MetricRow> metrics;  // ordered by pca_dim (config order), fold, combo
  std::vector<PerCancerRow> per_cancer;
  std::vector<HazardRatioRow> hazard_ratios;
  std::vector<KmBandRow> km_curves;
  std::vector<std::string> warnings;
  bool evaluate_on_train = false;
  int k = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config, const CohortDataset& dataset,
                                const SplitPlan& plan);

// metrics.csv, per_cancer.csv, hazard_ratios.csv, km_curves.csv and, with
// evaluate_on_train, train_vs_test.csv.
void write_experiment_outputs(const ExperimentResult& result, const std::filesystem::path& out_dir);

struct SummaryRow {
  std::string combo;
  std::string pca_dim;
  int n_folds = 0;
  double c_index_mean = 0.0;
  double c_index_std = 0.0;
  double mean_auc_mean = 0.0;
  double ibs_mean = 0.0;
};

// Cross-fold means of metrics.csv, in first-appearance order.
std::vector<SummaryRow> summarize_metrics_csv(const std::filesystem::path& metrics_csv);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);

struct PerCancerSummaryRow {
  std::string combo;
  std::string pca_dim;
  std::string project;
  int folds_computable = 0;
  int folds_total = 0;
  double c_index_mean = 0.0;  // NaN unless computable in every fold
  double n_mean = 0.0;
  double n_events_mean = 0.0;
};

std::vector<PerCancerSummaryRow> summarize_per_cancer_csv(const std::filesystem::path& per_cancer_csv);
void write_per_cancer_summary_csv(const std::vector<PerCancerSummaryRow>& rows,
                                  const std::filesystem::path& path);

}  // namespace mmsurv
