#pragma once

#include "mmsurv/cohort.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mmsurv {

// Simulated cohorts with a known hazard, for tests, benchmarks and demos.
// Each patient draws independent standard-normal latent factors z_l; the true
// log-hazard is sum_l weight_l * z_l and event times are exponential with that
// relative hazard. Censoring is uniform on [0, censor_max_days].
struct SyntheticModality {
  std::string name;
  int dim = 16;
  int factor = 0;        // latent factor expressed by this modality; -1 = noise only
  double loading = 3.0;  // factor scale along a random unit direction
  // Replace feature 0 with the exact log-hazard.
  bool first_feature_is_log_hazard = false;
};

struct SyntheticConfig {
  int n_patients = 600;
  std::uint64_t seed = 0;
  std::vector<SyntheticModality> modalities;
  std::vector<double> factor_weights = {0.8, 0.8, 0.8};
  double median_survival_days = 1500.0;
  double censor_max_days = 5000.0;
  int max_samples_per_patient = 1;
  int n_projects = 8;
};

struct SyntheticCohort {
  std::vector<ClinicalRow> clinical;
  std::map<std::string, EmbeddingTable, std::less<>> embeddings;
  std::map<std::string, double> log_hazard;  // by patient_id
};

SyntheticCohort make_synthetic_cohort(const SyntheticConfig& config);

// Writes clinical.csv, one <modality>.csv per embedding and manifest.json.
void write_synthetic_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir);

}  // namespace mmsurv
