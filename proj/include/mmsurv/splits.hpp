#pragma once

#include "mmsurv/cohort.hpp"

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mmsurv {

struct StratumKey {
  std::size_t age_bin = 0;
  std::size_t sex = 0;
  std::size_t race = 0;
  std::size_t ethnicity = 0;
  bool event = false;
  std::size_t project = 0;

  friend auto operator<=>(const StratumKey&, const StratumKey&) = default;
};

StratumKey build_stratum_key(const PatientRecord& record);

struct SplitPlan {
  int k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int, std::less<>> assignment;  // patient_id -> fold

  int fold_of(std::string_view patient_id) const;
  std::vector<int> fold_sizes() const;
};

// Greedy stratified assignment over joint strata (age bin, sex, race,
// ethnicity, event, project):
//   * strata are processed from smallest to largest (ties by key order);
//   * members of a stratum (in patient_id order) are shuffled with the seeded
//     mt19937_64 stream shared across strata;
//   * members are dealt cyclically over the folds ordered by how many patients
//     with the stratum's event flag they already hold, then by current size,
//     then by fold index. A stratum of size s puts floor(s/k) or ceil(s/k)
//     patients in every fold, and each event class stays within one patient
//     of even across folds.
SplitPlan stratified_kfold(const CohortDataset& dataset, int k, std::uint64_t seed);

// Row indices (into dataset.patients) of the train and test side of a fold.
struct FoldIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};
FoldIndices fold_indices(const CohortDataset& dataset, const SplitPlan& plan, int fold);

// splits.csv: header "patient_id,fold", rows in patient_id order.
void write_splits_csv(const SplitPlan& plan, const std::filesystem::path& path);
SplitPlan read_splits_csv(const std::filesystem::path& path);

}  // namespace mmsurv
