#pragma once

#include "mmsurv/common.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mmsurv {

struct SurvivalOutcome {
  long long duration_days = 0;
  bool event = false;  // true = death observed

  friend bool operator==(const SurvivalOutcome&, const SurvivalOutcome&) = default;
};

enum class VitalStatus { Alive, Dead, NotReported };

// Categorical schema of the clinical table. Canonical spellings are the
// lower-case GDC vocabulary; cancer types are TCGA project codes without the
// "TCGA-" prefix.
namespace schema {

inline constexpr std::array<std::string_view, 5> kAgeBins = {"[0-20)", "[20-40)", "[40-60)",
                                                            "[60-80)", "80+"};
inline constexpr std::array<std::string_view, 2> kSexes = {"female", "male"};
inline constexpr std::array<std::string_view, 7> kRaces = {
    "white",
    "black or african american",
    "asian",
    "american indian or alaska native",
    "native hawaiian or other pacific islander",
    "unknown",
    "not reported"};
inline constexpr std::array<std::string_view, 4> kEthnicities = {
    "not hispanic or latino", "hispanic or latino", "unknown", "not reported"};
inline constexpr std::array<std::string_view, 32> kProjects = {
    "ACC",  "BLCA", "BRCA", "CESC", "CHOL", "COAD", "DLBC", "ESCA", "GBM",  "HNSC", "KICH",
    "KIRC", "KIRP", "LGG",  "LIHC", "LUAD", "LUSC", "MESO", "OV",   "PAAD", "PCPG", "PRAD",
    "READ", "SARC", "SKCM", "STAD", "TGCT", "THCA", "THYM", "UCEC", "UCS",  "UVM"};

inline constexpr std::size_t kDemographicDim =
    kAgeBins.size() + kSexes.size() + kRaces.size() + kEthnicities.size();  // 17
inline constexpr std::size_t kCancerTypeDim = kProjects.size();              // 32

inline constexpr double kDaysPerYear = 365.25;

// 20-year bins on age in years (days / 365.25); 80 and over share the last bin.
std::size_t age_bin(long long age_days);

// Index lookups throw Error("unknown category: ...") for values outside the
// schema. Empty race/ethnicity map to "not reported".
std::size_t sex_index(std::string_view sex);
std::size_t race_index(std::string_view race);
std::size_t ethnicity_index(std::string_view ethnicity);
std::size_t project_index(std::string_view project);

VitalStatus parse_vital_status(std::string_view text);

}  // namespace schema

struct PatientRecord {
  std::string patient_id;
  std::string project;    // canonical TCGA code
  std::string sex;        // canonical spelling
  std::string race;       // canonical; never empty
  std::string ethnicity;  // canonical; never empty
  long long age_at_diagnosis_days = 0;
  SurvivalOutcome outcome;
};

enum class ModalityKind { Embedding, TabularOneHot };

std::string_view to_string(ModalityKind kind);
ModalityKind parse_modality_kind(std::string_view text);

struct ModalityMatrix {
  std::string name;
  ModalityKind kind = ModalityKind::Embedding;
  std::vector<std::string> patient_ids;
  Matrix values;

  Eigen::Index dim() const { return values.cols(); }
};

inline constexpr std::string_view kDemographicsModality = "demographics";
inline constexpr std::string_view kCancerTypeModality = "cancer_type";

struct RejectedPatient {
  std::string patient_id;
  std::string reason;
  std::string detail;
};

struct CohortDataset {
  std::vector<PatientRecord> patients;  // sorted by patient_id
  std::map<std::string, ModalityMatrix, std::less<>> modalities;
  std::vector<RejectedPatient> rejected;

  std::vector<SurvivalOutcome> outcomes() const;
  const ModalityMatrix& modality(std::string_view name) const;
};

struct Rejection {
  std::string reason;
};

std::variant<SurvivalOutcome, Rejection> compute_survival_outcome(
    long long age_at_diagnosis_days, std::optional<long long> age_at_followup_days,
    std::optional<long long> age_at_death_days, VitalStatus vital_status);

// Elementwise mean. Each column is summed in sorted order so the result does
// not depend on the order of the samples.
std::vector<double> aggregate_samples(std::span<const std::vector<double>> samples);

struct TabularEncoding {
  std::array<double, schema::kDemographicDim> demographics{};
  std::array<double, schema::kCancerTypeDim> cancer_type{};
};

TabularEncoding encode_tabular(const PatientRecord& record);

// One row of clinical.csv with empty cells already mapped to nullopt / "".
struct ClinicalRow {
  std::string patient_id;
  std::string project;
  std::string sex;
  std::string race;
  std::string ethnicity;
  std::optional<long long> age_at_diagnosis_days;
  std::optional<long long> age_at_last_followup_days;
  std::optional<long long> age_at_death_days;
  std::string vital_status;
};

// Samples per patient, as read from one embedding file.
struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<std::vector<double>>, std::less<>> samples;
};

std::vector<ClinicalRow> read_clinical_csv(const std::filesystem::path& path);
EmbeddingTable read_embedding_csv(const std::filesystem::path& path);

// Applies the inclusion filter and builds the aligned dataset. Always adds
// the "demographics" and "cancer_type" one-hot modalities.
CohortDataset assemble_cohort(const std::vector<ClinicalRow>& clinical,
                              const std::map<std::string, EmbeddingTable, std::less<>>& embeddings);

struct CohortManifest {
  std::filesystem::path clinical;
  std::map<std::string, std::filesystem::path, std::less<>> embeddings;
};

// {"clinical": "...", "modalities": {"name": "path", ...}}; relative paths are
// resolved against the manifest's directory.
CohortManifest read_manifest(const std::filesystem::path& manifest_path);

CohortDataset load_cohort(const std::filesystem::path& manifest_path);

}  // namespace mmsurv
