#include "mmsurv/cohort.hpp"

#include "mmsurv/csv.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <future>
#include <set>

namespace mmsurv {

namespace {

std::string normalize(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <std::size_t N>
std::size_t lookup(const std::array<std::string_view, N>& table, std::string_view value,
                   std::string_view original) {
  for (std::size_t i = 0; i < N; ++i) {
    if (table[i] == value) return i;
  }
  throw Error("unknown category: '" + std::string(original) + "'");
}

}  // namespace

namespace schema {

std::size_t age_bin(long long age_days) {
  if (age_days < 0) throw Error("negative age");
  const double years = static_cast<double>(age_days) / kDaysPerYear;
  const auto bin = static_cast<std::size_t>(std::floor(years / 20.0));
  return std::min(bin, kAgeBins.size() - 1);
}

std::size_t sex_index(std::string_view sex) {
  auto v = normalize(sex);
  if (v == "f") v = "female";
  if (v == "m") v = "male";
  return lookup(kSexes, v, sex);
}

std::size_t race_index(std::string_view race) {
  auto v = normalize(race);
  if (v.empty()) v = "not reported";
  if (v == "black or aa") v = "black or african american";
  if (v == "aian") v = "american indian or alaska native";
  if (v == "nhpi") v = "native hawaiian or other pacific islander";
  return lookup(kRaces, v, race);
}

std::size_t ethnicity_index(std::string_view ethnicity) {
  auto v = normalize(ethnicity);
  if (v.empty()) v = "not reported";
  if (v == "hispanic/latino") v = "hispanic or latino";
  if (v == "not hispanic/latino") v = "not hispanic or latino";
  return lookup(kEthnicities, v, ethnicity);
}

std::size_t project_index(std::string_view project) {
  std::string v = normalize(project);
  if (v.rfind("tcga-", 0) == 0) v.erase(0, 5);
  for (char& c : v) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return lookup(kProjects, v, project);
}

VitalStatus parse_vital_status(std::string_view text) {
  const auto v = normalize(text);
  if (v == "alive") return VitalStatus::Alive;
  if (v == "dead" || v == "deceased") return VitalStatus::Dead;
  if (v.empty() || v == "not reported" || v == "unknown") return VitalStatus::NotReported;
  throw Error("unknown category: '" + std::string(text) + "'");
}

}  // namespace schema

std::string_view to_string(ModalityKind kind) {
  return kind == ModalityKind::Embedding ? "embedding" : "tabular_onehot";
}

ModalityKind parse_modality_kind(std::string_view text) {
  if (text == "embedding") return ModalityKind::Embedding;
  if (text == "tabular_onehot" || text == "tabular") return ModalityKind::TabularOneHot;
  throw Error("unknown modality kind: '" + std::string(text) + "'");
}

std::vector<SurvivalOutcome> CohortDataset::outcomes() const {
  std::vector<SurvivalOutcome> out;
  out.reserve(patients.size());
  for (const auto& p : patients) out.push_back(p.outcome);
  return out;
}

const ModalityMatrix& CohortDataset::modality(std::string_view name) const {
  const auto it = modalities.find(name);
  if (it == modalities.end()) throw Error("unknown modality: " + std::string(name));
  return it->second;
}

std::variant<SurvivalOutcome, Rejection> compute_survival_outcome(
    long long age_at_diagnosis_days, std::optional<long long> age_at_followup_days,
    std::optional<long long> age_at_death_days, VitalStatus vital_status) {
  SurvivalOutcome outcome;
  if (age_at_death_days) {
    if (vital_status != VitalStatus::Dead) return Rejection{"inconsistent vital status"};
    outcome = {*age_at_death_days - age_at_diagnosis_days, true};
  } else if (age_at_followup_days) {
    outcome = {*age_at_followup_days - age_at_diagnosis_days, false};
  } else {
    return Rejection{"no endpoint"};
  }
  if (outcome.duration_days <= 0) return Rejection{"nonpositive duration"};
  return outcome;
}

std::vector<double> aggregate_samples(std::span<const std::vector<double>> samples) {
  if (samples.empty()) throw Error("no samples");
  const std::size_t dim = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != dim) throw Error("ragged samples");
  }
  std::vector<double> mean(dim);
  if (samples.size() == 1) {
    mean = samples.front();
    return mean;
  }
  std::vector<double> column(samples.size());
  for (std::size_t j = 0; j < dim; ++j) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i][j];
    std::sort(column.begin(), column.end());
    double sum = 0.0;
    for (double v : column) sum += v;
    mean[j] = sum / static_cast<double>(samples.size());
  }
  return mean;
}

TabularEncoding encode_tabular(const PatientRecord& record) {
  TabularEncoding enc;
  std::size_t offset = 0;
  enc.demographics[offset + schema::age_bin(record.age_at_diagnosis_days)] = 1.0;
  offset += schema::kAgeBins.size();
  enc.demographics[offset + schema::sex_index(record.sex)] = 1.0;
  offset += schema::kSexes.size();
  enc.demographics[offset + schema::race_index(record.race)] = 1.0;
  offset += schema::kRaces.size();
  enc.demographics[offset + schema::ethnicity_index(record.ethnicity)] = 1.0;
  enc.cancer_type[schema::project_index(record.project)] = 1.0;
  return enc;
}

std::vector<ClinicalRow> read_clinical_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  std::vector<std::string> header;
  if (!reader.next(header)) throw Error(path.string() + ": empty clinical table");

  auto col = [&](std::string_view name) {
    const auto idx = csv::column_index(header, name);
    if (!idx) throw Error(path.string() + ": missing column " + std::string(name));
    return *idx;
  };
  const std::size_t c_id = col("patient_id"), c_project = col("project"), c_sex = col("sex"),
                    c_race = col("race"), c_eth = col("ethnicity"),
                    c_diag = col("age_at_diagnosis_days"),
                    c_follow = col("age_at_last_followup_days"),
                    c_death = col("age_at_death_days"), c_vital = col("vital_status");

  auto optional_int = [&](const std::string& cell) -> std::optional<long long> {
    if (cell.empty()) return std::nullopt;
    try {
      return csv::parse_int(cell);
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(reader.line_number()) + ": " + e.what());
    }
  };

  std::vector<ClinicalRow> rows;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != header.size()) {
      throw Error(path.string() + ":" + std::to_string(reader.line_number()) +
                  ": expected " + std::to_string(header.size()) + " fields");
    }
    ClinicalRow row;
    row.patient_id = f[c_id];
    row.project = f[c_project];
    row.sex = f[c_sex];
    row.race = f[c_race];
    row.ethnicity = f[c_eth];
    row.age_at_diagnosis_days = optional_int(f[c_diag]);
    row.age_at_last_followup_days = optional_int(f[c_follow]);
    row.age_at_death_days = optional_int(f[c_death]);
    row.vital_status = f[c_vital];
    rows.push_back(std::move(row));
  }
  return rows;
}

EmbeddingTable read_embedding_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  std::vector<std::string> header;
  if (!reader.next(header)) throw Error(path.string() + ": empty embedding file");
  if (header.size() < 3 || header[0] != "patient_id" || header[1] != "sample_id") {
    throw Error(path.string() + ": header must be patient_id,sample_id,e0,...");
  }
  EmbeddingTable table;
  table.dim = header.size() - 2;

  std::vector<std::string> f;
  while (reader.next(f)) {
    const auto where = path.string() + ":" + std::to_string(reader.line_number());
    if (f.size() != table.dim + 2) {
      throw Error(where + ": embedding dim inconsistent (expected " + std::to_string(table.dim) +
                  ", got " + std::to_string(f.size() < 2 ? 0 : f.size() - 2) + ")");
    }
    std::vector<double> values(table.dim);
    for (std::size_t j = 0; j < table.dim; ++j) {
      double v;
      try {
        v = csv::parse_double(f[j + 2]);
      } catch (const Error& e) {
        throw Error(where + ": " + e.what());
      }
      if (!std::isfinite(v)) throw Error(where + ": non-finite embedding value");
      values[j] = v;
    }
    table.samples[f[0]].push_back(std::move(values));
  }
  return table;
}

CohortDataset assemble_cohort(const std::vector<ClinicalRow>& clinical,
                              const std::map<std::string, EmbeddingTable, std::less<>>& embeddings) {
  for (const auto& [name, table] : embeddings) {
    if (name == kDemographicsModality || name == kCancerTypeModality) {
      throw Error("modality name '" + name + "' is reserved for the clinical one-hot encodings");
    }
  }

  std::set<std::string, std::less<>> seen;
  for (const auto& row : clinical) {
    if (!seen.insert(row.patient_id).second) {
      throw Error("duplicate patient_id in clinical table: " + row.patient_id);
    }
  }

  CohortDataset ds;
  std::vector<const ClinicalRow*> order;
  order.reserve(clinical.size());
  for (const auto& row : clinical) order.push_back(&row);
  std::sort(order.begin(), order.end(),
            [](const ClinicalRow* a, const ClinicalRow* b) { return a->patient_id < b->patient_id; });

  for (const ClinicalRow* row : order) {
    auto reject = [&](std::string reason, std::string detail = {}) {
      ds.rejected.push_back({row->patient_id, std::move(reason), std::move(detail)});
    };
    if (!row->age_at_diagnosis_days) {
      reject("missing diagnosis age");
      continue;
    }
    if (row->sex.empty()) {
      reject("missing sex");
      continue;
    }
    PatientRecord rec;
    rec.patient_id = row->patient_id;
    rec.age_at_diagnosis_days = *row->age_at_diagnosis_days;
    try {
      rec.sex = schema::kSexes[schema::sex_index(row->sex)];
      rec.race = schema::kRaces[schema::race_index(row->race)];
      rec.ethnicity = schema::kEthnicities[schema::ethnicity_index(row->ethnicity)];
      rec.project = schema::kProjects[schema::project_index(row->project)];
      if (rec.age_at_diagnosis_days < 0) throw Error("negative age");
      const auto outcome =
          compute_survival_outcome(rec.age_at_diagnosis_days, row->age_at_last_followup_days,
                                   row->age_at_death_days,
                                   schema::parse_vital_status(row->vital_status));
      if (const auto* r = std::get_if<Rejection>(&outcome)) {
        reject(r->reason);
        continue;
      }
      rec.outcome = std::get<SurvivalOutcome>(outcome);
    } catch (const Error& e) {
      reject("invalid record", e.what());
      continue;
    }

    std::string missing;
    for (const auto& [name, table] : embeddings) {
      if (!table.samples.contains(rec.patient_id)) {
        missing = name;
        break;
      }
    }
    if (!missing.empty()) {
      reject("missing modality", missing);
      continue;
    }
    ds.patients.push_back(std::move(rec));
  }

  for (const auto& [name, table] : embeddings) {
    for (const auto& [id, samples] : table.samples) {
      if (!seen.contains(id)) {
        ds.rejected.push_back({id, "missing clinical", name});
        seen.insert(id);
      }
    }
  }

  if (ds.patients.empty()) throw Error("empty cohort");

  const auto n = static_cast<Eigen::Index>(ds.patients.size());
  std::vector<std::string> ids;
  ids.reserve(ds.patients.size());
  for (const auto& p : ds.patients) ids.push_back(p.patient_id);

  for (const auto& [name, table] : embeddings) {
    ModalityMatrix m{name, ModalityKind::Embedding, ids,
                     Matrix(n, static_cast<Eigen::Index>(table.dim))};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& samples = table.samples.find(ids[static_cast<std::size_t>(i)])->second;
      const auto mean = aggregate_samples(samples);
      for (Eigen::Index j = 0; j < m.values.cols(); ++j) m.values(i, j) = mean[static_cast<std::size_t>(j)];
    }
    ds.modalities.emplace(name, std::move(m));
  }

  ModalityMatrix demo{std::string(kDemographicsModality), ModalityKind::TabularOneHot, ids,
                      Matrix(n, static_cast<Eigen::Index>(schema::kDemographicDim))};
  ModalityMatrix canc{std::string(kCancerTypeModality), ModalityKind::TabularOneHot, ids,
                      Matrix(n, static_cast<Eigen::Index>(schema::kCancerTypeDim))};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto enc = encode_tabular(ds.patients[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < enc.demographics.size(); ++j) demo.values(i, static_cast<Eigen::Index>(j)) = enc.demographics[j];
    for (std::size_t j = 0; j < enc.cancer_type.size(); ++j) canc.values(i, static_cast<Eigen::Index>(j)) = enc.cancer_type[j];
  }
  ds.modalities.emplace(demo.name, std::move(demo));
  ds.modalities.emplace(canc.name, std::move(canc));
  return ds;
}

CohortManifest read_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error("cannot open manifest: " + manifest_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(manifest_path.string() + ": " + e.what());
  }
  const auto base = manifest_path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
  };
  if (!j.contains("clinical") || !j["clinical"].is_string()) {
    throw Error(manifest_path.string() + ": missing \"clinical\" path");
  }
  if (!j.contains("modalities") || !j["modalities"].is_object() || j["modalities"].empty()) {
    throw Error(manifest_path.string() + ": \"modalities\" must list at least one embedding file");
  }
  CohortManifest m;
  m.clinical = resolve(j["clinical"].get<std::string>());
  for (const auto& [name, path] : j["modalities"].items()) {
    m.embeddings.emplace(name, resolve(path.get<std::string>()));
  }
  return m;
}

CohortDataset load_cohort(const std::filesystem::path& manifest_path) {
  const auto manifest = read_manifest(manifest_path);
  for (const auto& p : {manifest.clinical}) {
    if (!std::filesystem::exists(p)) throw Error("missing file: " + p.string());
  }
  for (const auto& [name, p] : manifest.embeddings) {
    if (!std::filesystem::exists(p)) throw Error("missing file: " + p.string());
  }

  // Files are parsed concurrently; assembly below is order-independent.
  std::vector<std::pair<std::string, std::future<EmbeddingTable>>> pending;
  for (const auto& [name, p] : manifest.embeddings) {
    pending.emplace_back(name, std::async(std::launch::async, read_embedding_csv, p));
  }
  const auto clinical = read_clinical_csv(manifest.clinical);
  std::map<std::string, EmbeddingTable, std::less<>> embeddings;
  for (auto& [name, fut] : pending) embeddings.emplace(name, fut.get());
  return assemble_cohort(clinical, embeddings);
}

}  // namespace mmsurv
