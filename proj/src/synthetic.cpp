#include "mmsurv/synthetic.hpp"

#include "mmsurv/csv.hpp"
#include "mmsurv/rng.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

namespace mmsurv {

SyntheticCohort make_synthetic_cohort(const SyntheticConfig& config) {
  if (config.n_patients < 1) throw Error("synthetic cohort needs patients");
  if (config.n_projects < 1 || config.n_projects > static_cast<int>(schema::kProjects.size())) {
    throw Error("synthetic n_projects out of range");
  }
  Rng rng(config.seed);
  const auto n_factors = config.factor_weights.size();

  std::vector<std::vector<double>> directions;
  for (const auto& m : config.modalities) {
    if (m.dim < 1) throw Error("synthetic modality dim must be positive");
    if (m.factor >= static_cast<int>(n_factors)) throw Error("synthetic factor index out of range");
    std::vector<double> u(static_cast<std::size_t>(m.dim));
    double norm = 0.0;
    for (auto& v : u) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : u) v /= norm;
    directions.push_back(std::move(u));
  }

  SyntheticCohort out;
  for (std::size_t m = 0; m < config.modalities.size(); ++m) {
    out.embeddings[config.modalities[m].name].dim = static_cast<std::size_t>(config.modalities[m].dim);
  }
  const double base_rate = std::numbers::ln2 / config.median_survival_days;

  for (int p = 0; p < config.n_patients; ++p) {
    char id[32];
    std::snprintf(id, sizeof id, "P%05d", p);

    std::vector<double> z(n_factors);
    double eta = 0.0;
    for (std::size_t l = 0; l < n_factors; ++l) {
      z[l] = rng.normal();
      eta += config.factor_weights[l] * z[l];
    }
    out.log_hazard[id] = eta;

    const double event_time = -std::log(1.0 - rng.uniform()) / (base_rate * std::exp(eta));
    const double censor_time = rng.uniform() * config.censor_max_days;
    const bool event = event_time <= censor_time;
    const auto duration =
        std::max<long long>(1, std::llround(std::min(event_time, censor_time)));

    ClinicalRow row;
    row.patient_id = id;
    row.project = std::string(schema::kProjects[rng.below(static_cast<std::uint64_t>(config.n_projects))]);
    row.sex = std::string(schema::kSexes[rng.below(2)]);
    // Mostly white / not hispanic, like the source cohort.
    const double r = rng.uniform();
    row.race = r < 0.75 ? "white" : r < 0.85 ? "black or african american" : r < 0.9 ? "asian" : r < 0.92 ? "" : "not reported";
    const double e = rng.uniform();
    row.ethnicity = e < 0.75 ? "not hispanic or latino" : e < 0.8 ? "hispanic or latino" : "not reported";
    const long long age = 20 * 365 + static_cast<long long>(rng.below(65 * 365));
    row.age_at_diagnosis_days = age;
    if (event) {
      row.age_at_death_days = age + duration;
      row.vital_status = "Dead";
    } else {
      row.age_at_last_followup_days = age + duration;
      row.vital_status = "Alive";
    }
    out.clinical.push_back(std::move(row));

    for (std::size_t m = 0; m < config.modalities.size(); ++m) {
      const auto& spec = config.modalities[m];
      std::vector<double> base(static_cast<std::size_t>(spec.dim));
      const double signal = spec.factor >= 0 ? spec.loading * z[static_cast<std::size_t>(spec.factor)] : 0.0;
      for (std::size_t j = 0; j < base.size(); ++j) base[j] = signal * directions[m][j] + rng.normal();
      if (spec.first_feature_is_log_hazard) base[0] = eta;
      auto& samples = out.embeddings[spec.name].samples[id];
      const auto n_samples = 1 + rng.below(static_cast<std::uint64_t>(std::max(1, config.max_samples_per_patient)));
      for (std::uint64_t s = 0; s < n_samples; ++s) {
        if (n_samples == 1) {
          samples.push_back(base);
          continue;
        }
        std::vector<double> jittered = base;
        for (auto& v : jittered) v += 0.1 * rng.normal();
        samples.push_back(std::move(jittered));
      }
    }
  }
  return out;
}

void write_synthetic_cohort(const SyntheticCohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto opt = [](const std::optional<long long>& v) { return v ? std::to_string(*v) : std::string(); };
  {
    std::ofstream out(dir / "clinical.csv", std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / "clinical.csv").string());
    out << "patient_id,project,sex,race,ethnicity,age_at_diagnosis_days,"
           "age_at_last_followup_days,age_at_death_days,vital_status\n";
    for (const auto& r : cohort.clinical) {
      out << csv::escape(r.patient_id) << ',' << csv::escape(r.project) << ',' << csv::escape(r.sex)
          << ',' << csv::escape(r.race) << ',' << csv::escape(r.ethnicity) << ','
          << opt(r.age_at_diagnosis_days) << ',' << opt(r.age_at_last_followup_days) << ','
          << opt(r.age_at_death_days) << ',' << csv::escape(r.vital_status) << '\n';
    }
  }
  nlohmann::ordered_json manifest;
  manifest["clinical"] = "clinical.csv";
  manifest["modalities"] = nlohmann::ordered_json::object();
  for (const auto& [name, table] : cohort.embeddings) {
    const auto file = name + ".csv";
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw Error("cannot write " + (dir / file).string());
    out << "patient_id,sample_id";
    for (std::size_t j = 0; j < table.dim; ++j) out << ",e" << j;
    out << '\n';
    for (const auto& [id, samples] : table.samples) {
      for (std::size_t s = 0; s < samples.size(); ++s) {
        out << csv::escape(id) << ',' << csv::escape(id + "-S" + std::to_string(s));
        for (double v : samples[s]) out << ',' << csv::format_double(v);
        out << '\n';
      }
    }
    manifest["modalities"][name] = file;
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest.dump(2) << '\n';
}

}  // namespace mmsurv
