#include "mmsurv/splits.hpp"

#include "mmsurv/csv.hpp"
#include "mmsurv/rng.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <fstream>
#include <numeric>

namespace mmsurv {

StratumKey build_stratum_key(const PatientRecord& record) {
  return {schema::age_bin(record.age_at_diagnosis_days),
          schema::sex_index(record.sex),
          schema::race_index(record.race),
          schema::ethnicity_index(record.ethnicity),
          record.outcome.event,
          schema::project_index(record.project)};
}

int SplitPlan::fold_of(std::string_view patient_id) const {
  const auto it = assignment.find(patient_id);
  if (it == assignment.end()) throw Error("patient not in split plan: " + std::string(patient_id));
  return it->second;
}

std::vector<int> SplitPlan::fold_sizes() const {
  std::vector<int> sizes(static_cast<std::size_t>(k), 0);
  for (const auto& [id, f] : assignment) ++sizes[static_cast<std::size_t>(f)];
  return sizes;
}

SplitPlan stratified_kfold(const CohortDataset& dataset, int k, std::uint64_t seed) {
  if (k < 2) throw Error("k must be at least 2");
  if (dataset.patients.empty()) throw Error("empty cohort");
  if (static_cast<std::size_t>(k) > dataset.patients.size()) {
    throw Error("k exceeds cohort size");
  }

  std::map<StratumKey, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < dataset.patients.size(); ++i) {
    strata[build_stratum_key(dataset.patients[i])].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> order;
  order.reserve(strata.size());
  for (const auto& [key, members] : strata) order.push_back(&members);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->size() < b->size(); });

  Rng rng(seed);
  std::vector<std::size_t> fill(static_cast<std::size_t>(k), 0);
  // Per-fold fill split by event flag; ranking folds by the fill of the
  // stratum's own event class keeps mortality balanced even when most joint
  // strata are singletons.
  std::array<std::vector<std::size_t>, 2> class_fill;
  class_fill.fill(std::vector<std::size_t>(static_cast<std::size_t>(k), 0));
  std::vector<int> folds(static_cast<std::size_t>(k));
  SplitPlan plan{k, seed, {}};

  for (const auto* members_ptr : order) {
    std::vector<std::size_t> members = *members_ptr;
    rng.shuffle(std::span<std::size_t>(members));
    auto& same_class = class_fill[dataset.patients[members.front()].outcome.event ? 1 : 0];

    std::iota(folds.begin(), folds.end(), 0);
    std::stable_sort(folds.begin(), folds.end(), [&](int a, int b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      return std::tie(same_class[ua], fill[ua]) < std::tie(same_class[ub], fill[ub]);
    });
    for (std::size_t m = 0; m < members.size(); ++m) {
      const int f = folds[m % folds.size()];
      ++fill[static_cast<std::size_t>(f)];
      ++same_class[static_cast<std::size_t>(f)];
      plan.assignment.emplace(dataset.patients[members[m]].patient_id, f);
    }
  }
  return plan;
}

FoldIndices fold_indices(const CohortDataset& dataset, const SplitPlan& plan, int fold) {
  if (fold < 0 || fold >= plan.k) throw Error("fold out of range");
  FoldIndices out;
  for (std::size_t i = 0; i < dataset.patients.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    (plan.fold_of(dataset.patients[i].patient_id) == fold ? out.test : out.train).push_back(idx);
  }
  return out;
}

void write_splits_csv(const SplitPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "patient_id,fold\n";
  for (const auto& [id, f] : plan.assignment) out << csv::escape(id) << ',' << f << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

SplitPlan read_splits_csv(const std::filesystem::path& path) {
  csv::Reader reader(path);
  std::vector<std::string> f;
  if (!reader.next(f) || f.size() != 2 || f[0] != "patient_id" || f[1] != "fold") {
    throw Error(path.string() + ": header must be patient_id,fold");
  }
  SplitPlan plan;
  int max_fold = -1;
  while (reader.next(f)) {
    if (f.size() != 2) throw Error(path.string() + ": malformed row " + std::to_string(reader.line_number()));
    const auto fold = static_cast<int>(csv::parse_int(f[1]));
    if (fold < 0) throw Error(path.string() + ": negative fold");
    if (!plan.assignment.emplace(f[0], fold).second) {
      throw Error(path.string() + ": duplicate patient_id " + f[0]);
    }
    max_fold = std::max(max_fold, fold);
  }
  plan.k = max_fold + 1;
  if (plan.k < 2) throw Error(path.string() + ": fewer than two folds");
  return plan;
}

}  // namespace mmsurv
