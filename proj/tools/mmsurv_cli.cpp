#include "mmsurv/cohort.hpp"
#include "mmsurv/csv.hpp"
#include "mmsurv/pipeline.hpp"
#include "mmsurv/splits.hpp"
#include "mmsurv/summarizer.hpp"
#include "mmsurv/synthetic.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

using namespace mmsurv;

namespace {

void write_rejections(const CohortDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "patient_id,reason,detail\n";
  for (const auto& r : ds.rejected) {
    out << csv::escape(r.patient_id) << ',' << csv::escape(r.reason) << ',' << csv::escape(r.detail) << '\n';
  }
}

int cmd_validate(const std::filesystem::path& manifest, const std::filesystem::path& rejected_out) {
  const auto ds = load_cohort(manifest);
  std::size_t events = 0;
  for (const auto& p : ds.patients) events += p.outcome.event;
  std::printf("patients: %zu (%zu events)\n", ds.patients.size(), events);
  for (const auto& [name, m] : ds.modalities) {
    std::printf("modality %s: %s, dim %lld\n", name.c_str(), std::string(to_string(m.kind)).c_str(),
                static_cast<long long>(m.dim()));
  }
  std::map<std::string, int> reasons;
  for (const auto& r : ds.rejected) ++reasons[r.reason];
  std::printf("rejected: %zu\n", ds.rejected.size());
  for (const auto& [reason, n] : reasons) std::printf("  %s: %d\n", reason.c_str(), n);
  if (!rejected_out.empty()) write_rejections(ds, rejected_out);
  return 0;
}

int cmd_split(const std::filesystem::path& manifest, int k, std::uint64_t seed, const std::filesystem::path& out) {
  const auto ds = load_cohort(manifest);
  const auto plan = stratified_kfold(ds, k, seed);
  write_splits_csv(plan, out);
  const auto sizes = plan.fold_sizes();
  for (int f = 0; f < k; ++f) {
    int events = 0;
    for (const auto& p : ds.patients) events += plan.fold_of(p.patient_id) == f && p.outcome.event;
    std::printf("fold %d: %d patients, %d events\n", f, sizes[static_cast<std::size_t>(f)], events);
  }
  return 0;
}

int cmd_run(const std::filesystem::path& config_path, int threads, const std::filesystem::path& out_override) {
  auto cfg = load_experiment_config(config_path);
  if (threads > 0) cfg.threads = threads;
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (cfg.manifest.empty()) throw Error("experiment config: \"manifest\" is required");
  const auto ds = load_cohort(cfg.manifest);
  const SplitPlan plan = cfg.splits.empty() ? stratified_kfold(ds, cfg.k, cfg.seed) : read_splits_csv(cfg.splits);
  const auto result = run_experiment(cfg, ds, plan);
  write_experiment_outputs(result, cfg.out_dir);
  if (cfg.splits.empty()) write_splits_csv(plan, cfg.out_dir / "splits.csv");
  for (const auto& w : result.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%zu metric rows written to %s\n", result.metrics.size(), cfg.out_dir.string().c_str());
  return 0;
}

int cmd_report(const std::filesystem::path& dir) {
  const auto summary = summarize_metrics_csv(dir / "metrics.csv");
  write_summary_csv(summary, dir / "summary.csv");
  if (std::filesystem::exists(dir / "per_cancer.csv")) {
    write_per_cancer_summary_csv(summarize_per_cancer_csv(dir / "per_cancer.csv"), dir / "per_cancer_summary.csv");
  }
  std::printf("%-40s %8s %8s %8s %8s\n", "combo", "pca_dim", "c_index", "std", "ibs");
  for (const auto& r : summary) {
    std::printf("%-40s %8s %8.4f %8.4f %8.4f\n", r.combo.c_str(), r.pca_dim.c_str(), r.c_index_mean, r.c_index_std,
                r.ibs_mean);
  }
  return 0;
}

struct SummarizeArgs {
  std::filesystem::path input, output, failures;
  int concurrency = 4;
  std::int64_t seed = 0;
  bool override_decoding = false;
  double temperature = 0.0;
  int max_tokens = 1024;
};

int cmd_summarize(const SummarizeArgs& a) {
  using namespace mmsurv::summarizer;
  const auto endpoint = endpoint_from_env();
  const auto reports = read_reports_jsonl(a.input);
  DecodingParams params;
  params.seed = a.seed;
  if (a.override_decoding) {
    params.temperature = a.temperature;
    params.max_tokens = a.max_tokens;
    params.greedy = a.temperature == 0.0;
  }
  BatchOptions opts;
  opts.concurrency = a.concurrency;
  const auto result = summarize_batch(reports, endpoint, params, opts);
  write_summaries_jsonl(result.summaries, a.output);
  write_failures_jsonl(result.failures, a.failures);
  std::printf("%zu summarized, %zu failed\n", result.summaries.size(), result.failures.size());
  return result.failures.empty() ? 0 : 3;
}

int cmd_synth(const std::filesystem::path& out, int n, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n_patients = n;
  cfg.seed = seed;
  cfg.modalities = {{"expression", 32, 0}, {"histology", 32, 1}, {"text", 32, 2}};
  write_synthetic_cohort(make_synthetic_cohort(cfg), out);
  std::printf("wrote %d synthetic patients to %s\n", n, out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal survival modelling on foundation-model embeddings"};
  app.require_subcommand(1);

  std::string manifest, rejected_out, split_out = "splits.csv", config, run_out, report_dir, synth_out;
  int k = 5, threads = 0, synth_n = 600;
  std::uint64_t seed = 0, synth_seed = 0;

  auto* validate = app.add_subcommand("validate", "Load a cohort manifest and report retained/rejected patients");
  validate->add_option("manifest", manifest, "Cohort manifest JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--rejected", rejected_out, "Write rejected patients to this CSV");

  auto* split = app.add_subcommand("split", "Write stratified k-fold assignments");
  split->add_option("manifest", manifest, "Cohort manifest JSON")->required()->check(CLI::ExistingFile);
  split->add_option("--k", k, "Number of folds")->check(CLI::PositiveNumber);
  split->add_option("--seed", seed, "Random seed");
  split->add_option("--out", split_out, "Output splits CSV");

  auto* run = app.add_subcommand("run", "Run the cross-validated experiment");
  run->add_option("--config", config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--threads", threads, "OpenMP threads (0 = default)");
  run->add_option("--out", run_out, "Override the config's output directory");

  auto* report = app.add_subcommand("report", "Aggregate metrics across folds");
  report->add_option("--out", report_dir, "Directory holding metrics.csv")->required()->check(CLI::ExistingDirectory);

  SummarizeArgs sa;
  auto* summarize = app.add_subcommand(
      "summarize", "Summarize pathology reports via the endpoint in MMSURV_ENDPOINT_URL / MMSURV_API_TOKEN / MMSURV_MODEL");
  summarize->add_option("--input", sa.input, "reports.jsonl with case_id and text")->required()->check(CLI::ExistingFile);
  summarize->add_option("--output", sa.output, "summaries.jsonl")->required();
  summarize->add_option("--failures", sa.failures, "failures.jsonl")->required();
  summarize->add_option("--concurrency", sa.concurrency, "In-flight requests")->check(CLI::PositiveNumber);
  summarize->add_option("--seed", sa.seed, "Decoding seed");
  auto* override_flag =
      summarize->add_flag("--override-decoding", sa.override_decoding, "Allow changing temperature / max tokens");
  summarize->add_option("--temperature", sa.temperature, "Sampling temperature")->needs(override_flag);
  summarize->add_option("--max-tokens", sa.max_tokens, "Maximum new tokens")->needs(override_flag);

  auto* synth = app.add_subcommand("synth", "Write a synthetic demo cohort");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Patients")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "Random seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(manifest, rejected_out);
    if (*split) return cmd_split(manifest, k, seed, split_out);
    if (*run) return cmd_run(config, threads, run_out);
    if (*report) return cmd_report(report_dir);
    if (*summarize) return cmd_summarize(sa);
    if (*synth) return cmd_synth(synth_out, synth_n, synth_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
