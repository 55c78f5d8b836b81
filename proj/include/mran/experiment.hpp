#pragma once

#include <string>
#include <vector>

#include "mran/config.hpp"
#include "mran/data.hpp"
#include "mran/training.hpp"

namespace mran {

// Aggregated cross-validation outcome: one test accuracy (percent) per
// (repeat × rotation) run and domain, plus mean ± std summaries.
struct RunSummary {
  std::vector<std::string> domain_names;
  std::vector<std::vector<double>> per_run;  // [run][domain], percent
  std::vector<double> domain_mean;           // per domain, percent
  std::vector<double> domain_std;
  double average_mean = 0.0;  // of the per-run cross-domain averages
  double average_std = 0.0;
  bool unlabeled_fallback = false;

  // Per-run cross-domain average, percent.
  std::vector<double> run_averages() const;
};

// Sample standard deviation; 0 when fewer than two values.
double sample_std(const std::vector<double>& values, double mean);

// Builds train/validation/test pools for one fold rotation.
SplitView make_split(const MultiDomainDataset& dataset, const FoldPlan& plan, int rotation);

// Full cross-validation: for each repeat and fold rotation, trains a fresh
// model and evaluates the best snapshot on the held-out fold. Writes
// per-fold metrics and checkpoints, config.echo, and summary.txt under
// config.out_dir.
RunSummary run_train(const ExperimentConfig& config, const MultiDomainDataset& dataset);

// Loads (or generates) the dataset named by the config.
MultiDomainDataset load_dataset(const ExperimentConfig& config, std::string* warnings = nullptr);

// Formats the Table-1-style summary: one row per domain plus an AVG row.
std::string format_summary_table(const RunSummary& summary);

struct AblationResult {
  std::vector<std::string> variant_names;  // full, w/o DM, w/o CM, w/o LCM, w/o UCM
  std::vector<RunSummary> summaries;
};

// Runs the full model plus the four ablation variants on identical folds and
// seeds; writes ablation.txt under config.out_dir.
AblationResult run_ablate(const ExperimentConfig& config, const MultiDomainDataset& dataset);

std::string format_ablation_table(const AblationResult& result);

}  // namespace mran
