#include "mran/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mran/checkpoint.hpp"
#include "mran/error.hpp"

namespace fs = std::filesystem;

namespace mran {

std::vector<double> RunSummary::run_averages() const {
  std::vector<double> out;
  for (const auto& run : per_run) {
    double s = 0.0;
    for (double a : run) s += a;
    out.push_back(s / static_cast<double>(run.size()));
  }
  return out;
}

double sample_std(const std::vector<double>& values, double mean) {
  if (values.size() < 2) return 0.0;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return std::sqrt(sq / static_cast<double>(values.size() - 1));
}

SplitView make_split(const MultiDomainDataset& dataset, const FoldPlan& plan, int rotation) {
  SplitView split;
  split.train.feature_dim = dataset.feature_dim;
  for (int d = 0; d < dataset.domain_count(); ++d) {
    const DomainData& dom = dataset.domains[static_cast<size_t>(d)];
    DomainPools pools;
    pools.domain = d;
    for (int idx : plan.train_indices(d, rotation))
      pools.labeled.push_back(&dom.labeled[static_cast<size_t>(idx)]);
    pools.adversarial = pools.labeled;
    for (const SparseExample& ex : dom.unlabeled) pools.adversarial.push_back(&ex);
    if (dom.unlabeled.empty()) {
      // No unlabeled pool: the training fold with hidden labels serves the
      // unlabeled losses.
      pools.consistency = pools.labeled;
      split.train.unlabeled_fallback = true;
    } else {
      for (const SparseExample& ex : dom.unlabeled) pools.consistency.push_back(&ex);
    }
    split.train.domains.push_back(std::move(pools));

    std::vector<const SparseExample*> val, test;
    for (int idx : plan.indices_in(d, plan.validation_fold(rotation)))
      val.push_back(&dom.labeled[static_cast<size_t>(idx)]);
    for (int idx : plan.indices_in(d, plan.test_fold(rotation)))
      test.push_back(&dom.labeled[static_cast<size_t>(idx)]);
    split.validation.push_back(std::move(val));
    split.test.push_back(std::move(test));
  }
  return split;
}

MultiDomainDataset load_dataset(const ExperimentConfig& config, std::string* warnings) {
  if (config.synth) {
    SynthConfig sc = config.synth_cfg;
    sc.seed = Rng::mix_seed(config.seed, 0x636f72707573ull);
    return synth_generate(sc);
  }
  if (config.data_dir.empty())
    throw ConfigError(
        "no dataset: pass --data-dir with one directory per domain containing "
        "positive.review/negative.review (and optional unlabeled.review), or --synth");
  return load_review_dataset(config.data_dir, config.domain_names, config.vocab_size,
                             config.log_counts, warnings);
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

void finalize_summary(RunSummary& s) {
  const size_t domains = s.domain_names.size();
  s.domain_mean.assign(domains, 0.0);
  s.domain_std.assign(domains, 0.0);
  for (size_t d = 0; d < domains; ++d) {
    std::vector<double> col;
    for (const auto& run : s.per_run) col.push_back(run[d]);
    double mean = 0.0;
    for (double v : col) mean += v;
    mean /= static_cast<double>(col.size());
    s.domain_mean[d] = mean;
    s.domain_std[d] = sample_std(col, mean);
  }
  const std::vector<double> avgs = s.run_averages();
  s.average_mean = 0.0;
  for (double v : avgs) s.average_mean += v;
  s.average_mean /= static_cast<double>(avgs.size());
  s.average_std = sample_std(avgs, s.average_mean);
}

}  // namespace

std::string format_summary_table(const RunSummary& s) {
  std::ostringstream os;
  size_t width = 6;
  for (const auto& n : s.domain_names) width = std::max(width, n.size());
  os << "Domain";
  for (size_t i = 6; i < width + 2; ++i) os << ' ';
  os << "Accuracy\n";
  auto row = [&](const std::string& name, double mean, double std) {
    os << name;
    for (size_t i = name.size(); i < width + 2; ++i) os << ' ';
    os << pct(mean) << " +/- " << pct(std) << '\n';
  };
  for (size_t d = 0; d < s.domain_names.size(); ++d)
    row(s.domain_names[d], s.domain_mean[d], s.domain_std[d]);
  row("AVG", s.average_mean, s.average_std);
  return os.str();
}

RunSummary run_train(const ExperimentConfig& config, const MultiDomainDataset& dataset) {
  if (config.repeats < 1) throw ConfigError("repeats must be at least 1");
  fs::create_directories(config.out_dir);
  {
    std::ofstream echo(fs::path(config.out_dir) / "config.echo");
    if (!echo) throw Error("cannot write config echo under " + config.out_dir);
    echo << config_echo(config);
  }

  if (dataset.vocabulary.size() > 0)
    dataset.vocabulary.save((fs::path(config.out_dir) / "vocab.txt").string());

  const FoldPlan plan = make_folds(dataset, config.folds, config.seed);
  const int rotations =
      config.rotations == 0 ? config.folds : std::min(config.rotations, config.folds);

  RunSummary summary;
  for (const auto& dom : dataset.domains) summary.domain_names.push_back(dom.name);

  for (int rep = 0; rep < config.repeats; ++rep) {
    for (int rot = 0; rot < rotations; ++rot) {
      SplitView split = make_split(dataset, plan, rot);
      summary.unlabeled_fallback = split.train.unlabeled_fallback;

      const uint64_t run_seed =
          Rng::mix_seed(config.seed, 0x72756eull + static_cast<uint64_t>(rep) * 64 +
                                         static_cast<uint64_t>(rot));
      MranModel model(model_config(config, dataset.feature_dim, dataset.domain_count()), run_seed);

      const std::string tag = "r" + std::to_string(rep) + "_f" + std::to_string(rot);
      MetricsWriter metrics((fs::path(config.out_dir) / ("metrics_" + tag + ".csv")).string(),
                            summary.domain_names);
      FitOptions fopts;
      fopts.trainer = trainer_options(config, run_seed);
      fopts.max_epochs = config.max_epochs;
      fit(model, split, fopts, &metrics);

      save_checkpoint(model, config_echo(config),
                      (fs::path(config.out_dir) / ("checkpoint_" + tag + ".bin")).string());

      const EvalResult test = evaluate(model, split.test, dataset.feature_dim);
      std::vector<double> run;
      for (double a : test.per_domain) run.push_back(100.0 * a);
      summary.per_run.push_back(std::move(run));
    }
  }

  finalize_summary(summary);

  std::ofstream out(fs::path(config.out_dir) / "summary.txt");
  if (!out) throw Error("cannot write summary under " + config.out_dir);
  out << "# mran train summary\n";
  out << "# runs = " << summary.per_run.size() << " (" << config.repeats << " repeats x "
      << rotations << " rotations)\n";
  if (summary.unlabeled_fallback)
    out << "# note: no unlabeled corpus; training folds with hidden labels served the "
           "unlabeled losses\n";
  std::istringstream echo(config_echo(config));
  for (std::string line; std::getline(echo, line);) out << "# " << line << '\n';
  out << format_summary_table(summary);
  return summary;
}

AblationResult run_ablate(const ExperimentConfig& config, const MultiDomainDataset& dataset) {
  AblationResult result;
  result.variant_names = {"full", "w/o DM", "w/o CM", "w/o LCM", "w/o UCM"};
  const std::vector<std::string> dirs = {"full", "wo_dm", "wo_cm", "wo_lcm", "wo_ucm"};
  for (size_t v = 0; v < dirs.size(); ++v) {
    ExperimentConfig variant = config;
    variant.ablate_dm = v == 1;
    variant.ablate_cm = v == 2;
    variant.ablate_lcm = v == 3;
    variant.ablate_ucm = v == 4;
    variant.out_dir = (fs::path(config.out_dir) / dirs[v]).string();
    result.summaries.push_back(run_train(variant, dataset));
  }
  std::ofstream out(fs::path(config.out_dir) / "ablation.txt");
  if (!out) throw Error("cannot write ablation table under " + config.out_dir);
  out << format_ablation_table(result);
  return result;
}

std::string format_ablation_table(const AblationResult& result) {
  std::ostringstream os;
  const RunSummary& first = result.summaries.front();
  os << "Method   ";
  for (const auto& n : first.domain_names) os << ' ' << n;
  os << " AVG\n";
  for (size_t v = 0; v < result.variant_names.size(); ++v) {
    const RunSummary& s = result.summaries[v];
    os << result.variant_names[v];
    for (size_t i = result.variant_names[v].size(); i < 9; ++i) os << ' ';
    for (size_t d = 0; d < s.domain_names.size(); ++d) {
      os << ' ' << pct(s.domain_mean[d]);
      for (size_t i = pct(s.domain_mean[d]).size(); i < s.domain_names[d].size(); ++i) os << ' ';
    }
    os << ' ' << pct(s.average_mean) << '\n';
  }
  return os.str();
}

}  // namespace mran
