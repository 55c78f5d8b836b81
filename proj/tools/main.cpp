#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mran/data.hpp"
#include "mran/error.hpp"
#include "mran/experiment.hpp"
#include "mran/verify.hpp"

namespace {

struct CliState {
  mran::ExperimentConfig config;
  std::string config_path;
  std::string ablate_one;  // dm|cm|lcm|ucm, train subcommand only
  std::string hidden_csv;
  std::string domains_csv;
};

// Plain `key = value` lines with # comments; keys are the long flag names.
// Values already set on the command line win; unknown keys and malformed
// lines fail fast.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream is(path);
  if (!is) throw mran::ConfigError("cannot read config file: " + path);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw mran::ParseError(path + ":" + std::to_string(line_no) +
                             ": expected `key = value`, got '" + line + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw mran::ParseError(path + ":" + std::to_string(line_no) +
                             ": expected `key = value`, got '" + line + "'");
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr)
      throw mran::ConfigError(path + ":" + std::to_string(line_no) + ": unknown config key '" +
                              key + "'");
    if (opt->count() > 0) continue;  // flags beat the file
    opt->add_result(value);
    opt->run_callback();
  }
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

void add_synth_options(CLI::App* cmd, mran::SynthConfig& sc) {
  cmd->add_option("--synth-domains", sc.domains, "synthetic domain count");
  cmd->add_option("--synth-dim", sc.dim, "synthetic feature dimension");
  cmd->add_option("--synth-labeled", sc.labeled_per_domain, "labeled examples per domain");
  cmd->add_option("--synth-unlabeled", sc.unlabeled_per_domain, "unlabeled examples per domain");
  cmd->add_option("--shared-signal", sc.shared_signal, "class-separation scale");
  cmd->add_option("--domain-shift", sc.domain_shift, "domain-separation scale");
  cmd->add_option("--noise", sc.noise, "feature noise scale");
  cmd->add_option("--baseline", sc.baseline, "positive baseline added before clamping");
}

void add_experiment_options(CLI::App* cmd, CliState& st, bool is_train) {
  auto& c = st.config;
  cmd->add_option("--config", st.config_path,
                  "plain key = value file with # comments; flags take precedence");
  cmd->add_option("--data-dir", c.data_dir, "review corpus directory (one subdirectory per domain)");
  cmd->add_flag("--synth", c.synth, "train on a generated synthetic corpus");
  cmd->add_option("--domains", st.domains_csv, "comma-separated domain names for --data-dir");
  cmd->add_option("--seed", c.seed, "experiment seed");
  cmd->add_option("--repeats", c.repeats, "independent repetitions, reported as mean +/- std");
  cmd->add_option("--folds", c.folds, "cross-validation fold count");
  cmd->add_option("--rotations", c.rotations, "fold rotations to run (0 = all)");
  cmd->add_option("--max-epochs", c.max_epochs, "training epoch budget");
  cmd->add_option("--batch-size", c.batch_size, "per-domain batch size");
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate");
  cmd->add_option("--alpha", c.alpha, "Beta(alpha, alpha) mixup parameter");
  cmd->add_option("--lambda-d", c.weights.lambda_d, "adversarial weight");
  cmd->add_option("--lambda-a", c.weights.lambda_a, "labeled category mixup weight");
  cmd->add_option("--lambda-u", c.weights.lambda_u, "unlabeled consistency weight");
  cmd->add_option("--lambda-m", c.weights.lambda_m, "domain mixup weight");
  cmd->add_option("--k-d", c.k_d, "discriminator steps per main step");
  cmd->add_option("--dropout", c.dropout, "dropout rate for every component");
  cmd->add_option("--vocab-size", c.vocab_size, "vocabulary size");
  cmd->add_option("--shared-dim", c.shared_dim, "shared feature width");
  cmd->add_option("--domain-dim", c.domain_dim, "domain-specific feature width");
  cmd->add_option("--hidden", st.hidden_csv, "extractor hidden sizes, comma-separated");
  cmd->add_flag("--log-counts", c.log_counts, "use log(1+count) feature values");
  cmd->add_flag("--per-pair-lambda", c.per_pair_lambda, "draw one mixup coefficient per pair");
  cmd->add_flag("--propagate-consistency-target", c.propagate_consistency_target,
                "do not detach the consistency target");
  cmd->add_option("--weight-decay", c.weight_decay, "L2 penalty added to gradients");
  cmd->add_option("--clip-norm", c.clip_norm, "global gradient-norm clip (0 = off)");
  cmd->add_option("--out", c.out_dir, "output directory");
  add_synth_options(cmd, c.synth_cfg);
  if (is_train)
    cmd->add_option("--ablate", st.ablate_one, "train one ablation variant")
        ->check(CLI::IsMember({"dm", "cm", "lcm", "ucm"}));
}

// For synthetic runs, architecture values the user did not set explicitly
// scale down to the synthetic task.
void apply_synth_profile(CLI::App* cmd, CliState& st) {
  if (!st.config.synth) return;
  if (!cmd->count("--shared-dim")) st.config.shared_dim = 16;
  if (!cmd->count("--domain-dim")) st.config.domain_dim = 8;
  if (!cmd->count("--hidden")) st.config.extractor_hidden = {64, 32};
}

void finish_config(CLI::App* cmd, CliState& st) {
  if (!st.config_path.empty()) apply_config_file(cmd, st.config_path);
  if (!st.hidden_csv.empty()) {
    st.config.extractor_hidden.clear();
    for (const auto& tok : split_csv(st.hidden_csv))
      st.config.extractor_hidden.push_back(std::stoi(tok));
  }
  if (!st.domains_csv.empty()) st.config.domain_names = split_csv(st.domains_csv);
  apply_synth_profile(cmd, st);
  if (st.config.synth) {
    st.config.domain_names.clear();
    for (int d = 0; d < st.config.synth_cfg.domains; ++d)
      st.config.domain_names.push_back("synth" + std::to_string(d));
  }
  if (st.ablate_one == "dm") st.config.ablate_dm = true;
  if (st.ablate_one == "cm") st.config.ablate_cm = true;
  if (st.ablate_one == "lcm") st.config.ablate_lcm = true;
  if (st.ablate_one == "ucm") st.config.ablate_ucm = true;
}

int cmd_train(CliState& st) {
  std::string warnings;
  mran::MultiDomainDataset ds = mran::load_dataset(st.config, &warnings);
  if (!warnings.empty()) std::cerr << warnings;
  mran::RunSummary summary = mran::run_train(st.config, ds);
  std::cout << mran::format_summary_table(summary);
  std::cout << "artifacts written to " << st.config.out_dir << "\n";
  return 0;
}

int cmd_ablate(CliState& st) {
  std::string warnings;
  mran::MultiDomainDataset ds = mran::load_dataset(st.config, &warnings);
  if (!warnings.empty()) std::cerr << warnings;
  mran::AblationResult result = mran::run_ablate(st.config, ds);
  std::cout << mran::format_ablation_table(result);
  std::cout << "artifacts written to " << st.config.out_dir << "\n";
  return 0;
}

int cmd_gradcheck(uint64_t seed, const std::vector<std::string>& terms, double dropout,
                  double step) {
  if (dropout > 0.0) {
    std::cerr << "gradcheck refuses to run with dropout " << dropout
              << ": a stochastic graph is not checkable against finite differences; "
                 "run with dropout 0\n";
    return 2;
  }
  const mran::GradCheckReport report = mran::gradcheck_losses(seed, terms, {}, step);
  bool ok = true;
  for (const auto& term : report.terms) {
    const bool pass = term.max_rel_err < 1e-4;
    ok = ok && pass;
    std::printf("%-10s max_rel_err %.3e  %s\n", term.name.c_str(), term.max_rel_err,
                pass ? "ok" : "FAIL");
  }
  if (!ok) {
    for (const auto& term : report.terms)
      if (term.max_rel_err >= 1e-4)
        std::cerr << "gradient check failed for " << term.name << "\n";
    return 1;
  }
  return 0;
}

int cmd_synth(const mran::SynthConfig& sc, const std::string& out_dir) {
  mran::MultiDomainDataset ds = mran::synth_generate(sc);
  mran::dump_dataset(ds, out_dir);
  std::cout << "wrote " << ds.domain_count() << " domain directories under " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mixup regularized adversarial networks for multi-domain text classification"};
  app.require_subcommand(1);

  CliState train_state, ablate_state;
  CLI::App* train = app.add_subcommand("train", "5-fold cross-validation training run");
  add_experiment_options(train, train_state, true);
  CLI::App* ablate = app.add_subcommand("ablate", "full model plus the four ablation variants");
  add_experiment_options(ablate, ablate_state, false);

  uint64_t gc_seed = 7;
  double gc_dropout = 0.0, gc_step = 1e-5;
  std::vector<std::string> gc_terms;
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  gradcheck->add_option("--seed", gc_seed, "seed for the random tiny model and data");
  gradcheck->add_option("--term", gc_terms, "check only the named terms (l_adv l_c l_a l_u l_m composite)");
  gradcheck->add_option("--dropout", gc_dropout, "must stay 0; the tool refuses otherwise");
  gradcheck->add_option("--step", gc_step, "central-difference step");

  mran::SynthConfig synth_cfg;
  uint64_t synth_seed = 1;
  std::string synth_out = "synth_data";
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus in the review layout");
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory");
  add_synth_options(synth, synth_cfg);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      finish_config(train, train_state);
      return cmd_train(train_state);
    }
    if (ablate->parsed()) {
      finish_config(ablate, ablate_state);
      return cmd_ablate(ablate_state);
    }
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_terms, gc_dropout, gc_step);
    if (synth->parsed()) {
      synth_cfg.seed = mran::Rng::mix_seed(synth_seed, 0x636f72707573ull);
      return cmd_synth(synth_cfg, synth_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
