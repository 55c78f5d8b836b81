#include "mran/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mran/error.hpp"

namespace fs = std::filesystem;

namespace mran {

namespace {

constexpr const char* kLabelToken = "#label#";

bool parse_count(const std::string& text, double* out) {
  if (text.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end != text.c_str() + text.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

}  // namespace

RawExample parse_review_line(const std::string& line, int line_no) {
  RawExample out;
  std::istringstream is(line);
  std::string pair;
  while (is >> pair) {
    const size_t colon = pair.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == pair.size())
      throw ParseError("line " + std::to_string(line_no) + ": malformed pair '" + pair + "'");
    const std::string token = pair.substr(0, colon);
    const std::string value = pair.substr(colon + 1);
    if (token == kLabelToken) {
      if (value == "positive")
        out.label = 1;
      else if (value == "negative")
        out.label = 0;
      else if (value == "unlabeled")
        out.label = std::nullopt;
      else
        throw ParseError("line " + std::to_string(line_no) + ": unknown label value '" + value +
                         "'");
    } else {
      double count = 0.0;
      if (!parse_count(value, &count))
        throw ParseError("line " + std::to_string(line_no) + ": non-numeric count in pair '" +
                         pair + "'");
      out.counts[token] += count;
    }
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> features) : features_(std::move(features)) {
  for (int i = 0; i < static_cast<int>(features_.size()); ++i)
    index_.emplace(features_[static_cast<size_t>(i)], i);
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw Error("cannot write vocabulary file: " + path);
  for (const auto& f : features_) os << f << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read vocabulary file: " + path);
  std::vector<std::string> features;
  std::string line;
  while (std::getline(is, line)) features.push_back(line);
  return Vocabulary(std::move(features));
}

Vocabulary build_vocabulary(const std::vector<const std::vector<RawExample>*>& corpora, int size) {
  if (size < 1) throw ConfigError("vocabulary size must be at least 1");
  // std::map keeps token order deterministic before ranking.
  std::map<std::string, double> totals;
  for (const auto* corpus : corpora)
    for (const RawExample& ex : *corpus)
      for (const auto& [token, count] : ex.counts) totals[token] += count;

  std::vector<std::pair<std::string, double>> ranked(totals.begin(), totals.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (static_cast<int>(ranked.size()) < size) {
    std::fprintf(stderr, "warning: only %zu distinct features available, requested %d\n",
                 ranked.size(), size);
    size = static_cast<int>(ranked.size());
  }
  std::vector<std::string> features;
  features.reserve(static_cast<size_t>(size));
  for (int i = 0; i < size; ++i) features.push_back(ranked[static_cast<size_t>(i)].first);
  return Vocabulary(std::move(features));
}

SparseExample vectorize(const RawExample& raw, const Vocabulary& vocab, int domain,
                        bool log_counts) {
  SparseExample out;
  out.label = raw.label;
  out.domain = domain;
  for (const auto& [token, count] : raw.counts) {
    const int id = vocab.id_of(token);
    if (id < 0) continue;
    const double value = log_counts ? std::log1p(count) : count;
    if (value <= 0.0) continue;
    out.features.emplace_back(id, value);
  }
  std::sort(out.features.begin(), out.features.end());
  return out;
}

Tensor densify(const std::vector<const SparseExample*>& rows, int width) {
  Tensor out = Tensor::zeros({static_cast<int>(rows.size()), width});
  auto vals = out.values();
  for (size_t r = 0; r < rows.size(); ++r)
    for (const auto& [id, count] : rows[r]->features) {
      if (id >= width)
        throw DimensionError("feature id " + std::to_string(id) + " exceeds width " +
                             std::to_string(width));
      vals[r * static_cast<size_t>(width) + static_cast<size_t>(id)] = count;
    }
  return out;
}

Tensor densify(const std::vector<SparseExample>& rows, int width) {
  std::vector<const SparseExample*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto& r : rows) ptrs.push_back(&r);
  return densify(ptrs, width);
}

std::vector<int> FoldPlan::indices_in(int domain, int fold) const {
  std::vector<int> out;
  const auto& a = assignment[static_cast<size_t>(domain)];
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    if (a[static_cast<size_t>(i)] == fold) out.push_back(i);
  return out;
}

std::vector<int> FoldPlan::train_indices(int domain, int rotation) const {
  const int test = test_fold(rotation), val = validation_fold(rotation);
  std::vector<int> out;
  const auto& a = assignment[static_cast<size_t>(domain)];
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    if (a[static_cast<size_t>(i)] != test && a[static_cast<size_t>(i)] != val) out.push_back(i);
  return out;
}

FoldPlan make_folds(const MultiDomainDataset& dataset, int num_folds, uint64_t seed) {
  if (num_folds < 2) throw ConfigError("fold count must be at least 2");
  FoldPlan plan;
  plan.num_folds = num_folds;
  Rng rng(Rng::mix_seed(seed, 0x666f6c6473ull));  // fold stream
  for (const DomainData& dom : dataset.domains) {
    if (static_cast<int>(dom.labeled.size()) < num_folds)
      throw ConfigError("domain '" + dom.name + "' has fewer labeled examples than folds");
    std::vector<int> positives, negatives;
    for (int i = 0; i < static_cast<int>(dom.labeled.size()); ++i) {
      const auto& ex = dom.labeled[static_cast<size_t>(i)];
      if (!ex.label)
        throw ConfigError("unlabeled example in the labeled pool of domain '" + dom.name + "'");
      (*ex.label == 1 ? positives : negatives).push_back(i);
    }
    rng.shuffle(positives);
    rng.shuffle(negatives);
    std::vector<int> folds(dom.labeled.size(), 0);
    // Round-robin positives, then continue the rotation with negatives so
    // fold sizes stay within one of each other and labels stay balanced.
    int next = 0;
    for (int idx : positives) folds[static_cast<size_t>(idx)] = next++ % num_folds;
    for (int idx : negatives) folds[static_cast<size_t>(idx)] = next++ % num_folds;
    plan.assignment.push_back(std::move(folds));
  }
  return plan;
}

MultiDomainDataset synth_generate(const SynthConfig& config) {
  if (config.dim < 4) throw ConfigError("synthetic dim must be at least 4");
  if (config.domains < 2) throw ConfigError("synthetic generator needs at least 2 domains");
  if (config.labeled_per_domain < 2 || config.unlabeled_per_domain < 0)
    throw ConfigError("invalid synthetic pool sizes");
  if (config.noise < 0.0 || config.shared_signal < 0.0 || config.domain_shift < 0.0)
    throw ConfigError("synthetic scales must be nonnegative");

  Rng pattern_rng(Rng::mix_seed(config.seed, 0x73796e7468ull));
  std::vector<double> class_pattern(static_cast<size_t>(config.dim));
  for (double& v : class_pattern) v = pattern_rng.uniform() < 0.5 ? -1.0 : 1.0;
  std::vector<std::vector<double>> domain_patterns(static_cast<size_t>(config.domains));
  for (auto& pat : domain_patterns) {
    pat.resize(static_cast<size_t>(config.dim));
    for (double& v : pat) v = pattern_rng.uniform() < 0.5 ? -1.0 : 1.0;
  }

  MultiDomainDataset ds;
  ds.feature_dim = config.dim;
  for (int d = 0; d < config.domains; ++d) {
    DomainData dom;
    dom.name = "synth" + std::to_string(d);
    Rng rng(Rng::mix_seed(config.seed, 0x64617461ull + static_cast<uint64_t>(d)));
    auto draw = [&](int cls) {
      SparseExample ex;
      ex.domain = d;
      const double sign = cls == 1 ? 1.0 : -1.0;
      for (int j = 0; j < config.dim; ++j) {
        double v = config.baseline + sign * config.shared_signal * class_pattern[static_cast<size_t>(j)] +
                   config.domain_shift * domain_patterns[static_cast<size_t>(d)][static_cast<size_t>(j)] +
                   config.noise * rng.normal();
        if (v > 0.0) ex.features.emplace_back(j, v);
      }
      return ex;
    };
    for (int i = 0; i < config.labeled_per_domain; ++i) {
      const int cls = i % 2;
      SparseExample ex = draw(cls);
      ex.label = cls;
      dom.labeled.push_back(std::move(ex));
    }
    for (int i = 0; i < config.unlabeled_per_domain; ++i)
      dom.unlabeled.push_back(draw(i % 2));
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

MultiDomainDataset load_review_dataset(const std::string& data_dir,
                                       const std::vector<std::string>& domain_names,
                                       int vocabulary_size, bool log_counts,
                                       std::string* warnings) {
  if (domain_names.empty()) throw ConfigError("no domains requested");
  struct RawDomain {
    std::vector<RawExample> labeled;
    std::vector<RawExample> unlabeled;
  };
  auto read_file = [](const fs::path& path, std::vector<RawExample>* out, bool require) {
    std::ifstream is(path);
    if (!is) {
      if (require)
        throw Error("missing data file: " + path.string() +
                    " (expected <data-dir>/<domain>/{positive,negative,unlabeled}.review)");
      return false;
    }
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
      ++line_no;
      if (line.empty()) continue;
      try {
        out->push_back(parse_review_line(line, line_no));
      } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
      }
    }
    return true;
  };

  std::vector<RawDomain> raw(domain_names.size());
  for (size_t d = 0; d < domain_names.size(); ++d) {
    const fs::path dir = fs::path(data_dir) / domain_names[d];
    std::vector<RawExample> positives, negatives;
    read_file(dir / "positive.review", &positives, true);
    read_file(dir / "negative.review", &negatives, true);
    for (auto& ex : positives) {
      if (!ex.label) ex.label = 1;  // file name carries the label when the line does not
      raw[d].labeled.push_back(std::move(ex));
    }
    for (auto& ex : negatives) {
      if (!ex.label) ex.label = 0;
      raw[d].labeled.push_back(std::move(ex));
    }
    if (!read_file(dir / "unlabeled.review", &raw[d].unlabeled, false) && warnings)
      *warnings += "domain '" + domain_names[d] +
                   "' has no unlabeled.review; training folds with hidden labels serve the "
                   "unlabeled losses\n";
    for (auto& ex : raw[d].unlabeled) ex.label = std::nullopt;
  }

  std::vector<const std::vector<RawExample>*> corpora;
  for (const auto& rd : raw) {
    corpora.push_back(&rd.labeled);
    corpora.push_back(&rd.unlabeled);
  }
  const Vocabulary vocab = build_vocabulary(corpora, vocabulary_size);

  MultiDomainDataset ds;
  ds.feature_dim = vocab.size();
  ds.vocabulary = vocab;
  for (size_t d = 0; d < domain_names.size(); ++d) {
    DomainData dom;
    dom.name = domain_names[d];
    for (const RawExample& ex : raw[d].labeled)
      dom.labeled.push_back(vectorize(ex, vocab, static_cast<int>(d), log_counts));
    for (const RawExample& ex : raw[d].unlabeled)
      dom.unlabeled.push_back(vectorize(ex, vocab, static_cast<int>(d), log_counts));
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

void dump_dataset(const MultiDomainDataset& dataset, const std::string& out_dir) {
  auto write_lines = [](const fs::path& path, const std::vector<const SparseExample*>& rows,
                        const char* label_value) {
    std::ofstream os(path);
    if (!os) throw Error("cannot write dataset file: " + path.string());
    char buf[64];
    for (const SparseExample* ex : rows) {
      for (const auto& [id, count] : ex->features) {
        std::snprintf(buf, sizeof buf, "%d:%.9g ", id, count);
        os << buf;
      }
      os << kLabelToken << ':' << label_value << '\n';
    }
  };
  for (const DomainData& dom : dataset.domains) {
    const fs::path dir = fs::path(out_dir) / dom.name;
    fs::create_directories(dir);
    std::vector<const SparseExample*> positives, negatives, unlabeled;
    for (const auto& ex : dom.labeled)
      (ex.label.value_or(0) == 1 ? positives : negatives).push_back(&ex);
    for (const auto& ex : dom.unlabeled) unlabeled.push_back(&ex);
    write_lines(dir / "positive.review", positives, "positive");
    write_lines(dir / "negative.review", negatives, "negative");
    if (!unlabeled.empty()) write_lines(dir / "unlabeled.review", unlabeled, "unlabeled");
  }
}

}  // namespace mran
