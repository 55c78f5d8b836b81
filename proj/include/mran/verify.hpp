#pragma once

#include <string>
#include <vector>

#include "mran/training.hpp"

namespace mran {

struct GradCheckTerm {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckTerm> terms;
  double max_rel_err = 0.0;
};

// Valid term names: l_adv, l_c, l_a, l_u, l_m, composite.
std::vector<std::string> gradcheck_term_names();

// Central-difference verification of every loss term's analytic gradient on
// a tiny randomly initialized model (widths <= 16, dropout off), checked
// against every parameter. The consistency target is precomputed at the base
// parameters and held fixed, matching the constant-target training gradient.
GradCheckReport gradcheck_losses(uint64_t seed, const std::vector<std::string>& only_terms = {},
                                 const LossWeights& weights = {}, double step = 1e-5);

}  // namespace mran
