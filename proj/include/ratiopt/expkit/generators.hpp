#pragma once

// Synthetic sensing matrices and ground truths. Every generator is a pure function of its
// seed; sub-streams are split with derive_seed (tag 1 matrix, 2 ground truth, 3 noise).

#include "ratiopt/types.hpp"

#include <cstdint>
#include <string>

namespace ratiopt::expkit {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Family { GaussianCorr, ODCT };

const char* to_string(Family f);
Family parse_family(const std::string& s);

struct SynthSpec {
  Family family = Family::GaussianCorr;
  double r = 0.8;   // column correlation, GaussianCorr only
  double F = 10;    // coherence control, ODCT only
  Index m = 64;
  Index n = 256;
  Index s = 4;
  double dynamic_D = 1;
  double noise_sigma = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Rows i.i.d. N(0, (1-r)I + r 11^T): row i is sqrt(1-r) g + sqrt(r) z 1, drawing z then
/// the n entries of g, row after row.
MatrixXd gen_gaussian_corr(Index m, Index n, double r, std::uint64_t seed);

/// a_ij = cos(2 pi w_i (j+1) / F) / sqrt(m), w ~ U(0,1)^m.
MatrixXd gen_odct(Index m, Index n, double F, std::uint64_t seed);

/// s positions by partial Fisher-Yates, then values sign(g1) 10^D g2 in position order drawn.
VectorXd gen_ground_truth(Index n, Index s, double D, std::uint64_t seed);

struct SynthInstance {
  SynthSpec spec;
  MatrixXd A;
  VectorXd x_true;
  VectorXd b;  // A x_true + sigma * noise
};

SynthInstance make_instance(const SynthSpec& spec);

}  // namespace ratiopt::expkit
