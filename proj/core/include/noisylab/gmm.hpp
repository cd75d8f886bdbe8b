#pragma once

#include <cstdint>
#include <vector>

namespace noisylab {

// Two-component 1-D Gaussian mixture over per-sample losses; component 0 is
// the small-loss (clean) component, so mu0 < mu1 always holds after a
// non-degenerate fit.
struct GmmFit {
  double mu0 = 0.0, sigma0 = 1.0, phi0 = 0.5;
  double mu1 = 0.0, sigma1 = 1.0, phi1 = 0.5;
  bool degenerate = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  std::vector<double> loglik_trace;  // one entry per EM iteration
};

// EM with deterministic median-split initialization. Degenerate input (all
// losses equal) returns a flagged single-point fit; callers must treat every
// sample as one component in that case. `seed` is accepted for interface
// stability but the fit is fully deterministic.
GmmFit fit_gmm_1d(const std::vector<double>& losses, int max_iter = 100, double tol = 1e-6,
                  std::uint64_t seed = 0);

// Posterior probability that `loss` belongs to the clean (small-mean)
// component, clamped to [0,1]. Throws on a degenerate fit.
double posterior_clean(const GmmFit& fit, double loss);

struct ClassAwareGmm {
  std::vector<GmmFit> per_class;
  GmmFit global;
  std::vector<bool> fell_back;  // class used the global fit (too small or degenerate)
};

// One fit per class; classes with fewer than 4 samples or a degenerate
// per-class fit fall back to the global fit and are flagged.
ClassAwareGmm fit_class_aware(const std::vector<double>& losses, const std::vector<int>& labels,
                              int num_classes, int max_iter = 100, double tol = 1e-6,
                              std::uint64_t seed = 0);

double posterior_clean(const ClassAwareGmm& fits, double loss, int label);

enum class CleanerSource { gmm_agnostic, gmm_aware, cpc, self_label };

const char* cleaner_source_name(CleanerSource s);

struct CleanerScores {
  std::vector<double> q_clean;  // each in [0,1]
  CleanerSource source = CleanerSource::gmm_agnostic;
};

// Clean/noise split: clean = {i : q[i] > tau} with weights w_i = q[i]; the
// rest go to the noise side (their labels stay in the dataset but stage 2
// treats them as unlabeled).
struct Partition {
  std::vector<int> clean_indices;
  std::vector<double> clean_weights;
  std::vector<int> noise_indices;
  CleanerSource source = CleanerSource::gmm_agnostic;
  // Which network's model produced the scores (1-based; 0 = not tracked).
  // In the dual-network trainer, the partition for net r always comes from
  // its peer.
  int from_net = 0;
};

Partition partition_from_scores(const CleanerScores& scores, double tau);

}  // namespace noisylab
