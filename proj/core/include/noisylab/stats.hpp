#pragma once

#include <Eigen/Dense>
#include <vector>

namespace noisylab {

// Tie-aware rank AUC: P(score_clean > score_noise) + 0.5*P(tie).
// Throws if either class is absent.
double auc(const std::vector<double>& scores, const std::vector<bool>& is_clean);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov: sup-distance of the empirical CDFs, p-value
// from the asymptotic Kolmogorov distribution with the effective-size
// correction. Both samples need at least 2 points.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

// Survival function of the Kolmogorov distribution, Q(lambda) = 2*sum_j
// (-1)^{j-1} exp(-2 j^2 lambda^2), clamped to [0,1].
double kolmogorov_q(double lambda);

// Mean over samples of KL(Bern(q_prime_i) || Bern(q_i)); inputs clamped to
// [eps, 1-eps] with eps = 1e-6.
double kld_bernoulli(const std::vector<double>& q_prime, const std::vector<double>& q);

// Fraction of samples whose thresholded decisions agree: (q'>tau) == (q>tau).
double consistency_rate(const std::vector<double>& q_prime, const std::vector<double>& q,
                        double tau);

// argmax-vs-label accuracy over prediction rows (softmax outputs or averaged
// softmax of an ensemble).
double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

struct KsClassEntry {
  int class_id = 0;
  KsResult clean;   // class-k clean losses vs all clean losses
  KsResult noise;   // class-k noise losses vs all noise losses
  bool clean_valid = false;
  bool noise_valid = false;
};

struct KsReport {
  std::vector<KsClassEntry> per_class;
  double frac_clean_significant = 0.0;  // among classes with a valid clean test
  double frac_noise_significant = 0.0;
};

// Per-class loss-distribution heterogeneity, matching subpopulations: each
// class's clean (resp. noise) losses are tested against the dataset-wide
// clean (resp. noise) losses.
KsReport ks_heterogeneity(const std::vector<double>& losses, const std::vector<int>& labels,
                          const std::vector<bool>& corrupted, int num_classes,
                          double alpha = 0.05);

}  // namespace noisylab
