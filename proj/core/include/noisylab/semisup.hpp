#pragma once

#include <Eigen/Dense>
#include <vector>

#include "noisylab/network.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

// p_k^(1/T) / sum_j p_j^(1/T), row-wise.
Eigen::MatrixXd sharpen_rows(const Eigen::MatrixXd& probs, double temperature);

// Clean-set label co-refinement: w*onehot(y) + (1-w)*mean_probs, then
// sharpened. mean_probs rows are the averaged predictions of both networks.
Eigen::MatrixXd refine_labels(const std::vector<int>& labels, const std::vector<double>& weights,
                              const Eigen::MatrixXd& mean_probs, int num_classes,
                              double temperature);

// Noise-set label guessing: sharpen of the two networks' averaged softmax.
Eigen::MatrixXd guess_labels(const Eigen::MatrixXd& probs_a, const Eigen::MatrixXd& probs_b,
                             double temperature);

// Beta(a,a) draw folded so the first argument dominates: max(lambda, 1-lambda).
double sample_mixup_lambda(double beta_a, Rng& rng);

struct MixedPair {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  double lambda = 1.0;
};

MixedPair mix_with_lambda(const Eigen::VectorXd& xi, const Eigen::VectorXd& yi,
                          const Eigen::VectorXd& xj, const Eigen::VectorXd& yj, double lambda);

MixedPair mixup_pair(const Eigen::VectorXd& xi, const Eigen::VectorXd& yi,
                     const Eigen::VectorXd& xj, const Eigen::VectorXd& yj, double beta_a,
                     Rng& rng);

// The vicinal sets for one training step: labeled and unlabeled rows are
// concatenated and every row is mixed with a shuffled partner drawn from the
// whole concatenation.
struct VicinalBatch {
  Eigen::MatrixXd x_labeled, y_labeled;      // mixed inputs / soft targets
  Eigen::MatrixXd x_unlabeled, y_unlabeled;  // may have zero rows
  std::vector<double> lambdas;               // per mixed row, labeled first
};

VicinalBatch build_vicinal_batch(const Eigen::MatrixXd& x_lab, const Eigen::MatrixXd& y_lab,
                                 const Eigen::MatrixXd& x_unlab, const Eigen::MatrixXd& y_unlab,
                                 double beta_a, Rng& rng);

struct EvrBreakdown {
  double total = 0.0;
  double labeled = 0.0;    // mean CE with soft targets over the labeled rows
  double unlabeled = 0.0;  // mean per-class MSE between probs and targets
  double lambda_u = 0.0;
};

// total = labeled + lambda_u * unlabeled; one SGD step on backbone and
// classifier (the projector does not participate).
EvrBreakdown evr_step(Network& net, SgdOptimizer& opt, const VicinalBatch& batch,
                      double lambda_u);

// Loss evaluation only (no update); used by tests and diagnostics.
EvrBreakdown evr_loss(const Network& net, const VicinalBatch& batch, double lambda_u);

// Loss plus the analytic parameter gradients evr_step would apply.
std::pair<EvrBreakdown, NetworkGradients> evr_gradients(const Network& net,
                                                        const VicinalBatch& batch,
                                                        double lambda_u);

}  // namespace noisylab
