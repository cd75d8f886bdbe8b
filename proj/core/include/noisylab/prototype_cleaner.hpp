#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "noisylab/gmm.hpp"
#include "noisylab/network.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

// Learned per-class prototypes living in the projector's embedding space.
// A sample scores sigmoid(v' . c_label); scores above tau count as clean.
struct PrototypeBank {
  Eigen::MatrixXd prototypes;  // K x d
  double tau = 0.5;
  double alpha = 1.0;          // weight of the confident-set loss
  double lambda_neg = 0.0;     // fixed to 1/K
  bool initialized = false;

  int num_classes() const { return static_cast<int>(prototypes.rows()); }
  int embed_dim() const { return static_cast<int>(prototypes.cols()); }
};

PrototypeBank make_bank(int num_classes, int embed_dim, double tau, double alpha);

// Prototypes start as per-class means of the embeddings over `indices`
// (normally the first clean set after network warm-up). Classes absent from
// the subset fall back to the mean over all samples carrying that label.
void init_prototypes(PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                     const std::vector<int>& labels, const std::vector<int>& indices);

double clean_score(const Eigen::VectorXd& embedding, const PrototypeBank& bank, int label);

CleanerScores clean_scores(const Eigen::MatrixXd& embeddings, const PrototypeBank& bank,
                           const std::vector<int>& labels);

Partition partition_cpc(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                        const std::vector<int>& labels, double tau);

// Similarity-argmax self-labeling (the "no external cleaner" ablation):
// a sample counts as clean iff its nearest prototype matches its label.
// Scores are the sigmoid values at the label prototype (used as weights and
// for instrumentation); the partition itself is decided by the argmax.
CleanerScores self_label_scores(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                                const std::vector<int>& labels);
Partition partition_self_label(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                               const std::vector<int>& labels);

// One loss term over a set of members; gradients are exact and sized like
// the inputs (d_embeddings row i pairs with embeddings row i).
struct CpcLoss {
  double value = 0.0;
  Eigen::MatrixXd d_prototypes;  // K x d
  Eigen::MatrixXd d_embeddings;  // M x d
  bool empty_set = false;
};

// Mean over members of -[log s(v'c_y) + (1/K) sum_{k != y} log(1 - s(v'c_k))].
CpcLoss loss_clean_set(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                       const PrototypeBank& bank);

// Mean over members of -log(1 - s(v'c_y)) with y the observed label.
CpcLoss loss_noise_set(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                       const PrototypeBank& bank);

// Mean over members of -log s(v'c_k) with k the pseudo-label.
CpcLoss loss_confident_set(const Eigen::MatrixXd& embeddings,
                           const std::vector<int>& pseudo_labels, const PrototypeBank& bank);

// Noise-set samples whose top prediction clears the clean-set class-average
// confidence; they join the confident set under their predicted label.
struct ConfidentSet {
  std::vector<int> indices;        // into the dataset
  std::vector<int> pseudo_labels;  // argmax predictions
};

ConfidentSet select_confident(const Partition& supervision, const Eigen::MatrixXd& probs,
                              const std::vector<int>& labels);

struct CpcUpdateStats {
  double loss_total = 0.0;  // means over the pass' batches
  double loss_clean = 0.0;
  double loss_noise = 0.0;
  double loss_confident = 0.0;
  int batches = 0;
  bool clean_set_empty = false;
  bool noise_set_empty = false;
};

// One SGD pass minimizing L = L_clean + L_noise + alpha * L_confident over
// shuffled mini-batches of the supervision partition. Updates the prototypes
// and the projector; the backbone is untouched (gradient cut at the
// projector input). When `exclude_confident_from_noise` is set, confident
// members drop out of the noise-set term for this pass.
CpcUpdateStats cpc_update(PrototypeBank& bank, Network& net, SgdOptimizer& proto_opt,
                          SgdOptimizer& proj_opt, const Eigen::MatrixXd& inputs,
                          const std::vector<int>& labels, const Partition& supervision,
                          const ConfidentSet& confident, int batch_size, Rng& rng,
                          bool exclude_confident_from_noise = true);

void save_bank(const PrototypeBank& bank, const std::string& path);
PrototypeBank load_bank(const std::string& path);

}  // namespace noisylab
