#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace noisylab {

struct AffineLayer {
  Eigen::MatrixXd weight;  // in x out; y = x * W + b
  Eigen::VectorXd bias;
};

struct NetworkConfig {
  int input_dim = 2;
  int num_classes = 2;
  std::vector<int> hidden = {64, 64};  // backbone widths (affine + ReLU each)
  int embed_dim = 8;                   // d, must be < feature dim
  int projector_depth = 1;             // 1 = affine; 2 = affine + ReLU + affine
};

// Forward results plus the activation cache needed for exact backprop.
struct ForwardBatch {
  Eigen::MatrixXd logits;     // N x K
  Eigen::MatrixXd probs;      // N x K, rows sum to 1
  Eigen::MatrixXd feature;    // N x D_feat (backbone output v)
  Eigen::MatrixXd embedding;  // N x d, L2-normalized rows (v')

  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> backbone_pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> backbone_act;   // post-ReLU per layer
  std::vector<Eigen::MatrixXd> projector_pre;  // pre-activations per projector layer
  Eigen::MatrixXd proj_raw;                    // projector output before normalization
  Eigen::VectorXd proj_norm;                   // per-row norms of proj_raw
  std::uint64_t params_revision = 0;
};

// Upstream gradients seeding backprop; either matrix may be empty (treated
// as zero).
struct BackpropSeed {
  Eigen::MatrixXd d_logits;     // N x K
  Eigen::MatrixXd d_embedding;  // N x d, gradient wrt the normalized embedding
};

struct NetworkGradients {
  std::vector<AffineLayer> backbone;
  AffineLayer classifier;
  std::vector<AffineLayer> projector;
};

class Network {
 public:
  Network(const NetworkConfig& cfg, std::uint64_t seed);

  ForwardBatch forward(const Eigen::MatrixXd& x) const;

  // Exact analytic gradients for the given upstream seed. When
  // stop_at_projector_input is set, the projector-path contribution to the
  // backbone (and below) is cut off.
  NetworkGradients backward(const ForwardBatch& cache, const BackpropSeed& seed,
                            bool stop_at_projector_input) const;

  NetworkGradients zero_gradients() const;

  const NetworkConfig& config() const { return cfg_; }
  int feature_dim() const { return cfg_.hidden.empty() ? cfg_.input_dim : cfg_.hidden.back(); }
  std::uint64_t revision() const { return revision_; }
  void bump_revision() { ++revision_; }

  std::vector<AffineLayer> backbone;
  AffineLayer classifier;
  std::vector<AffineLayer> projector;

 private:
  NetworkConfig cfg_;
  std::uint64_t revision_ = 0;
};

// -log(probs[label]); the literal definition, assumes probs is a valid
// distribution.
double cross_entropy(const Eigen::VectorXd& probs, int label);

// Numerically stable CE straight from logits (log-sum-exp); safe for logits
// with magnitude up to ~1e3 and beyond.
double cross_entropy_logits(const Eigen::VectorXd& logits, int label);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

std::vector<double> per_sample_ce(const Eigen::MatrixXd& logits, const std::vector<int>& labels);

struct SgdConfig {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// SGD with momentum and weight decay over a fixed tensor list:
//   g <- grad + wd * param;  buf <- m * buf + g;  param <- param - lr * buf.
// Momentum buffers are keyed by slot order, so callers must pass tensors in
// a stable order.
class SgdOptimizer {
 public:
  explicit SgdOptimizer(SgdConfig cfg) : cfg_(cfg) {}

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  const SgdConfig& config() const { return cfg_; }

  // Throws on non-finite gradients, naming the offending slot.
  void step(double* param, const double* grad, Eigen::Index n, int slot,
            const std::string& name);

 private:
  SgdConfig cfg_;
  std::vector<Eigen::VectorXd> buffers_;
};

enum class ParamGroup { backbone_and_classifier, projector };

// One optimizer step over a parameter group of the network; bumps the
// revision counter so stale forward caches are detectable.
void sgd_step(Network& net, const NetworkGradients& grads, SgdOptimizer& opt, ParamGroup group);

// Versioned JSON checkpoint; round-trips bit-exactly.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const std::string& path);

}  // namespace noisylab
