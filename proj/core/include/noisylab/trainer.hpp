#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "noisylab/dataset.hpp"
#include "noisylab/gmm.hpp"
#include "noisylab/metrics.hpp"
#include "noisylab/network.hpp"
#include "noisylab/prototype_cleaner.hpp"
#include "noisylab/rng.hpp"
#include "noisylab/semisup.hpp"

namespace noisylab {

enum class CleanerMode { gmm_agn, gmm_awr, cpc_agn, cpc_awr };

CleanerMode cleaner_mode_from_string(const std::string& s);
const char* cleaner_mode_name(CleanerMode m);

struct TrainerConfig {
  std::vector<int> hidden = {64, 64};
  int embed_dim = 8;
  int projector_depth = 1;
  int epochs = 100;
  int warmup_epochs = 10;
  double cpc_warmup_frac = 0.05;  // e, as a fraction of epochs
  double tau = 0.5;
  double alpha = 1.0;
  double lambda_u = 25.0;
  double sharpen_temperature = 0.5;
  double mixup_beta_a = 4.0;
  CleanerMode cleaner_mode = CleanerMode::cpc_agn;
  bool self_labeling = false;  // "no GMM supervision" ablation (cpc modes only)
  bool normalize_losses = true;
  bool exclude_confident_from_noise = true;
  bool ensemble_inference = true;
  int batch_size = 128;
  SgdConfig sgd{0.02, 0.9, 5e-4};
  double lr_drop_factor = 0.1;
  int lr_drop_epoch = -1;  // -1 = epochs/2
  int gmm_max_iter = 100;
  double gmm_tol = 1e-6;
  std::uint64_t seed = 1;

  // Epochs before CPC partitions drive stage 2.
  int cpc_warmup_epochs() const;
  void validate() const;  // throws std::invalid_argument
};

// Dual-network co-divide trainer. Each epoch runs stage 1 (cleaner
// supervision from the peer network, prototype/projector update, CPC
// re-division) for both branches, then stage 2 (mixup semi-supervised
// training) for both, with partition provenance always crossing networks.
class DualTrainer {
 public:
  DualTrainer(const TrainerConfig& cfg, const NoisyDataset& train, const CleanDataset& test);

  void warmup();
  // Returns the two per-network records. Throws on an aborted epoch (empty
  // clean set, non-finite loss); the run driver turns that into a partial log.
  std::array<EpochRecord, 2> run_epoch(int epoch);

  const Network& network(int r) const { return nets_[r]; }
  const PrototypeBank& bank(int r) const { return banks_[r]; }
  // Stage-2 partition used by branch r in the last epoch.
  const Partition& last_partition(int r) const { return last_stage2_[r]; }

  double test_accuracy_ensemble() const;
  double test_accuracy_net(int r) const;

 private:
  struct BranchPass {
    std::vector<double> losses;      // raw CE per sample
    Eigen::MatrixXd probs;           // N x K
    Eigen::MatrixXd embedding;       // N x d
  };
  BranchPass full_pass(int r) const;
  std::vector<double> normalized(const std::vector<double>& losses) const;
  EvrBreakdown stage2(int r, const Partition& part);

  TrainerConfig cfg_;
  NoisyDataset train_;
  CleanDataset test_;
  std::array<Network, 2> nets_;
  std::array<PrototypeBank, 2> banks_;
  std::array<SgdOptimizer, 2> net_opts_;
  std::array<SgdOptimizer, 2> proj_opts_;
  std::array<SgdOptimizer, 2> proto_opts_;
  std::array<Rng, 2> warmup_rngs_;
  std::array<Rng, 2> stage1_rngs_;
  std::array<Rng, 2> stage2_rngs_;
  std::array<Partition, 2> prev_supervision_;  // degenerate-GMM fallback
  std::array<bool, 2> have_prev_supervision_{false, false};
  std::array<Partition, 2> last_stage2_;
};

struct RunResult {
  std::vector<EpochRecord> records;
  bool aborted = false;
  std::string abort_reason;
  int epochs_completed = 0;
  double final_test_acc_ensemble = 0.0;
  double final_test_acc_net1 = 0.0;
  double final_test_acc_net2 = 0.0;
};

// Full run; when out_dir is nonempty, writes metrics.jsonl, summary.json and
// the network/bank checkpoints there. config_key is stored in the summary
// for report grouping.
RunResult run(const TrainerConfig& cfg, const NoisyDataset& train, const CleanDataset& test,
              const std::string& out_dir = "", const std::string& config_key = "");

}  // namespace noisylab
