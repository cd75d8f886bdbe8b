#pragma once

#include <string>
#include <vector>

#include "noisylab/gmm.hpp"

namespace noisylab {

// One record per epoch per network; appended to a JSON-lines stream.
struct EpochRecord {
  int epoch = 0;
  int net = 1;  // 1 or 2
  std::string stage2_source;  // cleaner tag that fed stage 2 this epoch

  // Cleaner AUCs measured against the hidden corruption flags; -1 when
  // undefined (single-class ground truth).
  double auc_gmm_agn = -1.0;
  double auc_gmm_awr = -1.0;
  double auc_cpc = -1.0;
  double auc_supervision = -1.0;  // the scores that actually fed the bank update

  int gmm_clean_size = 0;
  int gmm_noise_size = 0;
  int cpc_clean_size = 0;
  int cpc_noise_size = 0;
  int confident_size = 0;

  GmmFit gmm_fit;                      // class-agnostic fit on this branch's losses
  std::vector<GmmFit> gmm_fit_per_class;  // populated in class-aware modes
  bool gmm_degenerate = false;
  bool used_fallback_partition = false;

  double cpc_loss_total = 0.0;
  double cpc_loss_clean = 0.0;
  double cpc_loss_noise = 0.0;
  double cpc_loss_confident = 0.0;

  double evr_total = 0.0;
  double evr_labeled = 0.0;
  double evr_unlabeled = 0.0;
  double evr_lambda_u = 0.0;

  double kld = 0.0;          // Bernoulli KLD between supervision and CPC scores
  double consistency = 0.0;  // thresholded agreement between the two

  // Per-class loss-heterogeneity snapshot: fraction of classes whose clean
  // (resp. noise) losses differ from the dataset-wide ones at p < 0.05.
  double ks_frac_clean = 0.0;
  double ks_frac_noise = 0.0;

  double test_acc_net = 0.0;
  double test_acc_ensemble = 0.0;
};

std::string epoch_record_to_json(const EpochRecord& rec);
EpochRecord epoch_record_from_json(const std::string& line);

std::string records_to_jsonl(const std::vector<EpochRecord>& records);
std::vector<EpochRecord> load_metrics_jsonl(const std::string& path);
void save_metrics_jsonl(const std::vector<EpochRecord>& records, const std::string& path);

// End-of-run rollup consumed by the report command.
struct RunSummary {
  std::string config_key;    // canonical spec text minus seeds/output
  std::string cleaner_mode;  // includes the self-labeling ablation tag
  std::uint64_t seed = 0;
  int epochs_completed = 0;
  bool aborted = false;
  std::string abort_reason;

  double final_test_acc_ensemble = 0.0;
  double final_test_acc_net1 = 0.0;
  double final_test_acc_net2 = 0.0;

  // Means over the final third of recorded epochs.
  double final_third_auc_gmm_agn = -1.0;
  double final_third_auc_gmm_awr = -1.0;
  double final_third_auc_cpc = -1.0;

  double first_third_kld = 0.0;
  double final_third_kld = 0.0;
  double first_third_consistency = 0.0;
  double final_third_consistency = 0.0;
};

std::string summary_to_json(const RunSummary& s);
RunSummary load_summary_json(const std::string& path);
void save_summary_json(const RunSummary& s, const std::string& path);

// Fills the thirds/final fields of `s` from the records (both networks pooled).
void fill_summary_stats(RunSummary& s, const std::vector<EpochRecord>& records);

}  // namespace noisylab
