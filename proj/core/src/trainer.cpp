#include "noisylab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "noisylab/stats.hpp"

namespace noisylab {

CleanerMode cleaner_mode_from_string(const std::string& s) {
  if (s == "gmm_agn") return CleanerMode::gmm_agn;
  if (s == "gmm_awr") return CleanerMode::gmm_awr;
  if (s == "cpc_agn") return CleanerMode::cpc_agn;
  if (s == "cpc_awr") return CleanerMode::cpc_awr;
  throw std::invalid_argument("unknown cleaner_mode '" + s + "'");
}

const char* cleaner_mode_name(CleanerMode m) {
  switch (m) {
    case CleanerMode::gmm_agn: return "gmm_agn";
    case CleanerMode::gmm_awr: return "gmm_awr";
    case CleanerMode::cpc_agn: return "cpc_agn";
    case CleanerMode::cpc_awr: return "cpc_awr";
  }
  return "unknown";
}

int TrainerConfig::cpc_warmup_epochs() const {
  return static_cast<int>(std::ceil(cpc_warmup_frac * epochs));
}

void TrainerConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (warmup_epochs < 1) throw std::invalid_argument("warmup_epochs must be >= 1");
  if (!(cpc_warmup_frac >= 0.0 && cpc_warmup_frac < 1.0))
    throw std::invalid_argument("cpc_warmup_frac must be in [0,1)");
  if (cpc_warmup_epochs() >= epochs)
    throw std::invalid_argument("CPC warm-up must end before the last epoch");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0,1)");
  if (alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (lambda_u < 0.0) throw std::invalid_argument("lambda_u must be >= 0");
  if (!(sharpen_temperature > 0.0))
    throw std::invalid_argument("sharpen_temperature must be > 0");
  if (!(mixup_beta_a > 0.0)) throw std::invalid_argument("mixup_beta_a must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (self_labeling &&
      (cleaner_mode == CleanerMode::gmm_agn || cleaner_mode == CleanerMode::gmm_awr))
    throw std::invalid_argument("self_labeling requires a cpc cleaner_mode");
}

namespace {

Network build_net(const TrainerConfig& cfg, const NoisyDataset& train, int r) {
  NetworkConfig nc;
  nc.input_dim = train.base.dim();
  nc.num_classes = train.num_classes();
  nc.hidden = cfg.hidden;
  nc.embed_dim = cfg.embed_dim;
  nc.projector_depth = cfg.projector_depth;
  return Network(nc, derive_seed(cfg.seed, r == 0 ? "net1_init" : "net2_init"));
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<int>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<int>(i)) = m.row(rows[i]);
  return out;
}

double safe_auc(const std::vector<double>& scores, const std::vector<bool>& is_clean) {
  const bool any_clean = std::find(is_clean.begin(), is_clean.end(), true) != is_clean.end();
  const bool any_noise = std::find(is_clean.begin(), is_clean.end(), false) != is_clean.end();
  if (!any_clean || !any_noise) return -1.0;
  return auc(scores, is_clean);
}

}  // namespace

DualTrainer::DualTrainer(const TrainerConfig& cfg, const NoisyDataset& train,
                         const CleanDataset& test)
    : cfg_(cfg),
      train_(train),
      test_(test),
      nets_{build_net(cfg, train, 0), build_net(cfg, train, 1)},
      banks_{make_bank(train.num_classes(), nets_[0].config().embed_dim, cfg.tau, cfg.alpha),
             make_bank(train.num_classes(), nets_[1].config().embed_dim, cfg.tau, cfg.alpha)},
      net_opts_{SgdOptimizer(cfg.sgd), SgdOptimizer(cfg.sgd)},
      proj_opts_{SgdOptimizer(cfg.sgd), SgdOptimizer(cfg.sgd)},
      proto_opts_{SgdOptimizer(cfg.sgd), SgdOptimizer(cfg.sgd)},
      warmup_rngs_{Rng(derive_seed(cfg.seed, "warmup_net1")), Rng(derive_seed(cfg.seed, "warmup_net2"))},
      stage1_rngs_{Rng(derive_seed(cfg.seed, "stage1_net1")), Rng(derive_seed(cfg.seed, "stage1_net2"))},
      stage2_rngs_{Rng(derive_seed(cfg.seed, "stage2_net1")), Rng(derive_seed(cfg.seed, "stage2_net2"))} {
  cfg_.validate();
}

DualTrainer::BranchPass DualTrainer::full_pass(int r) const {
  const ForwardBatch fwd = nets_[r].forward(train_.base.features);
  BranchPass p;
  p.losses = per_sample_ce(fwd.logits, train_.observed_labels);
  p.probs = fwd.probs;
  p.embedding = fwd.embedding;
  return p;
}

std::vector<double> DualTrainer::normalized(const std::vector<double>& losses) const {
  if (!cfg_.normalize_losses) return losses;
  const auto [mn, mx] = std::minmax_element(losses.begin(), losses.end());
  const double span = *mx - *mn;
  if (span < 1e-12) return std::vector<double>(losses.size(), 0.0);
  std::vector<double> out(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) out[i] = (losses[i] - *mn) / span;
  return out;
}

void DualTrainer::warmup() {
  const int n = train_.size();
  for (int epoch = 0; epoch < cfg_.warmup_epochs; ++epoch) {
    for (int r = 0; r < 2; ++r) {
      const std::vector<int> order = shuffled_indices(n, warmup_rngs_[r]);
      for (int start = 0; start < n; start += cfg_.batch_size) {
        const int end = std::min(start + cfg_.batch_size, n);
        std::vector<int> rows(order.begin() + start, order.begin() + end);
        const Eigen::MatrixXd x = gather_rows(train_.base.features, rows);
        const ForwardBatch fwd = nets_[r].forward(x);

        Eigen::MatrixXd d_logits = fwd.probs;
        for (std::size_t i = 0; i < rows.size(); ++i)
          d_logits(static_cast<int>(i), train_.observed_labels[rows[i]]) -= 1.0;
        d_logits /= static_cast<double>(rows.size());

        BackpropSeed seed;
        seed.d_logits = d_logits;
        const NetworkGradients grads = nets_[r].backward(fwd, seed, false);
        sgd_step(nets_[r], grads, net_opts_[r], ParamGroup::backbone_and_classifier);
      }
    }
  }
}

EvrBreakdown DualTrainer::stage2(int r, const Partition& part) {
  if (part.clean_indices.empty())
    throw std::runtime_error("stage2: empty clean set; epoch aborted");

  const int other = 1 - r;
  // Co-divide data flow: the partition training net r must come from its peer.
  if (part.from_net != 0 && part.from_net != other + 1)
    throw std::logic_error("stage2: partition provenance violates co-divide");
  const int n_clean = static_cast<int>(part.clean_indices.size());
  const int n_noise = static_cast<int>(part.noise_indices.size());

  std::vector<int> clean_order = shuffled_indices(n_clean, stage2_rngs_[r]);
  std::vector<int> noise_order =
      n_noise > 0 ? shuffled_indices(n_noise, stage2_rngs_[r]) : std::vector<int>{};

  EvrBreakdown epoch_mean;
  int steps = 0;
  int noise_cursor = 0;
  for (int start = 0; start < n_clean; start += cfg_.batch_size) {
    const int end = std::min(start + cfg_.batch_size, n_clean);
    std::vector<int> x_rows, u_rows;
    std::vector<double> x_weights;
    for (int i = start; i < end; ++i) {
      const int pos = clean_order[i];
      x_rows.push_back(part.clean_indices[pos]);
      x_weights.push_back(part.clean_weights[pos]);
    }
    if (n_noise > 0) {
      for (int i = start; i < end; ++i) {
        u_rows.push_back(part.noise_indices[noise_order[noise_cursor]]);
        noise_cursor = (noise_cursor + 1) % n_noise;
      }
    }

    const Eigen::MatrixXd x_lab = gather_rows(train_.base.features, x_rows);
    std::vector<int> y_lab(x_rows.size());
    for (std::size_t i = 0; i < x_rows.size(); ++i) y_lab[i] = train_.observed_labels[x_rows[i]];

    // Co-refinement with the averaged predictions of both networks.
    const Eigen::MatrixXd probs_self = nets_[r].forward(x_lab).probs;
    const Eigen::MatrixXd probs_peer = nets_[other].forward(x_lab).probs;
    const Eigen::MatrixXd refined =
        refine_labels(y_lab, x_weights, 0.5 * (probs_self + probs_peer),
                      train_.num_classes(), cfg_.sharpen_temperature);

    Eigen::MatrixXd x_unlab(0, train_.base.dim()), guessed(0, train_.num_classes());
    if (!u_rows.empty()) {
      x_unlab = gather_rows(train_.base.features, u_rows);
      guessed = guess_labels(nets_[r].forward(x_unlab).probs, nets_[other].forward(x_unlab).probs,
                             cfg_.sharpen_temperature);
    }

    const VicinalBatch vb = build_vicinal_batch(x_lab, refined, x_unlab, guessed,
                                                cfg_.mixup_beta_a, stage2_rngs_[r]);
    const EvrBreakdown b = evr_step(nets_[r], net_opts_[r], vb, cfg_.lambda_u);
    epoch_mean.total += b.total;
    epoch_mean.labeled += b.labeled;
    epoch_mean.unlabeled += b.unlabeled;
    ++steps;
  }
  epoch_mean.total /= steps;
  epoch_mean.labeled /= steps;
  epoch_mean.unlabeled /= steps;
  epoch_mean.lambda_u = cfg_.lambda_u;
  return epoch_mean;
}

std::array<EpochRecord, 2> DualTrainer::run_epoch(int epoch) {
  const double lr_scale =
      epoch >= (cfg_.lr_drop_epoch >= 0 ? cfg_.lr_drop_epoch : cfg_.epochs / 2)
          ? cfg_.lr_drop_factor
          : 1.0;
  for (int r = 0; r < 2; ++r) {
    net_opts_[r].set_lr(cfg_.sgd.lr * lr_scale);
    proj_opts_[r].set_lr(cfg_.sgd.lr * lr_scale);
    proto_opts_[r].set_lr(cfg_.sgd.lr * lr_scale);
  }

  const auto& labels = train_.observed_labels;
  const int k_classes = train_.num_classes();
  const bool aware = cfg_.cleaner_mode == CleanerMode::gmm_awr ||
                     cfg_.cleaner_mode == CleanerMode::cpc_awr;
  const bool cpc_active = cfg_.cleaner_mode == CleanerMode::cpc_agn ||
                          cfg_.cleaner_mode == CleanerMode::cpc_awr;

  std::vector<bool> is_clean(train_.size());
  for (int i = 0; i < train_.size(); ++i) is_clean[i] = !train_.corrupted[i];

  // ---- stage 1: cleaner supervision crosses networks ----
  const std::array<BranchPass, 2> pass{full_pass(0), full_pass(1)};

  std::array<EpochRecord, 2> recs;
  std::array<Partition, 2> supervision;
  std::array<CleanerScores, 2> sup_scores;
  std::array<ConfidentSet, 2> confident;

  for (int r = 0; r < 2; ++r) {
    const int peer = 1 - r;
    const std::vector<double> peer_losses = normalized(pass[peer].losses);

    // Both GMM flavors measured every epoch; only the configured one
    // supervises the prototypes.
    const GmmFit agn_fit =
        fit_gmm_1d(peer_losses, cfg_.gmm_max_iter, cfg_.gmm_tol, cfg_.seed);
    ClassAwareGmm awr_fits;
    bool have_awr = false;
    if (!agn_fit.degenerate) {
      awr_fits = fit_class_aware(peer_losses, labels, k_classes, cfg_.gmm_max_iter,
                                 cfg_.gmm_tol, cfg_.seed);
      have_awr = true;
    }

    CleanerScores agn_scores{std::vector<double>(train_.size(), 1.0),
                             CleanerSource::gmm_agnostic};
    CleanerScores awr_scores{std::vector<double>(train_.size(), 1.0),
                             CleanerSource::gmm_aware};
    if (!agn_fit.degenerate) {
      for (int i = 0; i < train_.size(); ++i) {
        agn_scores.q_clean[i] = posterior_clean(agn_fit, peer_losses[i]);
        awr_scores.q_clean[i] = posterior_clean(awr_fits, peer_losses[i], labels[i]);
      }
    }

    EpochRecord& rec = recs[r];
    rec.epoch = epoch;
    rec.net = r + 1;
    rec.gmm_fit = agn_fit;
    rec.gmm_degenerate = agn_fit.degenerate;
    rec.gmm_fit.loglik_trace.clear();
    const KsReport ks =
        ks_heterogeneity(pass[peer].losses, labels, train_.corrupted, k_classes);
    rec.ks_frac_clean = ks.frac_clean_significant;
    rec.ks_frac_noise = ks.frac_noise_significant;
    if (aware && have_awr) {
      rec.gmm_fit_per_class = awr_fits.per_class;
      for (auto& f : rec.gmm_fit_per_class) f.loglik_trace.clear();
    }
    rec.auc_gmm_agn = agn_fit.degenerate ? -1.0 : safe_auc(agn_scores.q_clean, is_clean);
    rec.auc_gmm_awr = have_awr ? safe_auc(awr_scores.q_clean, is_clean) : -1.0;

    if (cfg_.self_labeling) {
      // Without a GMM there is no clean set to seed from; start prototypes
      // at per-label means over everything.
      if (!banks_[peer].initialized)
        init_prototypes(banks_[peer], pass[peer].embedding, labels, all_indices(train_.size()));
      supervision[r] = partition_self_label(banks_[peer], pass[peer].embedding, labels);
      sup_scores[r] = self_label_scores(banks_[peer], pass[peer].embedding, labels);
    } else if (agn_fit.degenerate) {
      // Degenerate loss distribution: fall back to the previous epoch's
      // partition (or everything-clean on the very first epoch).
      rec.used_fallback_partition = true;
      if (have_prev_supervision_[r]) {
        supervision[r] = prev_supervision_[r];
      } else {
        supervision[r].source =
            aware ? CleanerSource::gmm_aware : CleanerSource::gmm_agnostic;
        supervision[r].clean_indices.resize(train_.size());
        std::iota(supervision[r].clean_indices.begin(), supervision[r].clean_indices.end(), 0);
        supervision[r].clean_weights.assign(train_.size(), 1.0);
      }
      sup_scores[r].source = supervision[r].source;
      sup_scores[r].q_clean.assign(train_.size(), 1.0);
    } else {
      const CleanerScores& active = aware ? awr_scores : agn_scores;
      supervision[r] = partition_from_scores(active, cfg_.tau);
      sup_scores[r] = active;
    }
    supervision[r].from_net = peer + 1;
    rec.auc_supervision = safe_auc(sup_scores[r].q_clean, is_clean);
    rec.gmm_clean_size = static_cast<int>(supervision[r].clean_indices.size());
    rec.gmm_noise_size = static_cast<int>(supervision[r].noise_indices.size());
    prev_supervision_[r] = supervision[r];
    have_prev_supervision_[r] = true;
  }

  // Prototype/projector updates for both branches; supervision for branch r
  // comes from the peer network, embeddings from branch r's own projector.
  for (int r = 0; r < 2; ++r) {
    if (!banks_[r].initialized)
      init_prototypes(banks_[r], pass[r].embedding, labels, supervision[r].clean_indices);
    confident[r] = cfg_.alpha > 0.0
                       ? select_confident(supervision[r], pass[r].probs, labels)
                       : ConfidentSet{};
    recs[r].confident_size = static_cast<int>(confident[r].indices.size());
    const CpcUpdateStats stats =
        cpc_update(banks_[r], nets_[r], proto_opts_[r], proj_opts_[r], train_.base.features,
                   labels, supervision[r], confident[r], cfg_.batch_size, stage1_rngs_[r],
                   cfg_.exclude_confident_from_noise);
    recs[r].cpc_loss_total = stats.loss_total;
    recs[r].cpc_loss_clean = stats.loss_clean;
    recs[r].cpc_loss_noise = stats.loss_noise;
    recs[r].cpc_loss_confident = stats.loss_confident;
  }

  // Updated CPC re-divides the data; branch r is partitioned by the peer's
  // bank and embeddings.
  std::array<Partition, 2> cpc_parts;
  for (int r = 0; r < 2; ++r) {
    const int peer = 1 - r;
    const Eigen::MatrixXd fresh = nets_[peer].forward(train_.base.features).embedding;
    const CleanerScores scores = clean_scores(fresh, banks_[peer], labels);
    cpc_parts[r] = partition_from_scores(scores, cfg_.tau);
    cpc_parts[r].from_net = peer + 1;
    recs[r].auc_cpc = safe_auc(scores.q_clean, is_clean);
    recs[r].cpc_clean_size = static_cast<int>(cpc_parts[r].clean_indices.size());
    recs[r].cpc_noise_size = static_cast<int>(cpc_parts[r].noise_indices.size());
    recs[r].kld = kld_bernoulli(sup_scores[r].q_clean, scores.q_clean);
    recs[r].consistency = consistency_rate(sup_scores[r].q_clean, scores.q_clean, cfg_.tau);
  }

  // ---- stage 2 ----
  const int e_epochs = cfg_.cpc_warmup_epochs();
  for (int r = 0; r < 2; ++r) {
    const bool use_cpc = cpc_active && epoch >= e_epochs;
    const Partition& part = use_cpc ? cpc_parts[r] : supervision[r];
    recs[r].stage2_source = cleaner_source_name(part.source);
    last_stage2_[r] = part;
    const EvrBreakdown evr = stage2(r, part);
    recs[r].evr_total = evr.total;
    recs[r].evr_labeled = evr.labeled;
    recs[r].evr_unlabeled = evr.unlabeled;
    recs[r].evr_lambda_u = evr.lambda_u;
  }

  const double ens = test_accuracy_ensemble();
  for (int r = 0; r < 2; ++r) {
    recs[r].test_acc_ensemble = ens;
    recs[r].test_acc_net = test_accuracy_net(r);
  }
  return recs;
}

double DualTrainer::test_accuracy_net(int r) const {
  const ForwardBatch fwd = nets_[r].forward(test_.features);
  return accuracy(fwd.probs, test_.true_labels);
}

double DualTrainer::test_accuracy_ensemble() const {
  if (!cfg_.ensemble_inference) return test_accuracy_net(0);
  const Eigen::MatrixXd p0 = nets_[0].forward(test_.features).probs;
  const Eigen::MatrixXd p1 = nets_[1].forward(test_.features).probs;
  return accuracy(0.5 * (p0 + p1), test_.true_labels);
}

RunResult run(const TrainerConfig& cfg, const NoisyDataset& train, const CleanDataset& test,
              const std::string& out_dir, const std::string& config_key) {
  cfg.validate();
  RunResult result;
  DualTrainer trainer(cfg, train, test);
  trainer.warmup();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    try {
      const auto recs = trainer.run_epoch(epoch);
      result.records.push_back(recs[0]);
      result.records.push_back(recs[1]);
      result.epochs_completed = epoch + 1;
    } catch (const std::exception& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }
  }

  result.final_test_acc_ensemble = trainer.test_accuracy_ensemble();
  result.final_test_acc_net1 = trainer.test_accuracy_net(0);
  result.final_test_acc_net2 = trainer.test_accuracy_net(1);

  if (!out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    save_metrics_jsonl(result.records, out_dir + "/metrics.jsonl");

    RunSummary summary;
    summary.config_key = config_key;
    summary.cleaner_mode = std::string(cleaner_mode_name(cfg.cleaner_mode)) +
                           (cfg.self_labeling ? "_self" : "");
    summary.seed = cfg.seed;
    summary.epochs_completed = result.epochs_completed;
    summary.aborted = result.aborted;
    summary.abort_reason = result.abort_reason;
    summary.final_test_acc_ensemble = result.final_test_acc_ensemble;
    summary.final_test_acc_net1 = result.final_test_acc_net1;
    summary.final_test_acc_net2 = result.final_test_acc_net2;
    fill_summary_stats(summary, result.records);
    save_summary_json(summary, out_dir + "/summary.json");

    save_checkpoint(trainer.network(0), out_dir + "/net1.json");
    save_checkpoint(trainer.network(1), out_dir + "/net2.json");
    save_bank(trainer.bank(0), out_dir + "/bank1.json");
    save_bank(trainer.bank(1), out_dir + "/bank2.json");
  }
  return result;
}

}  // namespace noisylab
