#include "noisylab/prototype_cleaner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace noisylab {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// softplus(x) = log(1 + e^x), computed without overflow.
double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

void check_members(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                   const PrototypeBank& bank, const char* where) {
  if (embeddings.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument(std::string(where) + ": embeddings/labels mismatch");
  if (embeddings.cols() != bank.embed_dim())
    throw std::invalid_argument(std::string(where) + ": embedding dim mismatch");
  for (int y : labels)
    if (y < 0 || y >= bank.num_classes())
      throw std::invalid_argument(std::string(where) + ": label out of range");
}

}  // namespace

PrototypeBank make_bank(int num_classes, int embed_dim, double tau, double alpha) {
  if (num_classes < 1 || embed_dim < 1)
    throw std::invalid_argument("make_bank: bad shape");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("make_bank: tau must be in (0,1)");
  PrototypeBank bank;
  bank.prototypes = Eigen::MatrixXd::Zero(num_classes, embed_dim);
  bank.tau = tau;
  bank.alpha = alpha;
  bank.lambda_neg = 1.0 / num_classes;
  return bank;
}

void init_prototypes(PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                     const std::vector<int>& labels, const std::vector<int>& indices) {
  const int k_classes = bank.num_classes();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k_classes, bank.embed_dim());
  std::vector<int> counts(k_classes, 0);
  for (int i : indices) {
    sums.row(labels[i]) += embeddings.row(i);
    ++counts[labels[i]];
  }
  for (int k = 0; k < k_classes; ++k) {
    if (counts[k] > 0) {
      bank.prototypes.row(k) = sums.row(k) / counts[k];
      continue;
    }
    // No clean representative: fall back to all samples with this label.
    Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(bank.embed_dim());
    int c = 0;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
      if (labels[i] == k) {
        sum += embeddings.row(i);
        ++c;
      }
    }
    bank.prototypes.row(k) = c > 0 ? (sum / c).eval() : Eigen::RowVectorXd::Zero(bank.embed_dim()).eval();
  }
  bank.initialized = true;
}

double clean_score(const Eigen::VectorXd& embedding, const PrototypeBank& bank, int label) {
  if (label < 0 || label >= bank.num_classes())
    throw std::invalid_argument("clean_score: label out of range");
  if (embedding.size() != bank.embed_dim())
    throw std::invalid_argument("clean_score: embedding dim mismatch");
  return sigmoid(embedding.dot(bank.prototypes.row(label)));
}

CleanerScores clean_scores(const Eigen::MatrixXd& embeddings, const PrototypeBank& bank,
                           const std::vector<int>& labels) {
  check_members(embeddings, labels, bank, "clean_scores");
  CleanerScores s;
  s.source = CleanerSource::cpc;
  s.q_clean.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    s.q_clean[i] = sigmoid(embeddings.row(i).dot(bank.prototypes.row(labels[i])));
  return s;
}

Partition partition_cpc(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                        const std::vector<int>& labels, double tau) {
  return partition_from_scores(clean_scores(embeddings, bank, labels), tau);
}

CleanerScores self_label_scores(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                                const std::vector<int>& labels) {
  check_members(embeddings, labels, bank, "self_label_scores");
  CleanerScores s;
  s.source = CleanerSource::self_label;
  s.q_clean.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    s.q_clean[i] = sigmoid(embeddings.row(i).dot(bank.prototypes.row(labels[i])));
  return s;
}

Partition partition_self_label(const PrototypeBank& bank, const Eigen::MatrixXd& embeddings,
                               const std::vector<int>& labels) {
  check_members(embeddings, labels, bank, "partition_self_label");
  Partition p;
  p.source = CleanerSource::self_label;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    Eigen::Index best = 0;
    (bank.prototypes * embeddings.row(i).transpose()).maxCoeff(&best);
    if (static_cast<int>(best) == labels[i]) {
      p.clean_indices.push_back(i);
      p.clean_weights.push_back(
          sigmoid(embeddings.row(i).dot(bank.prototypes.row(labels[i]))));
    } else {
      p.noise_indices.push_back(i);
    }
  }
  return p;
}

CpcLoss loss_clean_set(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                       const PrototypeBank& bank) {
  check_members(embeddings, labels, bank, "loss_clean_set");
  CpcLoss out;
  out.d_prototypes = Eigen::MatrixXd::Zero(bank.num_classes(), bank.embed_dim());
  out.d_embeddings = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
  const Eigen::Index m = embeddings.rows();
  if (m == 0) {
    out.empty_set = true;
    return out;
  }

  const double lam = bank.lambda_neg;
  const Eigen::MatrixXd t = embeddings * bank.prototypes.transpose();  // M x K
  Eigen::MatrixXd coef(m, bank.num_classes());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = labels[i];
    for (int k = 0; k < bank.num_classes(); ++k) {
      const double s = sigmoid(t(i, k));
      if (k == y) {
        loss += softplus(-t(i, k));  // -log s(t)
        coef(i, k) = s - 1.0;
      } else {
        loss += lam * softplus(t(i, k));  // -log(1 - s(t))
        coef(i, k) = lam * s;
      }
    }
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.value = loss * inv_m;
  out.d_prototypes = inv_m * (coef.transpose() * embeddings);
  out.d_embeddings = inv_m * (coef * bank.prototypes);
  return out;
}

CpcLoss loss_noise_set(const Eigen::MatrixXd& embeddings, const std::vector<int>& labels,
                       const PrototypeBank& bank) {
  check_members(embeddings, labels, bank, "loss_noise_set");
  CpcLoss out;
  out.d_prototypes = Eigen::MatrixXd::Zero(bank.num_classes(), bank.embed_dim());
  out.d_embeddings = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
  const Eigen::Index m = embeddings.rows();
  if (m == 0) {
    out.empty_set = true;
    return out;
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int y = labels[i];
    const double t = embeddings.row(i).dot(bank.prototypes.row(y));
    loss += softplus(t);  // -log(1 - s(t))
    const double c = sigmoid(t) * inv_m;
    out.d_prototypes.row(y) += c * embeddings.row(i);
    out.d_embeddings.row(i) += c * bank.prototypes.row(y);
  }
  out.value = loss * inv_m;
  return out;
}

CpcLoss loss_confident_set(const Eigen::MatrixXd& embeddings,
                           const std::vector<int>& pseudo_labels, const PrototypeBank& bank) {
  check_members(embeddings, pseudo_labels, bank, "loss_confident_set");
  CpcLoss out;
  out.d_prototypes = Eigen::MatrixXd::Zero(bank.num_classes(), bank.embed_dim());
  out.d_embeddings = Eigen::MatrixXd::Zero(embeddings.rows(), embeddings.cols());
  const Eigen::Index m = embeddings.rows();
  if (m == 0) {
    out.empty_set = true;
    return out;
  }

  const double inv_m = 1.0 / static_cast<double>(m);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const int k = pseudo_labels[i];
    const double t = embeddings.row(i).dot(bank.prototypes.row(k));
    loss += softplus(-t);  // -log s(t)
    const double c = (sigmoid(t) - 1.0) * inv_m;
    out.d_prototypes.row(k) += c * embeddings.row(i);
    out.d_embeddings.row(i) += c * bank.prototypes.row(k);
  }
  out.value = loss * inv_m;
  return out;
}

ConfidentSet select_confident(const Partition& supervision, const Eigen::MatrixXd& probs,
                              const std::vector<int>& labels) {
  const int k_classes = static_cast<int>(probs.cols());
  std::vector<double> sum(k_classes, 0.0);
  std::vector<int> count(k_classes, 0);
  for (int i : supervision.clean_indices) {
    const int y = labels[i];
    sum[y] += probs(i, y);
    ++count[y];
  }
  std::vector<double> threshold(k_classes, std::numeric_limits<double>::infinity());
  for (int k = 0; k < k_classes; ++k)
    if (count[k] > 0) threshold[k] = sum[k] / count[k];

  ConfidentSet cs;
  for (int i : supervision.noise_indices) {
    Eigen::Index arg = 0;
    const double top = probs.row(i).maxCoeff(&arg);
    if (top > threshold[static_cast<int>(arg)]) {
      cs.indices.push_back(i);
      cs.pseudo_labels.push_back(static_cast<int>(arg));
    }
  }
  return cs;
}

CpcUpdateStats cpc_update(PrototypeBank& bank, Network& net, SgdOptimizer& proto_opt,
                          SgdOptimizer& proj_opt, const Eigen::MatrixXd& inputs,
                          const std::vector<int>& labels, const Partition& supervision,
                          const ConfidentSet& confident_in, int batch_size, Rng& rng,
                          bool exclude_confident_from_noise) {
  if (batch_size < 1) throw std::invalid_argument("cpc_update: batch_size must be >= 1");

  // With a zero confident-set weight the members must not participate at
  // all, so a pass with alpha == 0 is bit-identical to one without them.
  const ConfidentSet empty_confident;
  const ConfidentSet& confident = bank.alpha > 0.0 ? confident_in : empty_confident;

  enum Role { kClean, kNoise, kConfident };
  struct Member {
    int index;
    Role role;
    int target;  // label (clean/noise) or pseudo-label (confident)
  };

  std::unordered_set<int> confident_set(confident.indices.begin(), confident.indices.end());
  std::vector<Member> members;
  members.reserve(supervision.clean_indices.size() + supervision.noise_indices.size() +
                  confident.indices.size());
  for (int i : supervision.clean_indices) members.push_back({i, kClean, labels[i]});
  for (int i : supervision.noise_indices) {
    if (exclude_confident_from_noise && confident_set.count(i)) continue;
    members.push_back({i, kNoise, labels[i]});
  }
  for (std::size_t j = 0; j < confident.indices.size(); ++j)
    members.push_back({confident.indices[j], kConfident, confident.pseudo_labels[j]});

  CpcUpdateStats stats;
  stats.clean_set_empty = supervision.clean_indices.empty();
  stats.noise_set_empty = supervision.noise_indices.empty();
  if (members.empty()) return stats;

  std::shuffle(members.begin(), members.end(), rng);

  const int n = static_cast<int>(members.size());
  for (int start = 0; start < n; start += batch_size) {
    const int end = std::min(start + batch_size, n);
    std::vector<int> b_clean_rows, b_noise_rows, b_conf_rows;
    Eigen::MatrixXd x(end - start, inputs.cols());
    for (int i = start; i < end; ++i) {
      x.row(i - start) = inputs.row(members[i].index);
      switch (members[i].role) {
        case kClean: b_clean_rows.push_back(i - start); break;
        case kNoise: b_noise_rows.push_back(i - start); break;
        case kConfident: b_conf_rows.push_back(i - start); break;
      }
    }

    const ForwardBatch fwd = net.forward(x);

    auto gather = [&](const std::vector<int>& rows, Eigen::MatrixXd& e, std::vector<int>& y) {
      e.resize(static_cast<int>(rows.size()), fwd.embedding.cols());
      y.resize(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) {
        e.row(static_cast<int>(r)) = fwd.embedding.row(rows[r]);
        y[r] = members[start + rows[r]].target;
      }
    };
    Eigen::MatrixXd e_clean, e_noise, e_conf;
    std::vector<int> y_clean, y_noise, y_conf;
    gather(b_clean_rows, e_clean, y_clean);
    gather(b_noise_rows, e_noise, y_noise);
    gather(b_conf_rows, e_conf, y_conf);

    const CpcLoss lc = loss_clean_set(e_clean, y_clean, bank);
    const CpcLoss ln = loss_noise_set(e_noise, y_noise, bank);
    const CpcLoss lp = loss_confident_set(e_conf, y_conf, bank);
    const double total = lc.value + ln.value + bank.alpha * lp.value;
    if (!std::isfinite(total))
      throw std::runtime_error("cpc_update: non-finite prototype loss; aborting epoch");

    Eigen::MatrixXd d_proto =
        lc.d_prototypes + ln.d_prototypes + bank.alpha * lp.d_prototypes;
    Eigen::MatrixXd d_embed = Eigen::MatrixXd::Zero(x.rows(), fwd.embedding.cols());
    for (std::size_t r = 0; r < b_clean_rows.size(); ++r)
      d_embed.row(b_clean_rows[r]) += lc.d_embeddings.row(static_cast<int>(r));
    for (std::size_t r = 0; r < b_noise_rows.size(); ++r)
      d_embed.row(b_noise_rows[r]) += ln.d_embeddings.row(static_cast<int>(r));
    for (std::size_t r = 0; r < b_conf_rows.size(); ++r)
      d_embed.row(b_conf_rows[r]) += bank.alpha * lp.d_embeddings.row(static_cast<int>(r));

    BackpropSeed seed;
    seed.d_embedding = d_embed;
    const NetworkGradients grads = net.backward(fwd, seed, /*stop_at_projector_input=*/true);

    proto_opt.step(bank.prototypes.data(), d_proto.data(), bank.prototypes.size(), 0,
                   "prototypes");
    sgd_step(net, grads, proj_opt, ParamGroup::projector);

    stats.loss_total += total;
    stats.loss_clean += lc.value;
    stats.loss_noise += ln.value;
    stats.loss_confident += lp.value;
    ++stats.batches;
  }

  if (stats.batches > 0) {
    stats.loss_total /= stats.batches;
    stats.loss_clean /= stats.batches;
    stats.loss_noise /= stats.batches;
    stats.loss_confident /= stats.batches;
  }
  return stats;
}

void save_bank(const PrototypeBank& bank, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["num_classes"] = bank.num_classes();
  j["embed_dim"] = bank.embed_dim();
  j["tau"] = bank.tau;
  j["alpha"] = bank.alpha;
  j["initialized"] = bank.initialized;
  std::vector<double> c(bank.prototypes.data(), bank.prototypes.data() + bank.prototypes.size());
  j["prototypes"] = c;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_bank: cannot open " + path);
  out << j.dump() << "\n";
}

PrototypeBank load_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_bank: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("load_bank: unsupported schema_version");
  const int k = j.at("num_classes").get<int>();
  const int d = j.at("embed_dim").get<int>();
  PrototypeBank bank = make_bank(k, d, j.at("tau").get<double>(), j.at("alpha").get<double>());
  auto c = j.at("prototypes").get<std::vector<double>>();
  if (static_cast<int>(c.size()) != k * d) throw std::runtime_error("load_bank: shape mismatch");
  bank.prototypes = Eigen::Map<Eigen::MatrixXd>(c.data(), k, d);
  bank.initialized = j.at("initialized").get<bool>();
  return bank;
}

}  // namespace noisylab
