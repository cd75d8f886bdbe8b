#include "noisylab/semisup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace noisylab {

Eigen::MatrixXd sharpen_rows(const Eigen::MatrixXd& probs, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("sharpen_rows: temperature must be > 0");
  Eigen::MatrixXd out(probs.rows(), probs.cols());
  const double inv_t = 1.0 / temperature;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    // Work relative to the row maximum so p^(1/T) cannot underflow to an
    // all-zero row at low temperatures.
    const double mx = probs.row(i).maxCoeff();
    if (!(mx > 0.0)) throw std::invalid_argument("sharpen_rows: row is not a distribution");
    Eigen::ArrayXd p = (probs.row(i).array().max(0.0) / mx).pow(inv_t);
    out.row(i) = (p / p.sum()).matrix();
  }
  return out;
}

Eigen::MatrixXd refine_labels(const std::vector<int>& labels, const std::vector<double>& weights,
                              const Eigen::MatrixXd& mean_probs, int num_classes,
                              double temperature) {
  const Eigen::Index n = mean_probs.rows();
  if (static_cast<Eigen::Index>(labels.size()) != n ||
      static_cast<Eigen::Index>(weights.size()) != n)
    throw std::invalid_argument("refine_labels: size mismatch");

  Eigen::MatrixXd refined(n, num_classes);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights[i];
    if (!(w > 0.0 && w <= 1.0))
      throw std::invalid_argument("refine_labels: weights must be in (0,1]");
    refined.row(i) = (1.0 - w) * mean_probs.row(i);
    refined(i, labels[i]) += w;
  }
  return sharpen_rows(refined, temperature);
}

Eigen::MatrixXd guess_labels(const Eigen::MatrixXd& probs_a, const Eigen::MatrixXd& probs_b,
                             double temperature) {
  if (probs_a.rows() != probs_b.rows() || probs_a.cols() != probs_b.cols())
    throw std::invalid_argument("guess_labels: shape mismatch");
  return sharpen_rows(0.5 * (probs_a + probs_b), temperature);
}

double sample_mixup_lambda(double beta_a, Rng& rng) {
  if (!(beta_a > 0.0)) throw std::invalid_argument("sample_mixup_lambda: beta_a must be > 0");
  std::gamma_distribution<double> gamma(beta_a, 1.0);
  const double g1 = gamma(rng);
  const double g2 = gamma(rng);
  const double lam = (g1 + g2) > 0.0 ? g1 / (g1 + g2) : 0.5;
  return std::max(lam, 1.0 - lam);
}

MixedPair mix_with_lambda(const Eigen::VectorXd& xi, const Eigen::VectorXd& yi,
                          const Eigen::VectorXd& xj, const Eigen::VectorXd& yj, double lambda) {
  MixedPair out;
  out.lambda = lambda;
  out.x = lambda * xi + (1.0 - lambda) * xj;
  out.y = lambda * yi + (1.0 - lambda) * yj;
  return out;
}

MixedPair mixup_pair(const Eigen::VectorXd& xi, const Eigen::VectorXd& yi,
                     const Eigen::VectorXd& xj, const Eigen::VectorXd& yj, double beta_a,
                     Rng& rng) {
  return mix_with_lambda(xi, yi, xj, yj, sample_mixup_lambda(beta_a, rng));
}

VicinalBatch build_vicinal_batch(const Eigen::MatrixXd& x_lab, const Eigen::MatrixXd& y_lab,
                                 const Eigen::MatrixXd& x_unlab, const Eigen::MatrixXd& y_unlab,
                                 double beta_a, Rng& rng) {
  const Eigen::Index nl = x_lab.rows();
  const Eigen::Index nu = x_unlab.rows();
  if (nl == 0) throw std::invalid_argument("build_vicinal_batch: labeled rows required");
  const Eigen::Index n = nl + nu;

  Eigen::MatrixXd x(n, x_lab.cols());
  Eigen::MatrixXd y(n, y_lab.cols());
  x.topRows(nl) = x_lab;
  y.topRows(nl) = y_lab;
  if (nu > 0) {
    x.bottomRows(nu) = x_unlab;
    y.bottomRows(nu) = y_unlab;
  }

  std::vector<int> partner(n);
  std::iota(partner.begin(), partner.end(), 0);
  std::shuffle(partner.begin(), partner.end(), rng);

  VicinalBatch out;
  out.x_labeled.resize(nl, x.cols());
  out.y_labeled.resize(nl, y.cols());
  out.x_unlabeled.resize(nu, x.cols());
  out.y_unlabeled.resize(nu, y.cols());
  out.lambdas.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lam = sample_mixup_lambda(beta_a, rng);
    const Eigen::Index j = partner[i];
    out.lambdas[i] = lam;
    if (i < nl) {
      out.x_labeled.row(i) = lam * x.row(i) + (1.0 - lam) * x.row(j);
      out.y_labeled.row(i) = lam * y.row(i) + (1.0 - lam) * y.row(j);
    } else {
      out.x_unlabeled.row(i - nl) = lam * x.row(i) + (1.0 - lam) * x.row(j);
      out.y_unlabeled.row(i - nl) = lam * y.row(i) + (1.0 - lam) * y.row(j);
    }
  }
  return out;
}

namespace {

struct EvrEval {
  EvrBreakdown breakdown;
  Eigen::MatrixXd d_logits_labeled;
  Eigen::MatrixXd d_logits_unlabeled;
};

EvrEval evr_eval(const Network& net, const ForwardBatch& fwd_lab, const ForwardBatch* fwd_unlab,
                 const VicinalBatch& batch, double lambda_u) {
  EvrEval ev;
  const Eigen::Index nl = batch.x_labeled.rows();
  const int k_classes = net.config().num_classes;

  // Labeled: CE with soft targets, gradient (p - t)/nl.
  double ce = 0.0;
  for (Eigen::Index i = 0; i < nl; ++i) {
    const double m = fwd_lab.logits.row(i).maxCoeff();
    const double lse = m + std::log((fwd_lab.logits.row(i).array() - m).exp().sum());
    for (int k = 0; k < k_classes; ++k)
      ce -= batch.y_labeled(i, k) * (fwd_lab.logits(i, k) - lse);
  }
  ce /= static_cast<double>(nl);
  ev.d_logits_labeled = (fwd_lab.probs - batch.y_labeled) / static_cast<double>(nl);

  // Unlabeled: per-class MSE between probs and targets, through softmax.
  double mse = 0.0;
  const Eigen::Index nu = batch.x_unlabeled.rows();
  if (nu > 0 && fwd_unlab != nullptr) {
    const Eigen::MatrixXd diff = fwd_unlab->probs - batch.y_unlabeled;
    mse = diff.array().square().sum() / static_cast<double>(nu * k_classes);
    // dL/dp = 2*diff/(nu*K); through the softmax Jacobian:
    // dL/dz = p .* (g - sum(g .* p)).
    const Eigen::MatrixXd g = (2.0 / static_cast<double>(nu * k_classes)) * diff;
    Eigen::MatrixXd d(nu, k_classes);
    for (Eigen::Index i = 0; i < nu; ++i) {
      const double dot = g.row(i).dot(fwd_unlab->probs.row(i));
      d.row(i) = fwd_unlab->probs.row(i).cwiseProduct(
          (g.row(i).array() - dot).matrix());
    }
    ev.d_logits_unlabeled = lambda_u * d;
  }

  ev.breakdown.labeled = ce;
  ev.breakdown.unlabeled = mse;
  ev.breakdown.lambda_u = lambda_u;
  ev.breakdown.total = ce + lambda_u * mse;
  return ev;
}

}  // namespace

EvrBreakdown evr_loss(const Network& net, const VicinalBatch& batch, double lambda_u) {
  if (lambda_u < 0.0) throw std::invalid_argument("evr_loss: lambda_u must be >= 0");
  const ForwardBatch fwd_lab = net.forward(batch.x_labeled);
  if (batch.x_unlabeled.rows() > 0) {
    const ForwardBatch fwd_unlab = net.forward(batch.x_unlabeled);
    return evr_eval(net, fwd_lab, &fwd_unlab, batch, lambda_u).breakdown;
  }
  return evr_eval(net, fwd_lab, nullptr, batch, lambda_u).breakdown;
}

std::pair<EvrBreakdown, NetworkGradients> evr_gradients(const Network& net,
                                                        const VicinalBatch& batch,
                                                        double lambda_u) {
  if (lambda_u < 0.0) throw std::invalid_argument("evr_gradients: lambda_u must be >= 0");
  if (batch.x_labeled.rows() == 0)
    throw std::invalid_argument("evr_gradients: labeled rows required");

  const ForwardBatch fwd_lab = net.forward(batch.x_labeled);
  ForwardBatch fwd_unlab;
  const bool has_unlab = batch.x_unlabeled.rows() > 0;
  if (has_unlab) fwd_unlab = net.forward(batch.x_unlabeled);

  const EvrEval ev = evr_eval(net, fwd_lab, has_unlab ? &fwd_unlab : nullptr, batch, lambda_u);

  BackpropSeed seed_lab;
  seed_lab.d_logits = ev.d_logits_labeled;
  NetworkGradients grads = net.backward(fwd_lab, seed_lab, /*stop_at_projector_input=*/false);

  if (has_unlab) {
    BackpropSeed seed_unlab;
    seed_unlab.d_logits = ev.d_logits_unlabeled;
    const NetworkGradients gu = net.backward(fwd_unlab, seed_unlab, false);
    for (std::size_t i = 0; i < grads.backbone.size(); ++i) {
      grads.backbone[i].weight += gu.backbone[i].weight;
      grads.backbone[i].bias += gu.backbone[i].bias;
    }
    grads.classifier.weight += gu.classifier.weight;
    grads.classifier.bias += gu.classifier.bias;
  }
  return {ev.breakdown, std::move(grads)};
}

EvrBreakdown evr_step(Network& net, SgdOptimizer& opt, const VicinalBatch& batch,
                      double lambda_u) {
  auto [breakdown, grads] = evr_gradients(net, batch, lambda_u);
  if (!std::isfinite(breakdown.total))
    throw std::runtime_error("evr_step: non-finite loss; aborting epoch");
  sgd_step(net, grads, opt, ParamGroup::backbone_and_classifier);
  return breakdown;
}

}  // namespace noisylab
