#include "noisylab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace noisylab {

double auc(const std::vector<double>& scores, const std::vector<bool>& is_clean) {
  if (scores.size() != is_clean.size())
    throw std::invalid_argument("auc: scores/labels length mismatch");
  const int n = static_cast<int>(scores.size());
  long long n_pos = std::count(is_clean.begin(), is_clean.end(), true);
  long long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("auc: both classes must be present");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return scores[a] < scores[b]; });

  // Average ranks over tie groups, accumulate positive-class rank sum.
  double pos_rank_sum = 0.0;
  int i = 0;
  while (i < n) {
    int j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * ((i + 1) + j);  // ranks are 1-based
    for (int t = i; t < j; ++t)
      if (is_clean[order[t]]) pos_rank_sum += avg_rank;
    i = j;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  // Small-lambda branch via the theta-function form of the CDF; the
  // alternating series only converges usefully for larger arguments.
  if (lambda < 1.18) {
    const double pi2 = M_PI * M_PI;
    double cdf = 0.0;
    for (int j = 1; j <= 20; ++j) {
      const double k = 2.0 * j - 1.0;
      const double term = std::exp(-k * k * pi2 / (8.0 * lambda * lambda));
      cdf += term;
      if (term < 1e-18) break;
    }
    cdf *= std::sqrt(2.0 * M_PI) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    sign = -sign;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("ks_two_sample: need at least 2 points per sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t ia = 0, ib = 0;
  double fa = 0.0, fb = 0.0, d = 0.0;
  while (ia < a.size() && ib < b.size()) {
    const double xa = a[ia];
    const double xb = b[ib];
    const double x = std::min(xa, xb);
    while (ia < a.size() && a[ia] == x) fa = ++ia / na;
    while (ib < b.size() && b[ib] == x) fb = ++ib / nb;
    d = std::max(d, std::abs(fa - fb));
  }

  const double en = std::sqrt(na * nb / (na + nb));
  KsResult r;
  r.statistic = d;
  r.p_value = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
  return r;
}

double kld_bernoulli(const std::vector<double>& q_prime, const std::vector<double>& q) {
  if (q_prime.size() != q.size())
    throw std::invalid_argument("kld_bernoulli: length mismatch");
  if (q_prime.empty()) throw std::invalid_argument("kld_bernoulli: empty input");
  constexpr double eps = 1e-6;
  auto clamp01 = [=](double v) { return std::clamp(v, eps, 1.0 - eps); };
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double p = clamp01(q_prime[i]);
    const double r = clamp01(q[i]);
    sum += p * std::log(p / r) + (1.0 - p) * std::log((1.0 - p) / (1.0 - r));
  }
  return sum / static_cast<double>(q.size());
}

double consistency_rate(const std::vector<double>& q_prime, const std::vector<double>& q,
                        double tau) {
  if (q_prime.size() != q.size())
    throw std::invalid_argument("consistency_rate: length mismatch");
  if (q_prime.empty()) throw std::invalid_argument("consistency_rate: empty input");
  long long agree = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if ((q_prime[i] > tau) == (q[i] > tau)) ++agree;
  return static_cast<double>(agree) / static_cast<double>(q.size());
}

double accuracy(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  if (probs.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("accuracy: rows/labels mismatch");
  if (labels.empty()) throw std::invalid_argument("accuracy: empty input");
  long long correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

KsReport ks_heterogeneity(const std::vector<double>& losses, const std::vector<int>& labels,
                          const std::vector<bool>& corrupted, int num_classes, double alpha) {
  const std::size_t n = losses.size();
  if (labels.size() != n || corrupted.size() != n)
    throw std::invalid_argument("ks_heterogeneity: length mismatch");

  std::vector<double> all_clean, all_noise;
  for (std::size_t i = 0; i < n; ++i)
    (corrupted[i] ? all_noise : all_clean).push_back(losses[i]);

  KsReport rep;
  int clean_valid = 0, clean_sig = 0, noise_valid = 0, noise_sig = 0;
  for (int k = 0; k < num_classes; ++k) {
    KsClassEntry e;
    e.class_id = k;
    std::vector<double> cls_clean, cls_noise;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] != k) continue;
      (corrupted[i] ? cls_noise : cls_clean).push_back(losses[i]);
    }
    if (cls_clean.size() >= 2 && all_clean.size() >= 2) {
      e.clean = ks_two_sample(cls_clean, all_clean);
      e.clean_valid = true;
      ++clean_valid;
      if (e.clean.p_value < alpha) ++clean_sig;
    }
    if (cls_noise.size() >= 2 && all_noise.size() >= 2) {
      e.noise = ks_two_sample(cls_noise, all_noise);
      e.noise_valid = true;
      ++noise_valid;
      if (e.noise.p_value < alpha) ++noise_sig;
    }
    rep.per_class.push_back(e);
  }
  rep.frac_clean_significant = clean_valid ? static_cast<double>(clean_sig) / clean_valid : 0.0;
  rep.frac_noise_significant = noise_valid ? static_cast<double>(noise_sig) / noise_valid : 0.0;
  return rep;
}

}  // namespace noisylab
