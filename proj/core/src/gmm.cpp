#include "noisylab/gmm.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace noisylab {

namespace {

constexpr double kSigmaFloor = 1e-4;
constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5*log(2*pi)

double log_normal_pdf(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return -0.5 * z * z - std::log(sigma) - kHalfLog2Pi;
}

struct SideMoments {
  double mean;
  double sd;
};

SideMoments moments(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  const double n = static_cast<double>(end - begin);
  double mean = 0.0;
  for (std::size_t i = begin; i < end; ++i) mean += v[i];
  mean /= n;
  double var = 0.0;
  for (std::size_t i = begin; i < end; ++i) var += (v[i] - mean) * (v[i] - mean);
  var /= n;
  return {mean, std::max(std::sqrt(var), kSigmaFloor)};
}

}  // namespace

GmmFit fit_gmm_1d(const std::vector<double>& losses, int max_iter, double tol,
                  std::uint64_t /*seed*/) {
  const std::size_t n = losses.size();
  if (n < 4) throw std::invalid_argument("fit_gmm_1d: need at least 4 samples");
  for (double l : losses)
    if (!std::isfinite(l) || l < 0.0)
      throw std::invalid_argument("fit_gmm_1d: losses must be finite and nonnegative");

  std::vector<double> sorted(losses);
  std::sort(sorted.begin(), sorted.end());

  GmmFit fit;
  if (sorted.back() - sorted.front() < 1e-12) {
    fit.degenerate = true;
    fit.mu0 = fit.mu1 = sorted.front();
    fit.sigma0 = fit.sigma1 = kSigmaFloor;
    fit.phi0 = fit.phi1 = 0.5;
    return fit;
  }

  // Median split on the sorted order keeps both sides nonempty under ties.
  const std::size_t half = n / 2;
  const SideMoments lo = moments(sorted, 0, half);
  const SideMoments hi = moments(sorted, half, n);
  fit.mu0 = lo.mean;
  fit.sigma0 = lo.sd;
  fit.mu1 = hi.mean;
  fit.sigma1 = hi.sd;
  fit.phi0 = static_cast<double>(half) / n;
  fit.phi1 = 1.0 - fit.phi0;

  std::vector<double> resp(n);  // responsibility of component 0
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    const double lphi0 = std::log(std::max(fit.phi0, 1e-12));
    const double lphi1 = std::log(std::max(fit.phi1, 1e-12));

    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = lphi0 + log_normal_pdf(losses[i], fit.mu0, fit.sigma0);
      const double b = lphi1 + log_normal_pdf(losses[i], fit.mu1, fit.sigma1);
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      resp[i] = std::exp(a - lse);
      ll += lse;
    }
    fit.loglik_trace.push_back(ll);
    assert(ll >= prev_ll - 1e-9);  // EM never decreases the likelihood
    fit.iterations = iter + 1;
    fit.log_likelihood = ll;
    if (std::abs(ll - prev_ll) < tol) break;
    prev_ll = ll;

    double r0 = std::accumulate(resp.begin(), resp.end(), 0.0);
    r0 = std::clamp(r0, 1e-12, n - 1e-12);
    const double r1 = n - r0;
    double mu0 = 0.0, mu1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      mu0 += resp[i] * losses[i];
      mu1 += (1.0 - resp[i]) * losses[i];
    }
    mu0 /= r0;
    mu1 /= r1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v0 += resp[i] * (losses[i] - mu0) * (losses[i] - mu0);
      v1 += (1.0 - resp[i]) * (losses[i] - mu1) * (losses[i] - mu1);
    }
    fit.mu0 = mu0;
    fit.mu1 = mu1;
    fit.sigma0 = std::max(std::sqrt(v0 / r0), kSigmaFloor);
    fit.sigma1 = std::max(std::sqrt(v1 / r1), kSigmaFloor);
    fit.phi0 = r0 / n;
    fit.phi1 = 1.0 - fit.phi0;
  }

  if (fit.mu0 > fit.mu1) {
    std::swap(fit.mu0, fit.mu1);
    std::swap(fit.sigma0, fit.sigma1);
    std::swap(fit.phi0, fit.phi1);
  }
  return fit;
}

double posterior_clean(const GmmFit& fit, double loss) {
  if (fit.degenerate)
    throw std::invalid_argument(
        "posterior_clean: degenerate fit; treat all samples as a single component");
  const double a = std::log(std::max(fit.phi0, 1e-12)) + log_normal_pdf(loss, fit.mu0, fit.sigma0);
  const double b = std::log(std::max(fit.phi1, 1e-12)) + log_normal_pdf(loss, fit.mu1, fit.sigma1);
  const double m = std::max(a, b);
  const double q = std::exp(a - m) / (std::exp(a - m) + std::exp(b - m));
  return std::clamp(q, 0.0, 1.0);
}

ClassAwareGmm fit_class_aware(const std::vector<double>& losses, const std::vector<int>& labels,
                              int num_classes, int max_iter, double tol, std::uint64_t seed) {
  if (losses.size() != labels.size())
    throw std::invalid_argument("fit_class_aware: losses/labels length mismatch");

  ClassAwareGmm out;
  out.global = fit_gmm_1d(losses, max_iter, tol, seed);
  out.per_class.resize(num_classes);
  out.fell_back.assign(num_classes, false);

  for (int k = 0; k < num_classes; ++k) {
    std::vector<double> cls;
    for (std::size_t i = 0; i < losses.size(); ++i)
      if (labels[i] == k) cls.push_back(losses[i]);
    if (cls.size() < 4) {
      out.per_class[k] = out.global;
      out.fell_back[k] = true;
      continue;
    }
    GmmFit f = fit_gmm_1d(cls, max_iter, tol, seed);
    if (f.degenerate) {
      out.per_class[k] = out.global;
      out.fell_back[k] = true;
    } else {
      out.per_class[k] = f;
    }
  }
  return out;
}

double posterior_clean(const ClassAwareGmm& fits, double loss, int label) {
  if (label < 0 || label >= static_cast<int>(fits.per_class.size()))
    throw std::invalid_argument("posterior_clean: label out of range");
  return posterior_clean(fits.per_class[label], loss);
}

const char* cleaner_source_name(CleanerSource s) {
  switch (s) {
    case CleanerSource::gmm_agnostic: return "gmm_agn";
    case CleanerSource::gmm_aware: return "gmm_awr";
    case CleanerSource::cpc: return "cpc";
    case CleanerSource::self_label: return "self_label";
  }
  return "unknown";
}

Partition partition_from_scores(const CleanerScores& scores, double tau) {
  if (!(tau > 0.0 && tau < 1.0))
    throw std::invalid_argument("partition_from_scores: tau must be in (0,1)");
  Partition p;
  p.source = scores.source;
  for (int i = 0; i < static_cast<int>(scores.q_clean.size()); ++i) {
    const double q = scores.q_clean[i];
    if (q > tau) {
      p.clean_indices.push_back(i);
      p.clean_weights.push_back(q);
    } else {
      p.noise_indices.push_back(i);
    }
  }
  return p;
}

}  // namespace noisylab
