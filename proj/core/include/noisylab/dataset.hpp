#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace noisylab {

enum class NoiseKind { none, symmetric, asymmetric };

// Synthetic (or CSV-loaded) classification data with exact labels.
struct CleanDataset {
  Eigen::MatrixXd features;  // one row per sample
  std::vector<int> true_labels;
  int num_classes = 0;
  // Distance of each cluster center from the global centroid; a proxy for
  // class difficulty (smaller = harder). Computed from the data for CSV input.
  std::vector<double> per_class_separation;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// Training view: observed labels may disagree with the hidden ground truth.
// `corrupted` is evaluation-only and must never feed the training path.
struct NoisyDataset {
  CleanDataset base;
  std::vector<int> observed_labels;
  std::vector<bool> corrupted;  // corrupted[i] == (observed_labels[i] != base.true_labels[i])
  NoiseKind noise_kind = NoiseKind::none;
  double noise_rate = 0.0;

  int size() const { return base.size(); }
  int num_classes() const { return base.num_classes; }
};

// K Gaussian clusters with unit within-class variance. Cluster k's center
// sits at distance separations[k] from the global centroid, so per-class
// difficulty is controlled independently of sample counts.
CleanDataset make_blobs(int n_per_class, int num_classes, int dim,
                        const std::vector<double>& separations, std::uint64_t seed);

// Imbalanced variant: explicit per-class sample counts.
CleanDataset make_blobs(const std::vector<int>& counts, int dim,
                        const std::vector<double>& separations, std::uint64_t seed);

// Each sample is independently selected with probability `rate`; selected
// samples get a replacement label drawn uniformly over all classes (the true
// class included, so the corrupted fraction is ~ rate*(K-1)/K). Set
// `exclude_true_class` to draw from the K-1 other classes instead.
NoisyDataset inject_symmetric(const CleanDataset& ds, double rate, std::uint64_t seed,
                              bool exclude_true_class = false);

// Only samples whose true class is in class_map's domain are eligible; each
// flips to class_map[y] with probability `rate`. Classes outside the domain
// stay fully clean. class_map must cover a strict subset of the classes and
// may not map a class to itself.
NoisyDataset inject_asymmetric(const CleanDataset& ds, double rate,
                               const std::map<int, int>& class_map, std::uint64_t seed);

// Pairwise flips 0->1, 2->3, ... covering floor(K/2) source classes.
std::map<int, int> default_asymmetric_map(int num_classes);

// CSV: '#' comment lines, one `# classes: K` directive before the data,
// then rows of D feature columns followed by an integer label.
CleanDataset load_csv(const std::string& path);
void save_csv(const CleanDataset& ds, const std::string& path);

// Single-file JSON serialization; hidden ground truth lives in an
// "eval_only" section.
void save_dataset_json(const NoisyDataset& ds, const std::string& path);
NoisyDataset load_dataset_json(const std::string& path);

}  // namespace noisylab
