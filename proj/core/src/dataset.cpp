#include "noisylab/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "noisylab/rng.hpp"

namespace noisylab {

namespace {

// Cluster centers with ||c_k - centroid|| == separations[k] exactly: start
// from orthogonal-ish seeded directions, then alternate between centering
// (weighted mean to zero) and rescaling rows to the requested radii.
Eigen::MatrixXd place_centers(const std::vector<int>& counts, int dim,
                              const std::vector<double>& separations, Rng& rng) {
  const int k_classes = static_cast<int>(counts.size());
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::MatrixXd dirs(k_classes, dim);
  for (int k = 0; k < k_classes; ++k)
    for (int j = 0; j < dim; ++j) dirs(k, j) = gauss(rng);

  // Gram-Schmidt while it lasts; later rows keep their random directions.
  for (int k = 0; k < std::min(k_classes, dim); ++k) {
    for (int prev = 0; prev < k; ++prev)
      dirs.row(k) -= dirs.row(k).dot(dirs.row(prev)) * dirs.row(prev);
    double n = dirs.row(k).norm();
    while (n < 1e-9) {  // astronomically unlikely; redraw
      for (int j = 0; j < dim; ++j) dirs(k, j) = gauss(rng);
      n = dirs.row(k).norm();
    }
    dirs.row(k) /= n;
  }
  for (int k = dim; k < k_classes; ++k) dirs.row(k).normalize();

  Eigen::MatrixXd centers(k_classes, dim);
  for (int k = 0; k < k_classes; ++k) centers.row(k) = separations[k] * dirs.row(k);

  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  Eigen::VectorXd w(k_classes);
  for (int k = 0; k < k_classes; ++k) w(k) = counts[k] / total;

  for (int iter = 0; iter < 500; ++iter) {
    Eigen::RowVectorXd mean = w.transpose() * centers;
    centers.rowwise() -= mean;
    double max_err = mean.norm();
    for (int k = 0; k < k_classes; ++k) {
      const double n = centers.row(k).norm();
      if (n < 1e-12) {
        for (int j = 0; j < dim; ++j) centers(k, j) = gauss(rng);
        centers.row(k) *= separations[k] / centers.row(k).norm();
        max_err = 1.0;
        continue;
      }
      max_err = std::max(max_err, std::abs(n - separations[k]));
      centers.row(k) *= separations[k] / n;
    }
    if (max_err < 1e-12) break;
  }
  return centers;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

CleanDataset make_blobs(const std::vector<int>& counts, int dim,
                        const std::vector<double>& separations, std::uint64_t seed) {
  const int k_classes = static_cast<int>(counts.size());
  if (k_classes < 2) throw std::invalid_argument("make_blobs: need at least 2 classes");
  if (dim < 2) throw std::invalid_argument("make_blobs: need dim >= 2");
  if (static_cast<int>(separations.size()) != k_classes)
    throw std::invalid_argument("make_blobs: separations size must equal class count");
  for (double s : separations)
    if (!(s > 0.0)) throw std::invalid_argument("make_blobs: separations must be positive");
  for (int c : counts)
    if (c < 2) throw std::invalid_argument("make_blobs: need at least 2 samples per class");

  Rng rng(seed);
  const Eigen::MatrixXd centers = place_centers(counts, dim, separations, rng);

  const int n_total = std::accumulate(counts.begin(), counts.end(), 0);
  CleanDataset ds;
  ds.features.resize(n_total, dim);
  ds.true_labels.resize(n_total);
  ds.num_classes = k_classes;
  ds.per_class_separation = separations;

  std::normal_distribution<double> gauss(0.0, 1.0);
  int row = 0;
  for (int k = 0; k < k_classes; ++k) {
    for (int i = 0; i < counts[k]; ++i, ++row) {
      for (int j = 0; j < dim; ++j) ds.features(row, j) = centers(k, j) + gauss(rng);
      ds.true_labels[row] = k;
    }
  }
  return ds;
}

CleanDataset make_blobs(int n_per_class, int num_classes, int dim,
                        const std::vector<double>& separations, std::uint64_t seed) {
  if (n_per_class < 2) throw std::invalid_argument("make_blobs: need n_per_class >= 2");
  if (num_classes < 2) throw std::invalid_argument("make_blobs: need at least 2 classes");
  return make_blobs(std::vector<int>(num_classes, n_per_class), dim, separations, seed);
}

NoisyDataset inject_symmetric(const CleanDataset& ds, double rate, std::uint64_t seed,
                              bool exclude_true_class) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw std::invalid_argument("inject_symmetric: rate must be in [0,1]");

  NoisyDataset out;
  out.base = ds;
  out.observed_labels = ds.true_labels;
  out.corrupted.assign(ds.size(), false);
  out.noise_kind = NoiseKind::symmetric;
  out.noise_rate = rate;

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<int> any_class(0, ds.num_classes - 1);
  std::uniform_int_distribution<int> other_class(0, ds.num_classes - 2);
  for (int i = 0; i < ds.size(); ++i) {
    if (unif(rng) < rate) {
      int y;
      if (exclude_true_class) {
        y = other_class(rng);
        if (y >= ds.true_labels[i]) ++y;
      } else {
        y = any_class(rng);
      }
      out.observed_labels[i] = y;
    }
    out.corrupted[i] = out.observed_labels[i] != ds.true_labels[i];
  }
  return out;
}

NoisyDataset inject_asymmetric(const CleanDataset& ds, double rate,
                               const std::map<int, int>& class_map, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw std::invalid_argument("inject_asymmetric: rate must be in [0,1]");
  if (static_cast<int>(class_map.size()) >= ds.num_classes)
    throw std::invalid_argument("inject_asymmetric: class_map must cover a strict subset of classes");
  for (const auto& [from, to] : class_map) {
    if (from < 0 || from >= ds.num_classes || to < 0 || to >= ds.num_classes)
      throw std::invalid_argument("inject_asymmetric: class_map entries must be in [0,K)");
    if (from == to)
      throw std::invalid_argument("inject_asymmetric: class_map may not map a class to itself");
  }

  NoisyDataset out;
  out.base = ds;
  out.observed_labels = ds.true_labels;
  out.corrupted.assign(ds.size(), false);
  out.noise_kind = NoiseKind::asymmetric;
  out.noise_rate = rate;

  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int i = 0; i < ds.size(); ++i) {
    auto it = class_map.find(ds.true_labels[i]);
    if (it != class_map.end() && unif(rng) < rate) out.observed_labels[i] = it->second;
    out.corrupted[i] = out.observed_labels[i] != ds.true_labels[i];
  }
  return out;
}

std::map<int, int> default_asymmetric_map(int num_classes) {
  std::map<int, int> m;
  for (int k = 0; k + 1 < num_classes; k += 2) m[k] = k + 1;
  return m;
}

CleanDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);

  CleanDataset ds;
  int k_classes = -1;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  int line_no = 0;
  int dim = -1;

  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      auto pos = t.find("classes:");
      if (pos != std::string::npos && k_classes < 0) {
        std::string v = trim(t.substr(pos + 8));
        int k = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), k);
        if (ec != std::errc() || k < 1)
          throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                                   ": bad classes directive '" + t + "'");
        k_classes = k;
      }
      continue;
    }
    if (k_classes < 0)
      throw std::runtime_error("load_csv: missing '# classes: K' directive before data");

    std::vector<std::string> cells;
    std::stringstream ss(t);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() < 2)
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                               ": need at least one feature column and a label");
    if (dim < 0) dim = static_cast<int>(cells.size()) - 1;
    if (static_cast<int>(cells.size()) - 1 != dim)
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                               ": expected " + std::to_string(dim + 1) + " columns, got " +
                               std::to_string(cells.size()));

    std::vector<double> feats(dim);
    for (int j = 0; j < dim; ++j) {
      const std::string& c = cells[j];
      char* end = nullptr;
      feats[j] = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(feats[j]))
        throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                                 ": non-numeric cell '" + c + "'");
    }
    const std::string& lc = cells.back();
    int label = 0;
    auto [p, ec] = std::from_chars(lc.data(), lc.data() + lc.size(), label);
    if (ec != std::errc() || p != lc.data() + lc.size())
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) +
                               ": non-integer label '" + lc + "'");
    if (label < 0 || label >= k_classes)
      throw std::runtime_error("load_csv: row " + std::to_string(line_no) + ": label " +
                               std::to_string(label) + " out of range [0," +
                               std::to_string(k_classes) + ")");
    rows.push_back(std::move(feats));
    labels.push_back(label);
  }

  if (rows.empty()) throw std::runtime_error("load_csv: no samples in " + path);

  std::vector<int> per_class(k_classes, 0);
  for (int y : labels) ++per_class[y];
  for (int k = 0; k < k_classes; ++k)
    if (per_class[k] < 2)
      throw std::runtime_error("load_csv: class " + std::to_string(k) + " has " +
                               std::to_string(per_class[k]) + " sample(s); need at least 2");

  ds.num_classes = k_classes;
  ds.true_labels = std::move(labels);
  ds.features.resize(static_cast<int>(rows.size()), dim);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i)
    for (int j = 0; j < dim; ++j) ds.features(i, j) = rows[i][j];

  // Separation measured from the data itself.
  Eigen::RowVectorXd global = ds.features.colwise().mean();
  ds.per_class_separation.assign(k_classes, 0.0);
  for (int k = 0; k < k_classes; ++k) {
    Eigen::RowVectorXd centroid = Eigen::RowVectorXd::Zero(dim);
    for (int i = 0; i < ds.size(); ++i)
      if (ds.true_labels[i] == k) centroid += ds.features.row(i);
    centroid /= per_class[k];
    ds.per_class_separation[k] = (centroid - global).norm();
  }
  return ds;
}

void save_csv(const CleanDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << "# classes: " << ds.num_classes << "\n";
  out.precision(17);
  for (int i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < ds.dim(); ++j) out << ds.features(i, j) << ",";
    out << ds.true_labels[i] << "\n";
  }
}

void save_dataset_json(const NoisyDataset& ds, const std::string& path) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["num_classes"] = ds.num_classes();
  j["noise"] = {{"kind", ds.noise_kind == NoiseKind::symmetric    ? "symmetric"
                         : ds.noise_kind == NoiseKind::asymmetric ? "asymmetric"
                                                                  : "none"},
                {"rate", ds.noise_rate}};
  std::vector<std::vector<double>> feats(ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    feats[i].resize(ds.base.dim());
    for (int c = 0; c < ds.base.dim(); ++c) feats[i][c] = ds.base.features(i, c);
  }
  j["features"] = feats;
  j["observed_labels"] = ds.observed_labels;
  j["eval_only"] = {
      {"note", "hidden ground truth; never read by the training path"},
      {"true_labels", ds.base.true_labels},
      {"corrupted", std::vector<int>(ds.corrupted.begin(), ds.corrupted.end())},
      {"per_class_separation", ds.base.per_class_separation},
  };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

NoisyDataset load_dataset_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (j.value("schema_version", 0) != 1)
    throw std::runtime_error("load_dataset_json: unsupported schema_version");

  NoisyDataset ds;
  ds.base.num_classes = j.at("num_classes").get<int>();
  const auto& feats = j.at("features");
  const int n = static_cast<int>(feats.size());
  if (n == 0) throw std::runtime_error("load_dataset_json: no samples");
  const int dim = static_cast<int>(feats[0].size());
  ds.base.features.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < dim; ++c) ds.base.features(i, c) = feats[i][c].get<double>();
  ds.observed_labels = j.at("observed_labels").get<std::vector<int>>();
  const auto& eval = j.at("eval_only");
  ds.base.true_labels = eval.at("true_labels").get<std::vector<int>>();
  auto corr = eval.at("corrupted").get<std::vector<int>>();
  ds.corrupted.assign(corr.begin(), corr.end());
  ds.base.per_class_separation = eval.at("per_class_separation").get<std::vector<double>>();
  const std::string kind = j.at("noise").at("kind").get<std::string>();
  ds.noise_kind = kind == "symmetric"    ? NoiseKind::symmetric
                  : kind == "asymmetric" ? NoiseKind::asymmetric
                                         : NoiseKind::none;
  ds.noise_rate = j.at("noise").at("rate").get<double>();
  return ds;
}

}  // namespace noisylab
