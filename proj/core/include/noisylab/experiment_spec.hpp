#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace noisylab {

// Schema violation with the dotted path of the offending field.
class SpecError : public std::runtime_error {
 public:
  SpecError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Parsed and validated experiment configuration. The JSON layout groups
// fields into dataset/noise/model/optimizer/trainer blocks; unknown keys are
// rejected with their path.
struct ExperimentSpec {
  // dataset
  std::string dataset_kind = "blobs";  // blobs | csv
  int n_per_class = 200;
  int test_per_class = 100;
  int classes = 8;
  int dim = 16;
  std::vector<double> separations;   // empty = linspace(2,6,K)
  std::vector<int> per_class_counts; // optional imbalance (train side)
  std::string csv_path;

  // noise
  std::string noise_kind = "symmetric";  // none | symmetric | asymmetric
  double noise_rate = 0.8;
  std::map<int, int> class_map;  // empty = pairwise default map
  bool exclude_true_class = false;

  // model
  std::vector<int> hidden = {64, 64};
  int embed_dim = 8;
  int projector_depth = 1;

  // optimizer
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;

  // trainer
  int epochs = 100;
  int warmup_epochs = 10;
  double cpc_warmup_frac = 0.05;
  double tau = 0.5;
  double alpha = 1.0;
  double lambda_u = 25.0;
  double sharpen_temperature = 0.5;
  double mixup_beta_a = 4.0;
  bool normalize_losses = true;
  bool exclude_confident_from_noise = true;
  bool self_labeling = false;
  bool ensemble_inference = true;
  double lr_drop_factor = 0.1;
  int lr_drop_epoch = -1;

  // run
  std::string cleaner_mode = "cpc_agn";
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "runs/out";

  bool operator==(const ExperimentSpec&) const = default;
};

ExperimentSpec parse_spec_text(const std::string& json_text);
ExperimentSpec load_spec_file(const std::string& path);
std::string spec_to_json_text(const ExperimentSpec& spec, int indent = 2);

// Canonical spec text with seeds and output_dir removed; identical configs
// produce identical keys.
std::string spec_config_key(const ExperimentSpec& spec);

// Applies `key=value` overrides on the JSON representation (dotted paths,
// e.g. trainer.tau=0.6); values are parsed as JSON scalars with a string
// fallback. Re-validates.
ExperimentSpec apply_overrides(const ExperimentSpec& spec,
                               const std::vector<std::string>& assignments);

// Executes trainer runs for every seed, writing per-seed output directories
// under spec.output_dir (prefixed by NOISYLAB_OUTPUT_ROOT when relative).
// Returns a process exit code (0 ok, 1 runtime failure).
int run_spec(const ExperimentSpec& spec, std::ostream& log);

// Resolved output directory (env-root applied).
std::string resolve_output_dir(const std::string& output_dir);

}  // namespace noisylab
