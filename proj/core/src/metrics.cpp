#include "noisylab/metrics.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace noisylab {

namespace {

nlohmann::json gmm_fit_to_json(const GmmFit& f) {
  return {{"mu0", f.mu0},       {"sigma0", f.sigma0}, {"phi0", f.phi0},
          {"mu1", f.mu1},       {"sigma1", f.sigma1}, {"phi1", f.phi1},
          {"degenerate", f.degenerate}, {"iterations", f.iterations}};
}

GmmFit gmm_fit_from_json(const nlohmann::json& j) {
  GmmFit f;
  f.mu0 = j.at("mu0").get<double>();
  f.sigma0 = j.at("sigma0").get<double>();
  f.phi0 = j.at("phi0").get<double>();
  f.mu1 = j.at("mu1").get<double>();
  f.sigma1 = j.at("sigma1").get<double>();
  f.phi1 = j.at("phi1").get<double>();
  f.degenerate = j.at("degenerate").get<bool>();
  f.iterations = j.at("iterations").get<int>();
  return f;
}

}  // namespace

std::string epoch_record_to_json(const EpochRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["net"] = r.net;
  j["stage2_source"] = r.stage2_source;
  j["auc"] = {{"gmm_agn", r.auc_gmm_agn},
              {"gmm_awr", r.auc_gmm_awr},
              {"cpc", r.auc_cpc},
              {"supervision", r.auc_supervision}};
  j["partition"] = {{"gmm_clean", r.gmm_clean_size},
                    {"gmm_noise", r.gmm_noise_size},
                    {"cpc_clean", r.cpc_clean_size},
                    {"cpc_noise", r.cpc_noise_size},
                    {"confident", r.confident_size}};
  j["gmm_fit"] = gmm_fit_to_json(r.gmm_fit);
  if (!r.gmm_fit_per_class.empty()) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : r.gmm_fit_per_class) arr.push_back(gmm_fit_to_json(f));
    j["gmm_fit_per_class"] = arr;
  }
  j["flags"] = {{"gmm_degenerate", r.gmm_degenerate},
                {"used_fallback_partition", r.used_fallback_partition}};
  j["cpc_loss"] = {{"total", r.cpc_loss_total},
                   {"clean", r.cpc_loss_clean},
                   {"noise", r.cpc_loss_noise},
                   {"confident", r.cpc_loss_confident}};
  j["evr"] = {{"total", r.evr_total},
              {"labeled", r.evr_labeled},
              {"unlabeled", r.evr_unlabeled},
              {"lambda_u", r.evr_lambda_u}};
  j["kld"] = r.kld;
  j["consistency"] = r.consistency;
  j["ks_fraction"] = {{"clean", r.ks_frac_clean}, {"noise", r.ks_frac_noise}};
  j["test_acc"] = {{"net", r.test_acc_net}, {"ensemble", r.test_acc_ensemble}};
  return j.dump();
}

EpochRecord epoch_record_from_json(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  EpochRecord r;
  r.epoch = j.at("epoch").get<int>();
  r.net = j.at("net").get<int>();
  r.stage2_source = j.at("stage2_source").get<std::string>();
  r.auc_gmm_agn = j.at("auc").at("gmm_agn").get<double>();
  r.auc_gmm_awr = j.at("auc").at("gmm_awr").get<double>();
  r.auc_cpc = j.at("auc").at("cpc").get<double>();
  r.auc_supervision = j.at("auc").at("supervision").get<double>();
  r.gmm_clean_size = j.at("partition").at("gmm_clean").get<int>();
  r.gmm_noise_size = j.at("partition").at("gmm_noise").get<int>();
  r.cpc_clean_size = j.at("partition").at("cpc_clean").get<int>();
  r.cpc_noise_size = j.at("partition").at("cpc_noise").get<int>();
  r.confident_size = j.at("partition").at("confident").get<int>();
  r.gmm_fit = gmm_fit_from_json(j.at("gmm_fit"));
  if (j.contains("gmm_fit_per_class"))
    for (const auto& f : j.at("gmm_fit_per_class")) r.gmm_fit_per_class.push_back(gmm_fit_from_json(f));
  r.gmm_degenerate = j.at("flags").at("gmm_degenerate").get<bool>();
  r.used_fallback_partition = j.at("flags").at("used_fallback_partition").get<bool>();
  r.cpc_loss_total = j.at("cpc_loss").at("total").get<double>();
  r.cpc_loss_clean = j.at("cpc_loss").at("clean").get<double>();
  r.cpc_loss_noise = j.at("cpc_loss").at("noise").get<double>();
  r.cpc_loss_confident = j.at("cpc_loss").at("confident").get<double>();
  r.evr_total = j.at("evr").at("total").get<double>();
  r.evr_labeled = j.at("evr").at("labeled").get<double>();
  r.evr_unlabeled = j.at("evr").at("unlabeled").get<double>();
  r.evr_lambda_u = j.at("evr").at("lambda_u").get<double>();
  r.kld = j.at("kld").get<double>();
  r.consistency = j.at("consistency").get<double>();
  r.ks_frac_clean = j.at("ks_fraction").at("clean").get<double>();
  r.ks_frac_noise = j.at("ks_fraction").at("noise").get<double>();
  r.test_acc_net = j.at("test_acc").at("net").get<double>();
  r.test_acc_ensemble = j.at("test_acc").at("ensemble").get<double>();
  return r;
}

std::string records_to_jsonl(const std::vector<EpochRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += epoch_record_to_json(r);
    out += '\n';
  }
  return out;
}

void save_metrics_jsonl(const std::vector<EpochRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_metrics_jsonl: cannot open " + path);
  out << records_to_jsonl(records);
}

std::vector<EpochRecord> load_metrics_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_metrics_jsonl: cannot open " + path);
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(epoch_record_from_json(line));
  }
  return out;
}

std::string summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["config_key"] = s.config_key;
  j["cleaner_mode"] = s.cleaner_mode;
  j["seed"] = s.seed;
  j["epochs_completed"] = s.epochs_completed;
  j["aborted"] = s.aborted;
  j["abort_reason"] = s.abort_reason;
  j["final_test_acc"] = {{"ensemble", s.final_test_acc_ensemble},
                         {"net1", s.final_test_acc_net1},
                         {"net2", s.final_test_acc_net2}};
  j["final_third_auc"] = {{"gmm_agn", s.final_third_auc_gmm_agn},
                          {"gmm_awr", s.final_third_auc_gmm_awr},
                          {"cpc", s.final_third_auc_cpc}};
  j["kld"] = {{"first_third", s.first_third_kld}, {"final_third", s.final_third_kld}};
  j["consistency"] = {{"first_third", s.first_third_consistency},
                      {"final_third", s.final_third_consistency}};
  return j.dump(2);
}

RunSummary load_summary_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_summary_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  RunSummary s;
  s.config_key = j.at("config_key").get<std::string>();
  s.cleaner_mode = j.at("cleaner_mode").get<std::string>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.epochs_completed = j.at("epochs_completed").get<int>();
  s.aborted = j.at("aborted").get<bool>();
  s.abort_reason = j.at("abort_reason").get<std::string>();
  s.final_test_acc_ensemble = j.at("final_test_acc").at("ensemble").get<double>();
  s.final_test_acc_net1 = j.at("final_test_acc").at("net1").get<double>();
  s.final_test_acc_net2 = j.at("final_test_acc").at("net2").get<double>();
  s.final_third_auc_gmm_agn = j.at("final_third_auc").at("gmm_agn").get<double>();
  s.final_third_auc_gmm_awr = j.at("final_third_auc").at("gmm_awr").get<double>();
  s.final_third_auc_cpc = j.at("final_third_auc").at("cpc").get<double>();
  s.first_third_kld = j.at("kld").at("first_third").get<double>();
  s.final_third_kld = j.at("kld").at("final_third").get<double>();
  s.first_third_consistency = j.at("consistency").at("first_third").get<double>();
  s.final_third_consistency = j.at("consistency").at("final_third").get<double>();
  return s;
}

void save_summary_json(const RunSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_summary_json: cannot open " + path);
  out << summary_to_json(s) << "\n";
}

void fill_summary_stats(RunSummary& s, const std::vector<EpochRecord>& records) {
  if (records.empty()) return;
  int max_epoch = 0;
  for (const auto& r : records) max_epoch = std::max(max_epoch, r.epoch);
  const int n_epochs = max_epoch + 1;
  const int third = std::max(1, n_epochs / 3);

  auto mean_over = [&](auto field, int lo, int hi, bool skip_undefined) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : records) {
      if (r.epoch < lo || r.epoch >= hi) continue;
      const double v = field(r);
      if (skip_undefined && v < 0.0) continue;
      sum += v;
      ++count;
    }
    return count > 0 ? sum / count : -1.0;
  };

  const int final_lo = n_epochs - third;
  s.final_third_auc_gmm_agn =
      mean_over([](const EpochRecord& r) { return r.auc_gmm_agn; }, final_lo, n_epochs, true);
  s.final_third_auc_gmm_awr =
      mean_over([](const EpochRecord& r) { return r.auc_gmm_awr; }, final_lo, n_epochs, true);
  s.final_third_auc_cpc =
      mean_over([](const EpochRecord& r) { return r.auc_cpc; }, final_lo, n_epochs, true);
  s.first_third_kld = mean_over([](const EpochRecord& r) { return r.kld; }, 0, third, false);
  s.final_third_kld =
      mean_over([](const EpochRecord& r) { return r.kld; }, final_lo, n_epochs, false);
  s.first_third_consistency =
      mean_over([](const EpochRecord& r) { return r.consistency; }, 0, third, false);
  s.final_third_consistency =
      mean_over([](const EpochRecord& r) { return r.consistency; }, final_lo, n_epochs, false);
}

}  // namespace noisylab
