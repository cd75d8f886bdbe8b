#include "noisylab/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "noisylab/metrics.hpp"

namespace noisylab {

namespace fs = std::filesystem;

std::string csv_escape(const std::string& field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(fields[i]);
  }
  out << "\r\n";
}

namespace {

std::string fmt(double v, int prec = 6) {
  std::ostringstream ss;
  ss.precision(prec);
  ss << std::fixed << v;
  return ss.str();
}

struct LoadedRun {
  RunSummary summary;
  std::string dir;  // seed directory
};

// Short benchmark label from the config key, e.g. "blobs_k8_symmetric80".
std::string benchmark_label(const std::string& config_key) {
  try {
    const nlohmann::json j = nlohmann::json::parse(config_key);
    std::ostringstream ss;
    ss << j.at("dataset").at("kind").get<std::string>() << "_k"
       << j.at("dataset").at("classes").get<int>() << "_"
       << j.at("noise").at("kind").get<std::string>()
       << static_cast<int>(std::lround(100.0 * j.at("noise").at("rate").get<double>()));
    return ss.str();
  } catch (const std::exception&) {
    return "unknown";
  }
}

struct Aggregate {
  std::vector<double> accs;
  double mean() const {
    double s = 0.0;
    for (double a : accs) s += a;
    return accs.empty() ? 0.0 : s / accs.size();
  }
  double stddev() const {
    if (accs.size() < 2) return 0.0;
    const double m = mean();
    double v = 0.0;
    for (double a : accs) v += (a - m) * (a - m);
    return std::sqrt(v / (accs.size() - 1));
  }
};

}  // namespace

int write_reports(const ReportOptions& opts, std::ostream& out, std::ostream& err) {
  if (opts.input_dirs.empty()) {
    err << R"({"error":{"exit_code":2,"message":"report: no input directories"}})" << "\n";
    return 2;
  }

  std::vector<LoadedRun> runs;
  int corrupt = 0;
  for (const std::string& dir : opts.input_dirs) {
    if (!fs::exists(dir)) {
      err << "report: warning: " << dir << " does not exist\n";
      continue;
    }
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file() || entry.path().filename() != "summary.json") continue;
      try {
        LoadedRun run;
        run.summary = load_summary_json(entry.path().string());
        run.dir = entry.path().parent_path().string();
        runs.push_back(std::move(run));
      } catch (const std::exception& e) {
        err << "report: warning: skipping corrupt " << entry.path() << ": " << e.what() << "\n";
        ++corrupt;
      }
    }
  }
  if (runs.empty()) {
    err << R"({"error":{"exit_code":2,"message":"report: no readable summaries"}})" << "\n";
    return 2;
  }
  std::sort(runs.begin(), runs.end(), [](const LoadedRun& a, const LoadedRun& b) {
    return std::tie(a.summary.config_key, a.summary.seed) <
           std::tie(b.summary.config_key, b.summary.seed);
  });

  std::ofstream facc, fauc, fks, fabl;
  std::ostream* acc_out = &out;
  std::ostream* auc_out = &out;
  std::ostream* ks_out = &out;
  std::ostream* abl_out = &out;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    facc.open(opts.out_dir + "/accuracy.csv");
    fauc.open(opts.out_dir + "/auc_by_epoch.csv");
    fks.open(opts.out_dir + "/ks_fractions.csv");
    fabl.open(opts.out_dir + "/ablation.csv");
    acc_out = &facc;
    auc_out = &fauc;
    ks_out = &fks;
    abl_out = &fabl;
  }

  // (a) accuracy mean/std per config.
  std::map<std::string, std::pair<std::string, Aggregate>> by_config;  // key -> (cleaner, agg)
  for (const auto& r : runs) {
    auto& slot = by_config[r.summary.config_key];
    slot.first = r.summary.cleaner_mode;
    slot.second.accs.push_back(r.summary.final_test_acc_ensemble);
  }
  write_csv_row(*acc_out, {"benchmark", "cleaner", "seeds", "acc_mean", "acc_std"});
  for (const auto& [key, slot] : by_config) {
    write_csv_row(*acc_out, {benchmark_label(key), slot.first,
                             std::to_string(slot.second.accs.size()), fmt(slot.second.mean()),
                             fmt(slot.second.stddev())});
  }
  if (opts.out_dir.empty()) out << "\r\n";

  // (b) AUC vs epoch, long format; KS heterogeneity fractions alongside.
  write_csv_row(*auc_out, {"benchmark", "cleaner_mode", "seed", "net", "epoch", "cleaner", "auc"});
  std::ostringstream ks_buffer;
  write_csv_row(ks_buffer, {"benchmark", "cleaner_mode", "seed", "net", "epoch",
                            "ks_frac_clean", "ks_frac_noise"});
  for (const auto& r : runs) {
    std::vector<EpochRecord> records;
    try {
      records = load_metrics_jsonl(r.dir + "/metrics.jsonl");
    } catch (const std::exception& e) {
      err << "report: warning: skipping metrics in " << r.dir << ": " << e.what() << "\n";
      ++corrupt;
      continue;
    }
    const std::string bench = benchmark_label(r.summary.config_key);
    for (const auto& rec : records) {
      const std::pair<const char*, double> rows[] = {{"gmm_agn", rec.auc_gmm_agn},
                                                     {"gmm_awr", rec.auc_gmm_awr},
                                                     {"cpc", rec.auc_cpc}};
      for (const auto& [tag, value] : rows) {
        if (value < 0.0) continue;
        write_csv_row(*auc_out,
                      {bench, r.summary.cleaner_mode, std::to_string(r.summary.seed),
                       std::to_string(rec.net), std::to_string(rec.epoch), tag, fmt(value)});
      }
      write_csv_row(ks_buffer,
                    {bench, r.summary.cleaner_mode, std::to_string(r.summary.seed),
                     std::to_string(rec.net), std::to_string(rec.epoch),
                     fmt(rec.ks_frac_clean), fmt(rec.ks_frac_noise)});
    }
  }
  if (opts.out_dir.empty()) out << "\r\n";
  *ks_out << ks_buffer.str();
  if (opts.out_dir.empty()) out << "\r\n";

  // (c) cleaner-ablation grid: rows = cleaner arm, columns = benchmark.
  std::map<std::string, std::map<std::string, Aggregate>> grid;  // cleaner -> bench -> agg
  std::vector<std::string> benches;
  for (const auto& r : runs) {
    const std::string bench = benchmark_label(r.summary.config_key);
    if (std::find(benches.begin(), benches.end(), bench) == benches.end())
      benches.push_back(bench);
    grid[r.summary.cleaner_mode][bench].accs.push_back(r.summary.final_test_acc_ensemble);
  }
  std::sort(benches.begin(), benches.end());
  std::vector<std::string> header = {"cleaner"};
  for (const auto& b : benches) header.push_back(b);
  write_csv_row(*abl_out, header);
  for (const auto& [cleaner, cols] : grid) {
    std::vector<std::string> row = {cleaner};
    for (const auto& b : benches) {
      auto it = cols.find(b);
      row.push_back(it == cols.end() ? ""
                                     : fmt(it->second.mean(), 4) + " +/- " +
                                           fmt(it->second.stddev(), 4));
    }
    write_csv_row(*abl_out, row);
  }

  return 0;
}

}  // namespace noisylab
