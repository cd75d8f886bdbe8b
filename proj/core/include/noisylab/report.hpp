#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace noisylab {

// RFC 4180 field quoting + CRLF record separators.
std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct ReportOptions {
  std::vector<std::string> input_dirs;  // searched recursively for summary.json
  std::string out_dir;                  // empty = print tables to stdout
};

// Emits (a) accuracy mean/std per config, (b) a long-format AUC-vs-epoch
// table, (c) the cleaner-ablation grid (cleaner arm x benchmark). Corrupt
// records are skipped with a warning on `err`. Returns 0 on success, 2 when
// nothing readable was found.
int write_reports(const ReportOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace noisylab
