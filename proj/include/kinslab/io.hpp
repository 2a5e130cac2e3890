#pragma once

#include <string>
#include <vector>

namespace kinslab {

bool write_text(const std::string& path, const std::string& content);

/// CSV with a header row; columns are equal-length series.
bool write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

/// gnuplot-compatible .dat (whitespace-separated) plus a minimal plot script.
bool write_dat_with_script(const std::string& base_path,
                           const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& columns,
                           const std::string& title, bool logx = false, bool logy = false);

std::string json_escape(const std::string& s);

}  // namespace kinslab
