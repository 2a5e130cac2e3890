#include "kinslab/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kinslab {

bool write_text(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) return false;
  os << content;
  return bool(os);
}

namespace {
std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}
}  // namespace

bool write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  std::ofstream os(path);
  if (!os) return false;
  for (std::size_t c = 0; c < header.size(); ++c)
    os << header[c] << (c + 1 < header.size() ? "," : "\n");
  if (columns.empty()) return bool(os);
  std::size_t rows = columns[0].size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      os << fmt(columns[c][r]) << (c + 1 < columns.size() ? "," : "\n");
  }
  return bool(os);
}

bool write_dat_with_script(const std::string& base, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& columns,
                           const std::string& title, bool logx, bool logy) {
  {
    std::ofstream os(base + ".dat");
    if (!os) return false;
    os << "#";
    for (const auto& h : header) os << " " << h;
    os << "\n";
    std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c)
        os << fmt(columns[c][r]) << (c + 1 < columns.size() ? " " : "\n");
    }
  }
  std::ostringstream gp;
  gp << "set title '" << title << "'\n";
  if (logx) gp << "set logscale x\n";
  if (logy) gp << "set logscale y\n";
  gp << "plot";
  for (std::size_t c = 1; c < columns.size(); ++c)
    gp << " '" << base << ".dat' using 1:" << (c + 1) << " with linespoints title '"
       << header[c] << "'" << (c + 1 < columns.size() ? "," : "\n");
  return write_text(base + ".gp", gp.str());
}

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace kinslab
