#include "ehsim/common/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "ehsim/common/error.hpp"

namespace ehsim {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // folds -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string format_number(std::int64_t v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text == "inf" || text == "+inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  if (text == "nan") return NAN;
  double v = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw InvalidArgument("not a number: '" + std::string(text) + "'");
  return v;
}

std::string FileHeader::render() const {
  std::string out;
  out += "# tool=ehsim version=" + tool_version + "\n";
  out += "# config_hash=" + config_hash + "\n";
  out += "# seed=" + format_number(static_cast<std::int64_t>(seed)) + "\n";
  return out;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
                     const FileHeader* header)
    : out_(path, std::ios::binary | std::ios::trunc), columns_(columns.size()), path_(path) {
  if (!out_) throw RuntimeError("cannot open '" + path.string() + "' for writing");
  if (header != nullptr) out_ << header->render();
  for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
  out_ << '\n';
}

CsvWriter& CsvWriter::cell(std::string_view v) {
  if (in_row_ >= columns_) throw RuntimeError("too many cells in row of " + path_);
  if (in_row_ > 0) row_ += ',';
  row_ += v;
  ++in_row_;
  return *this;
}

void CsvWriter::end_row() {
  if (in_row_ != columns_) throw RuntimeError("short row in " + path_);
  row_ += '\n';
  out_ << row_;
  row_.clear();
  in_row_ = 0;
  if (!out_) throw RuntimeError("write failed for " + path_);
}

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw RuntimeError("missing column '" + std::string(name) + "'");
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      return out;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open '" + path.string() + "'");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!have_header) table.comments.push_back(line.substr(1));
      continue;
    }
    auto cells = split(line, ',');
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw RuntimeError("ragged row in '" + path.string() + "'");
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) throw RuntimeError("empty csv '" + path.string() + "'");
  return table;
}

}  // namespace ehsim
