#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace ehsim {

// Shortest decimal form that round-trips to the same double. Locale-free,
// so output bytes depend only on the value.
std::string format_number(double v);
std::string format_number(std::int64_t v);
inline std::string format_number(int v) { return format_number(static_cast<std::int64_t>(v)); }
inline std::string format_number(std::size_t v) {
  return format_number(static_cast<std::int64_t>(v));
}

double parse_double(std::string_view text);

// Audit trail written as leading '#' lines of every output file.
struct FileHeader {
  std::string tool_version;
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string render() const;
};

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns,
            const FileHeader* header = nullptr);

  CsvWriter& cell(std::string_view v);
  CsvWriter& cell(double v) { return cell(format_number(v)); }
  CsvWriter& cell(std::int64_t v) { return cell(format_number(v)); }
  CsvWriter& cell(int v) { return cell(format_number(v)); }
  CsvWriter& cell(std::size_t v) { return cell(format_number(v)); }
  void end_row();

  std::size_t columns() const { return columns_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
  std::string row_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> comments;  // leading '#' lines without the '#'
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a column; throws RuntimeError naming the column if absent.
  std::size_t column(std::string_view name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::vector<std::string> split(std::string_view text, char sep);

}  // namespace ehsim
