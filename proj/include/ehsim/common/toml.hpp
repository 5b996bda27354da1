#pragma once

// Minimal TOML reader/writer covering the subset used by scenario files:
// tables, dotted keys, arrays of tables, strings, integers, floats, booleans,
// (multi-line) arrays, and a top-level `include` key that merges other files
// beneath the including one.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ehsim::toml {

struct Value;
using Array = std::vector<Value>;
using Table = std::map<std::string, Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, std::shared_ptr<Array>,
               std::shared_ptr<Table>>
      data;
  int line = 0;

  Value() : data(false) {}
  Value(bool b, int ln = 0) : data(b), line(ln) {}
  Value(std::int64_t i, int ln = 0) : data(i), line(ln) {}
  Value(int i, int ln = 0) : data(static_cast<std::int64_t>(i)), line(ln) {}
  Value(double d, int ln = 0) : data(d), line(ln) {}
  Value(std::string s, int ln = 0) : data(std::move(s)), line(ln) {}
  Value(const char* s, int ln = 0) : data(std::string(s)), line(ln) {}
  Value(Array a, int ln = 0) : data(std::make_shared<Array>(std::move(a))), line(ln) {}
  Value(Table t, int ln = 0) : data(std::make_shared<Table>(std::move(t))), line(ln) {}

  bool is_table() const { return std::holds_alternative<std::shared_ptr<Table>>(data); }
  bool is_array() const { return std::holds_alternative<std::shared_ptr<Array>>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_number() const {
    return std::holds_alternative<double>(data) || std::holds_alternative<std::int64_t>(data);
  }

  Table& table() { return *std::get<std::shared_ptr<Table>>(data); }
  const Table& table() const { return *std::get<std::shared_ptr<Table>>(data); }
  Array& array() { return *std::get<std::shared_ptr<Array>>(data); }
  const Array& array() const { return *std::get<std::shared_ptr<Array>>(data); }
};

// Parses text; `origin` names the source in error messages and anchors
// relative include paths.
Table parse(std::string_view text, const std::filesystem::path& origin = {});
Table parse_file(const std::filesystem::path& path);

// Canonical serialization (sorted keys, shortest round-trip numbers).
std::string write(const Table& root);

// Typed, consumption-tracking view over a table. Every key read through the
// view is marked; finish() rejects anything left unread.
class Reader {
 public:
  Reader(const Table* table, std::string path) : table_(table), path_(std::move(path)) {}

  bool has(const std::string& key) const;
  double number(const std::string& key, double fallback);
  double number(const std::string& key);
  std::int64_t integer(const std::string& key, std::int64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string string(const std::string& key, const std::string& fallback);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback);
  std::vector<std::string> strings(const std::string& key,
                                   const std::vector<std::string>& fallback);
  // Child readers are owned by this reader and finished with it.
  Reader& sub(const std::string& key);
  std::vector<Reader*> tables(const std::string& key);
  // All keys of the table, sorted. Does not mark them as read.
  std::vector<std::string> keys() const;
  void touch(const std::string& key) { used_.insert(key); }
  int line_of(const std::string& key) const;
  std::string qualified(const std::string& key) const;

  void finish() const;

 private:
  const Value* find(const std::string& key);

  const Table* table_;
  std::string path_;
  std::set<std::string> used_;
  std::vector<std::unique_ptr<Reader>> children_;
};

}  // namespace ehsim::toml
