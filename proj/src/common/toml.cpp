#include "ehsim/common/toml.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ehsim/common/csv.hpp"
#include "ehsim/common/error.hpp"

namespace ehsim::toml {
namespace {

class Parser {
 public:
  Parser(std::string_view text, std::string origin) : s_(text), origin_(std::move(origin)) {}

  Table run() {
    Table root;
    Table* current = &root;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        current = header(root);
      } else {
        key_value(*current);
      }
      expect_line_end();
    }
    return root;
  }

 private:
  bool eof() const { return pos_ >= s_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < s_.size() ? s_[pos_ + ahead] : '\0';
  }
  char get() {
    const char c = s_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  [[noreturn]] void fail(const std::string& what, const std::string& key = {}) const {
    throw ConfigError(key, line_, origin_.empty() ? what : origin_ + ": " + what);
  }

  void skip_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
  }
  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') get();
  }
  void skip_blank_lines() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  // Whitespace, comments and newlines inside arrays and inline tables.
  void skip_any() {
    while (!eof()) {
      skip_ws();
      skip_comment();
      if (peek() == '\n') {
        get();
        continue;
      }
      break;
    }
  }
  void expect_line_end() {
    skip_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n') fail(std::string("unexpected character '") + peek() + "'");
    get();
  }

  static bool bare_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-';
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      std::string part;
      if (peek() == '"') {
        part = basic_string();
      } else {
        while (!eof() && bare_char(peek())) part += get();
        if (part.empty()) fail("expected a key");
      }
      parts.push_back(part);
      skip_ws();
      if (peek() == '.') {
        get();
        continue;
      }
      return parts;
    }
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? "." : "") + parts[i];
    return out;
  }

  Table* descend(Table& root, const std::vector<std::string>& parts, std::size_t count) {
    Table* t = &root;
    for (std::size_t i = 0; i < count; ++i) {
      auto it = t->find(parts[i]);
      if (it == t->end()) {
        it = t->emplace(parts[i], Value(Table{}, line_)).first;
      }
      Value& v = it->second;
      if (v.is_table()) {
        t = &v.table();
      } else if (v.is_array() && !v.array().empty() && v.array().back().is_table()) {
        t = &v.array().back().table();
      } else {
        fail("key is not a table", join(parts));
      }
    }
    return t;
  }

  Table* header(Table& root) {
    get();
    const bool array_of_tables = peek() == '[';
    if (array_of_tables) get();
    const auto parts = key_path();
    if (get() != ']') fail("expected ']'", join(parts));
    if (array_of_tables && get() != ']') fail("expected ']]'", join(parts));
    Table* parent = descend(root, parts, parts.size() - 1);
    const std::string& leaf = parts.back();
    if (array_of_tables) {
      auto it = parent->find(leaf);
      if (it == parent->end()) it = parent->emplace(leaf, Value(Array{}, line_)).first;
      if (!it->second.is_array()) fail("key is not an array of tables", join(parts));
      it->second.array().emplace_back(Table{}, line_);
      return &it->second.array().back().table();
    }
    auto it = parent->find(leaf);
    if (it == parent->end()) {
      it = parent->emplace(leaf, Value(Table{}, line_)).first;
    } else if (!it->second.is_table()) {
      fail("duplicate key", join(parts));
    }
    return &it->second.table();
  }

  void key_value(Table& current) {
    const int line = line_;
    const auto parts = key_path();
    skip_ws();
    if (get() != '=') fail("expected '='", join(parts));
    skip_ws();
    Value v = value();
    v.line = line;
    Table* t = descend(current, parts, parts.size() - 1);
    if (t->count(parts.back())) fail("duplicate key", join(parts));
    t->emplace(parts.back(), std::move(v));
  }

  std::string basic_string() {
    get();  // opening quote
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = get();
      if (c == '"') return out;
      if (c == '\\') {
        const char e = get();
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
        continue;
      }
      out += c;
    }
  }

  std::string literal_string() {
    get();
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = get();
      if (c == '\'') return out;
      out += c;
    }
  }

  Value value() {
    const int line = line_;
    const char c = peek();
    if (c == '"') return Value(basic_string(), line);
    if (c == '\'') return Value(literal_string(), line);
    if (c == '[') {
      get();
      Array items;
      while (true) {
        skip_any();
        if (peek() == ']') {
          get();
          break;
        }
        items.push_back(value());
        skip_any();
        if (peek() == ',') {
          get();
          continue;
        }
        skip_any();
        if (peek() != ']') fail("expected ',' or ']' in array");
      }
      return Value(std::move(items), line);
    }
    if (c == '{') {
      get();
      Table t;
      while (true) {
        skip_ws();
        if (peek() == '}') {
          get();
          break;
        }
        key_value(t);
        skip_ws();
        if (peek() == ',') {
          get();
          continue;
        }
        if (peek() != '}') fail("expected ',' or '}' in inline table");
      }
      return Value(std::move(t), line);
    }
    std::string token;
    while (!eof()) {
      const char d = peek();
      if (d == ',' || d == ']' || d == '}' || d == ' ' || d == '\t' || d == '\r' || d == '\n' ||
          d == '#')
        break;
      token += get();
    }
    if (token.empty()) fail("expected a value");
    if (token == "true") return Value(true, line);
    if (token == "false") return Value(false, line);
    std::string clean;
    for (char ch : token)
      if (ch != '_') clean += ch;
    const bool is_float = clean.find_first_of(".eEn") != std::string::npos;
    try {
      if (is_float) return Value(parse_double(clean), line);
      std::size_t used = 0;
      const long long iv = std::stoll(clean, &used, 10);
      if (used != clean.size()) fail("malformed number '" + token + "'");
      return Value(static_cast<std::int64_t>(iv), line);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      fail("malformed value '" + token + "'");
    }
  }

  std::string_view s_;
  std::string origin_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

void merge_into(Table& base, const Table& over) {
  for (const auto& [k, v] : over) {
    auto it = base.find(k);
    if (it != base.end() && it->second.is_table() && v.is_table()) {
      // Deep copy before mutating so shared subtables are not aliased.
      Table copy = it->second.table();
      merge_into(copy, v.table());
      it->second = Value(std::move(copy), v.line);
    } else {
      base[k] = v;
    }
  }
}

Table resolve_includes(Table root, const std::filesystem::path& origin, int depth) {
  auto it = root.find("include");
  if (it == root.end()) return root;
  if (depth > 16) throw ConfigError("include", it->second.line, "include nesting too deep");
  std::vector<std::string> files;
  if (it->second.is_string()) {
    files.push_back(std::get<std::string>(it->second.data));
  } else if (it->second.is_array()) {
    for (const auto& v : it->second.array()) {
      if (!v.is_string()) throw ConfigError("include", v.line, "include entries must be strings");
      files.push_back(std::get<std::string>(v.data));
    }
  } else {
    throw ConfigError("include", it->second.line, "include must be a string or array");
  }
  root.erase(it);
  Table merged;
  const auto dir = origin.empty() ? std::filesystem::path(".") : origin.parent_path();
  for (const auto& f : files) {
    const auto path = dir / f;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("include", 0, "cannot read included file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    Table child = Parser(ss.str(), path.string()).run();
    merge_into(merged, resolve_includes(std::move(child), path, depth + 1));
  }
  merge_into(merged, root);
  return merged;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string key_text(const std::string& k) {
  bool bare = !k.empty();
  for (char c : k)
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
          c == '-'))
      bare = false;
  return bare ? k : quote(k);
}

std::string scalar_text(const Value& v);

std::string inline_text(const Value& v) {
  if (v.is_array()) {
    std::string out = "[";
    const auto& a = v.array();
    for (std::size_t i = 0; i < a.size(); ++i) out += (i ? ", " : "") + inline_text(a[i]);
    return out + "]";
  }
  if (v.is_table()) {
    std::string out = "{";
    bool first = true;
    for (const auto& [k, sub] : v.table()) {
      out += (first ? "" : ", ") + key_text(k) + " = " + inline_text(sub);
      first = false;
    }
    return out + "}";
  }
  return scalar_text(v);
}

std::string scalar_text(const Value& v) {
  if (std::holds_alternative<bool>(v.data)) return std::get<bool>(v.data) ? "true" : "false";
  if (std::holds_alternative<std::int64_t>(v.data))
    return format_number(std::get<std::int64_t>(v.data));
  if (std::holds_alternative<double>(v.data)) {
    std::string t = format_number(std::get<double>(v.data));
    if (t.find_first_of(".en") == std::string::npos) t += ".0";
    return t;
  }
  return quote(std::get<std::string>(v.data));
}

bool is_table_array(const Value& v) {
  if (!v.is_array() || v.array().empty()) return false;
  for (const auto& e : v.array())
    if (!e.is_table()) return false;
  return true;
}

void write_table(std::string& out, const Table& t, const std::string& prefix) {
  for (const auto& [k, v] : t)
    if (!v.is_table() && !is_table_array(v)) out += key_text(k) + " = " + inline_text(v) + "\n";
  for (const auto& [k, v] : t) {
    const std::string path = prefix.empty() ? key_text(k) : prefix + "." + key_text(k);
    if (v.is_table()) {
      out += "\n[" + path + "]\n";
      write_table(out, v.table(), path);
    } else if (is_table_array(v)) {
      for (const auto& e : v.array()) {
        out += "\n[[" + path + "]]\n";
        write_table(out, e.table(), path);
      }
    }
  }
}

const Table& empty_table() {
  static const Table t;
  return t;
}

}  // namespace

Table parse(std::string_view text, const std::filesystem::path& origin) {
  Table root = Parser(text, origin.string()).run();
  return resolve_includes(std::move(root), origin, 0);
}

Table parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string write(const Table& root) {
  std::string out;
  write_table(out, root, "");
  return out;
}

const Value* Reader::find(const std::string& key) {
  used_.insert(key);
  auto it = table_->find(key);
  return it == table_->end() ? nullptr : &it->second;
}

bool Reader::has(const std::string& key) const { return table_->count(key) > 0; }

std::string Reader::qualified(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

int Reader::line_of(const std::string& key) const {
  auto it = table_->find(key);
  return it == table_->end() ? 0 : it->second.line;
}

double Reader::number(const std::string& key, double fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (std::holds_alternative<double>(v->data)) return std::get<double>(v->data);
  if (std::holds_alternative<std::int64_t>(v->data))
    return static_cast<double>(std::get<std::int64_t>(v->data));
  throw ConfigError(qualified(key), v->line, "expected a number");
}

double Reader::number(const std::string& key) {
  if (!has(key)) throw ConfigError(qualified(key), 0, "required key missing");
  return number(key, 0.0);
}

std::int64_t Reader::integer(const std::string& key, std::int64_t fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (std::holds_alternative<std::int64_t>(v->data)) return std::get<std::int64_t>(v->data);
  throw ConfigError(qualified(key), v->line, "expected an integer");
}

bool Reader::boolean(const std::string& key, bool fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (std::holds_alternative<bool>(v->data)) return std::get<bool>(v->data);
  throw ConfigError(qualified(key), v->line, "expected a boolean");
}

std::string Reader::string(const std::string& key, const std::string& fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (v->is_string()) return std::get<std::string>(v->data);
  throw ConfigError(qualified(key), v->line, "expected a string");
}

std::vector<double> Reader::numbers(const std::string& key, const std::vector<double>& fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) throw ConfigError(qualified(key), v->line, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : v->array()) {
    if (std::holds_alternative<double>(e.data)) {
      out.push_back(std::get<double>(e.data));
    } else if (std::holds_alternative<std::int64_t>(e.data)) {
      out.push_back(static_cast<double>(std::get<std::int64_t>(e.data)));
    } else {
      throw ConfigError(qualified(key), v->line, "expected an array of numbers");
    }
  }
  return out;
}

std::vector<std::string> Reader::strings(const std::string& key,
                                         const std::vector<std::string>& fallback) {
  const Value* v = find(key);
  if (v == nullptr) return fallback;
  if (!v->is_array()) throw ConfigError(qualified(key), v->line, "expected an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v->array()) {
    if (!e.is_string()) throw ConfigError(qualified(key), v->line, "expected an array of strings");
    out.push_back(std::get<std::string>(e.data));
  }
  return out;
}

Reader& Reader::sub(const std::string& key) {
  const Value* v = find(key);
  const Table* t = &empty_table();
  if (v != nullptr) {
    if (!v->is_table()) throw ConfigError(qualified(key), v->line, "expected a table");
    t = &v->table();
  }
  children_.push_back(std::make_unique<Reader>(t, qualified(key)));
  return *children_.back();
}

std::vector<Reader*> Reader::tables(const std::string& key) {
  const Value* v = find(key);
  std::vector<Reader*> out;
  if (v == nullptr) return out;
  if (!is_table_array(*v))
    throw ConfigError(qualified(key), v->line, "expected an array of tables");
  const auto& arr = v->array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    children_.push_back(
        std::make_unique<Reader>(&arr[i].table(), qualified(key) + "[" + std::to_string(i) + "]"));
    out.push_back(children_.back().get());
  }
  return out;
}

std::vector<std::string> Reader::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : *table_) out.push_back(k);
  return out;
}

void Reader::finish() const {
  for (const auto& [k, v] : *table_)
    if (!used_.count(k)) throw ConfigError(qualified(k), v.line, "unknown key");
  for (const auto& c : children_) c->finish();
}

}  // namespace ehsim::toml
