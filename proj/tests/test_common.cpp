#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "ehsim/common/csv.hpp"
#include "ehsim/common/error.hpp"
#include "ehsim/common/fft.hpp"
#include "ehsim/common/rng.hpp"
#include "ehsim/common/toml.hpp"

using namespace ehsim;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "ehsim_test_common";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("rng is reproducible and seeds split by label") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "amser/S3") == derive_seed(1, "amser/S3"));
  CHECK(derive_seed(1, "amser/S3") != derive_seed(1, "amser/S4"));
  CHECK(derive_seed(1, std::uint64_t{3}) != derive_seed(2, std::uint64_t{3}));
}

TEST_CASE("fnv1a64 matches reference vectors") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("rng draws stay in range and have sane moments") {
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  for (int i = 0; i < 1000; ++i) CHECK(r.below(7) < 7);
  double e = 0.0;
  for (int i = 0; i < n; ++i) e += r.exponential(2.0);
  CHECK(std::abs(e / n - 0.5) < 0.01);
}

TEST_CASE("numbers round-trip through their shortest text") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456789.125, -2.5, 6.02214076e23}) {
    CHECK(parse_double(format_number(v)) == v);
  }
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(std::int64_t{-17}) == "-17");
  CHECK_THROWS_AS(parse_double("abc"), InvalidArgument);
}

TEST_CASE("fft forward/inverse round trip and variance spectrum sums to variance") {
  std::vector<double> x(100);
  Rng r(3);
  for (double& v : x) v = r.normal() + 5.0;
  const auto bins = fft::forward(x);
  CHECK(bins.size() == 51);
  const auto back = fft::inverse(bins, x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= 100.0;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= 100.0;
  const auto spec = fft::variance_spectrum(x);
  double total = 0.0;
  for (double p : spec) total += p;
  CHECK(spec[0] == 0.0);
  CHECK(total == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("csv writer emits header comments and rejects ragged rows") {
  const auto path = scratch("a.csv");
  FileHeader h{"0.1.0", "abcd", 9};
  {
    CsvWriter w(path, {"x", "y"}, &h);
    w.cell(1).cell(0.5).end_row();
    w.cell("s");
    CHECK_THROWS_AS(w.end_row(), RuntimeError);
  }
  const auto t = read_csv(path);
  REQUIRE(t.comments.size() == 3);
  CHECK(t.comments[1] == " config_hash=abcd");
  CHECK(t.header == std::vector<std::string>{"x", "y"});
  CHECK(t.rows.at(0).at(1) == "0.5");
  CHECK_THROWS_AS(t.column("z"), RuntimeError);
}

TEST_CASE("toml subset parses the constructs used by scenario files") {
  const char* text = R"(
# comment
title = "demo"   # trailing
seed = 42
ratio = 0.25
flag = true
list = [1, 2.5,
        3]
names = ['a', "b"]
point = { x = 1, y = 2 }

[signals]
modalities = ["ECG", "EDA"]
rate.ECG = 100

[[edgesim.nodes]]
name = "edge"
speed = 1e9

[[edgesim.nodes]]
name = "cloud"
speed = 4e9
)";
  const auto t = toml::parse(text);
  toml::Reader r(&t, "");
  CHECK(r.string("title", "") == "demo");
  CHECK(r.integer("seed", 0) == 42);
  CHECK(r.number("ratio") == 0.25);
  CHECK(r.boolean("flag", false));
  CHECK(r.numbers("list", {}) == std::vector<double>{1, 2.5, 3});
  CHECK(r.strings("names", {}) == std::vector<std::string>{"a", "b"});
  auto& p = r.sub("point");
  CHECK(p.number("x") == 1);
  CHECK_THROWS_AS(r.finish(), ConfigError);
  CHECK(p.number("y") == 2);
  auto& s = r.sub("signals");
  CHECK(s.strings("modalities", {}).size() == 2);
  CHECK(s.sub("rate").number("ECG") == 100);
  auto nodes = r.sub("edgesim").tables("nodes");
  REQUIRE(nodes.size() == 2);
  CHECK(nodes[1]->string("name", "") == "cloud");
  CHECK(nodes[1]->number("speed") == 4e9);
  nodes[0]->string("name", "");
  nodes[0]->number("speed");
  CHECK_NOTHROW(r.finish());
}

TEST_CASE("toml errors carry key and line") {
  CHECK_THROWS_AS(toml::parse("a = 1\na = 2\n"), ConfigError);
  CHECK_THROWS_AS(toml::parse("a = \n"), ConfigError);
  const auto t = toml::parse("x = 1\ntypo = 3\n");
  toml::Reader r(&t, "");
  r.number("x");
  try {
    r.finish();
    FAIL("expected unknown key");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("typo") != std::string::npos);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  const auto bad = toml::parse("x = \"text\"\n");
  toml::Reader rb(&bad, "");
  CHECK_THROWS_AS(rb.number("x"), ConfigError);
}

TEST_CASE("toml canonical write is stable and re-parses") {
  const auto t = toml::parse("b = 2\na = 1.5\n[z]\nk = \"v\"\n[c]\nn = [1, 2]\n");
  const auto once = toml::write(t);
  const auto twice = toml::write(toml::parse(once));
  CHECK(once == twice);
  CHECK(once.find("a = 1.5") < once.find("b = 2"));
}

TEST_CASE("toml include merges beneath the including file") {
  const auto base = scratch("base.toml");
  const auto top = scratch("top.toml");
  {
    std::ofstream(base) << "a = 1\nb = 2\n[t]\nx = 1\ny = 2\n";
    std::ofstream(top) << "include = \"base.toml\"\nb = 3\n[t]\ny = 5\n";
  }
  const auto t = toml::parse_file(top);
  toml::Reader r(&t, "");
  CHECK(r.number("a") == 1);
  CHECK(r.number("b") == 3);
  CHECK(r.sub("t").number("x") == 1);
  CHECK(r.sub("t").number("y") == 5);
  CHECK_FALSE(r.has("include"));
}

TEST_CASE("missing artifact error names the producing command") {
  MissingArtifact e("out/pool/manifest.csv", "train-pool");
  CHECK(std::string(e.what()).find("ehsim train-pool") != std::string::npos);
}
