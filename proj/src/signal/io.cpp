#include "ehsim/signal/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ehsim/common/error.hpp"

namespace ehsim::signal {
namespace {

constexpr char kMagic[4] = {'E', 'H', 'S', 'G'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
    throw RuntimeError("truncated signal dump " + path.string());
  return v;
}

}  // namespace

void write_signal_csv(const std::filesystem::path& path, const Signal& signal,
                      const FileHeader* header) {
  CsvWriter w(path, {"time_s", "value"}, header);
  for (std::size_t i = 0; i < signal.samples.size(); ++i) {
    w.cell(signal.start_time_s + static_cast<double>(i) / signal.sampling_rate_hz);
    w.cell(signal.samples[i]);
    w.end_row();
  }
}

Signal read_signal_csv(const std::filesystem::path& path, const ModalityId& modality) {
  const CsvTable t = read_csv(path);
  const std::size_t ct = t.column("time_s");
  const std::size_t cv = t.column("value");
  Signal s;
  s.modality = modality;
  std::vector<double> times;
  for (const auto& row : t.rows) {
    times.push_back(parse_double(row.at(ct)));
    s.samples.push_back(parse_double(row.at(cv)));
  }
  if (times.size() < 2) throw RuntimeError("signal file " + path.string() + " has fewer than 2 rows");
  s.start_time_s = times.front();
  s.sampling_rate_hz =
      static_cast<double>(times.size() - 1) / (times.back() - times.front());
  s.truth.clean_samples = s.samples;
  return s;
}

void write_signal_bin(const std::filesystem::path& path, const std::vector<Signal>& signals) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(signals.size()));
  for (const auto& s : signals) {
    const auto& key = s.modality.key();
    put(out, static_cast<std::uint32_t>(key.size()));
    out.write(key.data(), static_cast<std::streamsize>(key.size()));
    put(out, s.sampling_rate_hz);
    put(out, s.start_time_s);
    put(out, static_cast<std::uint64_t>(s.samples.size()));
    out.write(reinterpret_cast<const char*>(s.samples.data()),
              static_cast<std::streamsize>(s.samples.size() * sizeof(double)));
  }
  if (!out) throw RuntimeError("write failed for " + path.string());
}

std::vector<Signal> read_signal_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeError("cannot open " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw RuntimeError(path.string() + " is not a signal dump");
  if (get<std::uint32_t>(in, path) != kVersion)
    throw RuntimeError("unsupported signal dump version in " + path.string());
  const auto count = get<std::uint32_t>(in, path);
  std::vector<Signal> out;
  for (std::uint32_t c = 0; c < count; ++c) {
    const auto len = get<std::uint32_t>(in, path);
    std::string key(len, '\0');
    if (!in.read(key.data(), len)) throw RuntimeError("truncated signal dump " + path.string());
    Signal s;
    s.modality = ModalityId(key);
    s.sampling_rate_hz = get<double>(in, path);
    s.start_time_s = get<double>(in, path);
    const auto n = get<std::uint64_t>(in, path);
    s.samples.resize(n);
    if (!in.read(reinterpret_cast<char*>(s.samples.data()),
                 static_cast<std::streamsize>(n * sizeof(double))))
      throw RuntimeError("truncated signal dump " + path.string());
    s.truth.clean_samples = s.samples;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace ehsim::signal
