#pragma once

#include <filesystem>
#include <vector>

#include "ehsim/common/csv.hpp"
#include "ehsim/signal/types.hpp"

namespace ehsim::signal {

// CSV with columns time_s,value. Times are start_time_s + i / rate.
void write_signal_csv(const std::filesystem::path& path, const Signal& signal,
                      const FileHeader* header = nullptr);
Signal read_signal_csv(const std::filesystem::path& path, const ModalityId& modality);

// Binary columnar dump: magic "EHSG", u32 version, u32 count, then per
// signal: u32 key length, key bytes, f64 rate, f64 start, u64 n, n x f64.
// Little-endian host layout; truth is not stored.
void write_signal_bin(const std::filesystem::path& path, const std::vector<Signal>& signals);
std::vector<Signal> read_signal_bin(const std::filesystem::path& path);

}  // namespace ehsim::signal
