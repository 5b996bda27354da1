#pragma once

#include <cstddef>
#include <map>
#include <optional>

#include "ehsim/signal/synth.hpp"
#include "ehsim/signal/types.hpp"

namespace ehsim::signal {

// Highest DFT bin strictly below `low_hz` for a length-n window at `rate_hz`.
// Bins 1..limit form the drift band; everything above is signal band.
std::size_t noise_bin_limit(std::size_t n, double rate_hz, double low_hz);

// Blind SNR: variance above the drift band over variance inside it, in dB,
// clamped to [kSnrFloorDb, kSnrCeilingDb]. Needs at least one second.
double estimate_snr(const Signal& signal, const ModalityProfile& profile);
double estimate_snr(const Signal& signal, const SynthConfig& config = {});

bool is_detached(const Signal& signal, const ModalityProfile& profile);

// Label with hysteresis. Inside a band around a threshold the previous label
// is kept when it borders that band; otherwise (or with no history) the
// plain threshold decides.
QualityLabel label_for(double snr_db, const QualityThresholds& th,
                       std::optional<QualityLabel> previous = std::nullopt);

QualityReport assess_modalities(const std::map<ModalityId, Signal>& signals,
                                const QualityThresholds& thresholds,
                                const QualityReport* previous = nullptr,
                                const SynthConfig& config = {});

}  // namespace ehsim::signal
