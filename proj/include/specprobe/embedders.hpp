#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "specprobe/canonical_json.hpp"
#include "specprobe/digest.hpp"
#include "specprobe/embedding.hpp"
#include "specprobe/epochs.hpp"
#include "specprobe/errors.hpp"
#include "specprobe/welch.hpp"

namespace specprobe {

// Defaults target the reference 5 s, 200 Hz epochs: 100-sample segments give
// 19 half-overlapping windows and 2 Hz bins, enough averaging that per-bin
// scatter stays small relative to typical parameter effects.
struct WelchParams {
  std::size_t segment_len = 100;
  double overlap = 0.5;
};

namespace embed_detail {

inline constexpr double kLogFloor = 1e-12;

inline void require_single_channel(const EpochSet& epochs) {
  if (epochs.channels != 1)
    throw validation_error(
        "embedder expects single-channel epochs, got channels = " +
        std::to_string(epochs.channels));
  if (epochs.rows() == 0) throw validation_error("embedder: empty epoch set");
  if (epochs.samples() < 8)
    throw validation_error("embedder: epochs too short for a PSD estimate");
}

inline std::vector<double> epoch_row(const EpochSet& epochs, std::size_t i) {
  std::vector<double> row(epochs.samples());
  for (std::size_t j = 0; j < row.size(); ++j)
    row[j] = epochs.data(Eigen::Index(i), Eigen::Index(j));
  return row;
}

inline std::string digest_config(const json& cfg) {
  return digest_hex(canonical_dump(cfg));
}

}  // namespace embed_detail

// Log-power features on the Welch grid restricted to [1, 90] Hz.
inline EmbeddingSet embed_logpsd(const EpochSet& epochs,
                                 const WelchParams& welch = {}) {
  embed_detail::require_single_channel(epochs);
  if (epochs.fs / 2.0 < 90.0)
    throw validation_error(
        "embed_logpsd needs the PSD to reach 90 Hz; fs = " +
        std::to_string(epochs.fs) + " is too low");
  if (welch.segment_len > epochs.samples())
    throw validation_error("embed_logpsd: Welch segment exceeds epoch length");

  // Resolve the retained bin set once; every epoch shares the grid.
  Spectrum first = welch_psd(embed_detail::epoch_row(epochs, 0), epochs.fs,
                              welch.segment_len, welch.overlap);
  std::vector<std::size_t> keep;
  for (std::size_t k = 0; k < first.freqs.size(); ++k)
    if (first.freqs[k] >= 1.0 && first.freqs[k] <= 90.0) keep.push_back(k);
  if (keep.empty())
    throw validation_error("embed_logpsd: no PSD bins fall inside [1, 90] Hz");

  EmbeddingSet out;
  out.data.resize(Eigen::Index(epochs.rows()), Eigen::Index(keep.size()));
  for (std::size_t i = 0; i < epochs.rows(); ++i) {
    const Spectrum psd =
        (i == 0) ? first
                 : welch_psd(embed_detail::epoch_row(epochs, i), epochs.fs,
                             welch.segment_len, welch.overlap);
    for (std::size_t j = 0; j < keep.size(); ++j)
      out.data(Eigen::Index(i), Eigen::Index(j)) =
          std::log10(psd.powers[keep[j]] + embed_detail::kLogFloor);
  }

  out.embedder_id = "logpsd";
  out.config_digest = embed_detail::digest_config(
      json{{"embedder", "logpsd"},
           {"segment_len", welch.segment_len},
           {"overlap", welch.overlap},
           {"f_lo", 1.0},
           {"f_hi", 90.0}});
  return out;
}

using Band = std::pair<double, double>;

inline std::vector<Band> default_bands() {
  return {{1.0, 4.0}, {4.0, 8.0}, {8.0, 13.0}, {13.0, 30.0}, {30.0, 60.0}};
}

// Log of mean Welch power within each band (band edges inclusive).
inline EmbeddingSet embed_bandpower(const EpochSet& epochs,
                                    const std::vector<Band>& bands =
                                        default_bands(),
                                    const WelchParams& welch = {}) {
  embed_detail::require_single_channel(epochs);
  if (bands.empty()) throw validation_error("embed_bandpower: no bands given");
  for (const Band& b : bands) {
    if (!(b.first > 0.0) || !(b.second > b.first))
      throw validation_error("embed_bandpower: band edges must satisfy 0 < lo < hi");
    if (b.second > epochs.fs / 2.0)
      throw validation_error(
          "embed_bandpower: band reaches past the Nyquist frequency");
  }
  if (welch.segment_len > epochs.samples())
    throw validation_error("embed_bandpower: Welch segment exceeds epoch length");

  Spectrum first = welch_psd(embed_detail::epoch_row(epochs, 0), epochs.fs,
                              welch.segment_len, welch.overlap);
  std::vector<std::vector<std::size_t>> members(bands.size());
  for (std::size_t b = 0; b < bands.size(); ++b) {
    for (std::size_t k = 0; k < first.freqs.size(); ++k)
      if (first.freqs[k] >= bands[b].first && first.freqs[k] <= bands[b].second)
        members[b].push_back(k);
    if (members[b].empty())
      throw validation_error(
          "embed_bandpower: band [" + std::to_string(bands[b].first) + ", " +
          std::to_string(bands[b].second) + "] Hz contains no PSD bins");
  }

  EmbeddingSet out;
  out.data.resize(Eigen::Index(epochs.rows()), Eigen::Index(bands.size()));
  for (std::size_t i = 0; i < epochs.rows(); ++i) {
    const Spectrum psd =
        (i == 0) ? first
                 : welch_psd(embed_detail::epoch_row(epochs, i), epochs.fs,
                             welch.segment_len, welch.overlap);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      double acc = 0.0;
      for (std::size_t k : members[b]) acc += psd.powers[k];
      out.data(Eigen::Index(i), Eigen::Index(b)) =
          std::log10(acc / double(members[b].size()) + embed_detail::kLogFloor);
    }
  }

  json band_json = json::array();
  for (const Band& b : bands) band_json.push_back({b.first, b.second});
  out.embedder_id = "bandpower";
  out.config_digest = embed_detail::digest_config(
      json{{"embedder", "bandpower"},
           {"segment_len", welch.segment_len},
           {"overlap", welch.overlap},
           {"bands", band_json}});
  return out;
}

}  // namespace specprobe
