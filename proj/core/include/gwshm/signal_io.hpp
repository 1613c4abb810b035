#pragma once

#include <filesystem>
#include <string>

#include "gwshm/signal.hpp"
#include "gwshm/spectrogram.hpp"

namespace gwshm {

/// Writes `content` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.  Creates parent
/// directories as needed.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

/// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

/// Column-name map for ensemble CSV files.  Defaults match the canonical
/// header; override entries to ingest files with different column names.
/// Column order is irrelevant (columns are located by name) and extra
/// columns are ignored.
struct CsvSchema {
  std::string path_id = "path_id";
  std::string state_label = "state_label";
  std::string realization_index = "realization_index";
  std::string sample_rate = "sample_rate";
  std::string samples = "samples";  ///< semicolon-separated, usually quoted
};

/// Reads an ensemble CSV (one record per row, samples as a semicolon-
/// separated list).  Throws DataError naming the offending row on any
/// malformed or inconsistent content.
SignalEnsemble ingest_csv(const std::filesystem::path& file,
                          const CsvSchema& schema = {});

/// Writes an ensemble in the canonical column order
/// (path_id, state_label, realization_index, sample_rate, samples).
void write_ensemble_csv(const SignalEnsemble& ensemble,
                        const std::filesystem::path& file);

/// Writes a spectrogram as a CSV matrix: a frequency header row, then one
/// row per analysis frame (leading column = frame time in seconds).
void write_spectrogram_csv(const Spectrogram& spec,
                           const std::filesystem::path& file);

}  // namespace gwshm
