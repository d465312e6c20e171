#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "flowpatch/core/frame_pair.hpp"

namespace flowpatch::harness {

struct DatasetEntry {
  std::string id;
  std::filesystem::path first;
  std::filesystem::path second;
  std::optional<std::filesystem::path> flow;
  std::optional<std::filesystem::path> valid;
};

struct IngestReport {
  /// One human-readable line per skipped pair or stray file.
  std::vector<std::string> issues;
  bool empty_directory = false;
};

struct DatasetIndex {
  std::vector<DatasetEntry> entries;  // sorted by id
  IngestReport report;
};

/// Scans `root` for NNNN_1.ppm / NNNN_2.ppm with optional NNNN.flo and
/// NNNN_valid.ppm. Every referenced file is parsed once; pairs with a
/// missing frame, unreadable file or mismatched shapes are skipped and
/// reported. Throws IoError if `root` is not a directory.
DatasetIndex ingest_dataset(const std::filesystem::path& root);

/// Loads every indexed pair (frames, ground truth and validity if present).
Dataset load_dataset(const DatasetIndex& index);

}  // namespace flowpatch::harness
