#include "flowpatch/harness/dataset.hpp"

#include <map>
#include <regex>

#include "flowpatch/core/error.hpp"
#include "flowpatch/core/io.hpp"

namespace flowpatch::harness {
namespace {

struct Found {
  std::optional<std::filesystem::path> first, second, flow, valid;
};

FramePair load_entry(const DatasetEntry& e) {
  FramePair pair;
  pair.id = e.id;
  pair.first = read_ppm(e.first);
  pair.second = read_ppm(e.second);
  if (!(pair.first.shape() == pair.second.shape())) throw ShapeError("frames differ in shape");
  if (e.flow) {
    pair.ground_truth = read_flo(*e.flow);
    if (pair.ground_truth->height() != pair.first.height() || pair.ground_truth->width() != pair.first.width()) {
      throw ShapeError("ground truth does not match the frame size");
    }
  }
  if (e.valid) {
    pair.valid = read_mask_ppm(*e.valid);
    if (pair.valid->height() != pair.first.height() || pair.valid->width() != pair.first.width()) {
      throw ShapeError("validity mask does not match the frame size");
    }
  }
  return pair;
}

}  // namespace

DatasetIndex ingest_dataset(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw IoError(root.string() + " is not a directory");

  static const std::regex pattern(R"((\d+)(_1\.ppm|_2\.ppm|\.flo|_valid\.ppm))");
  std::map<std::string, Found> found;
  DatasetIndex index;
  bool any = false;
  for (const auto& item : std::filesystem::directory_iterator(root)) {
    if (!item.is_regular_file()) continue;
    any = true;
    const std::string name = item.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, pattern)) {
      index.report.issues.push_back("ignored " + name + ": not a dataset file name");
      continue;
    }
    Found& f = found[m[1].str()];
    const std::string kind = m[2].str();
    if (kind == "_1.ppm") f.first = item.path();
    else if (kind == "_2.ppm") f.second = item.path();
    else if (kind == ".flo") f.flow = item.path();
    else f.valid = item.path();
  }
  index.report.empty_directory = !any;

  for (const auto& [id, f] : found) {
    if (!f.first || !f.second) {
      index.report.issues.push_back("skipped " + id + ": missing " + (f.first ? "frame 2" : "frame 1"));
      continue;
    }
    DatasetEntry entry{id, *f.first, *f.second, f.flow, f.valid};
    try {
      (void)load_entry(entry);
    } catch (const Error& err) {
      index.report.issues.push_back("skipped " + id + ": " + err.what());
      continue;
    }
    index.entries.push_back(std::move(entry));
  }
  return index;
}

Dataset load_dataset(const DatasetIndex& index) {
  Dataset out;
  out.reserve(index.entries.size());
  for (const auto& e : index.entries) out.push_back(load_entry(e));
  return out;
}

}  // namespace flowpatch::harness
