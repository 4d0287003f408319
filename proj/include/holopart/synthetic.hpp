#pragma once

#include "holopart/curation.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace holopart::synthetic {

enum class Family { table, chair, lamp, stacked };

std::string to_string(Family family);
Family family_from_string(const std::string& name);
inline constexpr Family kAllFamilies[] = {Family::table, Family::chair, Family::lamp, Family::stacked};

struct AssemblySpec {
  Family family = Family::table;
  std::uint64_t seed = 0;
  double occlusion = 0.0;  // target fraction of total part area hidden inside the assembly
};

struct Assembly {
  curation::PartObject object;  // whole = visible surface of the merged parts, in the [-1, 1] frame
  Family family = Family::table;
  double occlusion_target = 0.0;
  double occlusion_measured = 0.0;   // 1 - visible area / total area after visibility culling
  std::vector<double> part_hidden;   // per-part hidden area fraction
  int focus_part = 0;                // part with the largest hidden fraction
};

struct GenOptions {
  double max_edge = 0.05;  // tessellation bound in the normalized frame
  curation::VisibilityOptions visibility{};
  int estimate_samples = 1500;
};

/// Occlusion range the family can reach, estimated at the extremes of its contact parameter.
double max_occlusion(Family family, std::uint64_t seed, const GenOptions& options = {});

/// Deterministic given the spec. Throws InputError when the target exceeds the family's range.
Assembly gen_assembly(const AssemblySpec& spec, const GenOptions& options = {});

struct DatasetEntry {
  std::string id;
  Family family = Family::table;
  std::uint64_t seed = 0;
  double occlusion = 0.0;
  std::string split;  // train | val | test
};

/// `n` specs cycling through `families`. Occlusion targets are drawn per entry inside the
/// family's range. Splits are 80/10/10 by a seed-hash rank stratified per family.
std::vector<DatasetEntry> gen_dataset(int n, std::span<const Family> families, std::uint64_t seed);

/// JSON lines, one entry per line, preceded by {"config": header} when a header is given.
void write_manifest(std::span<const DatasetEntry> entries, const std::filesystem::path& path,
                    const nlohmann::json& header = nullptr);
std::vector<DatasetEntry> read_manifest(const std::filesystem::path& path);

}  // namespace holopart::synthetic
