#pragma once

#include "holopart/field.hpp"
#include "holopart/geometry.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace holopart::curation {

/// A whole shape with its complete parts and a per-face part id on the whole.
struct PartObject {
  std::string source_id;
  TriMesh whole;
  std::vector<TriMesh> parts;
  std::vector<int> surface_masks;  // one part id per face of `whole`

  /// Visible surface patch of part `k` on the whole.
  TriMesh patch(int k) const;
};

/// Throws InputError if the PartObject invariants do not hold.
void validate(const PartObject& object);

struct BinaryImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 0 or 1

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;
};

enum class View { frontal, side };

inline constexpr int kSilhouetteResolution = 256;
inline constexpr int kMinParts = 2;
inline constexpr int kMaxParts = 15;
inline constexpr double kComponentPercentile = 85.0;
inline constexpr double kDominanceThreshold = 0.90;
inline constexpr double kFloaterVolumeRatio = 1e-4;
inline constexpr int kVisibilityViews = 162;

/// Orthographic silhouette looking along -Z (frontal) or -X (side). The square image covers
/// `frame` (default: the mesh box) with a 5% margin on each side, scaled by the frame's
/// longest 3D axis. When no pixel center is covered, the pixel under the projected vertex
/// centroid is set so the silhouette is never empty.
BinaryImage render_silhouette(const TriMesh& mesh, View view, int resolution = kSilhouetteResolution,
                              const std::optional<AABB>& frame = std::nullopt);

/// Number of 8-connected foreground components.
int count_components(const BinaryImage& image);

enum class Rule { none, mesh_count, components, dominance };
std::string to_string(Rule rule);

struct CurationDecision {
  std::string id;
  bool pass = true;
  Rule failed_rule = Rule::none;
  std::map<std::string, double> diagnostics;
  std::vector<std::string> warnings;
};

CurationDecision filter_mesh_count(const std::string& id, std::size_t part_count);

/// Per-object component statistics over all part x view renders.
struct ComponentStats {
  std::string id;
  double mean = 0.0;
  double top3_mean = 0.0;
};
ComponentStats component_stats(const std::string& id, std::span<const TriMesh> parts,
                               int resolution = kSilhouetteResolution);

/// Linear interpolation between order statistics (rank = q/100 * (n-1)).
double percentile(std::vector<double> values, double q);

/// Fails objects whose mean or top-3 mean is strictly above the corpus percentile of that
/// statistic. Corpora with fewer than 2 objects pass with a warning.
std::vector<CurationDecision> filter_connected_components(std::span<const ComponentStats> corpus,
                                                          double q = kComponentPercentile);

struct ViewPair {
  BinaryImage frontal;
  BinaryImage side;
};

/// Fails if one part covers at least `threshold` of the whole's foreground in both views.
CurationDecision filter_volume_dominance(const std::string& id, const ViewPair& whole,
                                         std::span<const ViewPair> parts, double threshold = kDominanceThreshold);

/// Renders whole and parts in the whole's frame and applies the dominance rule.
CurationDecision filter_volume_dominance(const std::string& id, std::span<const TriMesh> parts,
                                         int resolution = kSilhouetteResolution,
                                         double threshold = kDominanceThreshold);

struct FloaterMerge {
  std::vector<TriMesh> parts;
  std::size_t merged = 0;
};

/// Parts whose box volume is below `ratio` of the assembly's box volume are appended to the
/// nearest remaining part.
FloaterMerge merge_floaters(std::span<const TriMesh> parts, double ratio = kFloaterVolumeRatio);

struct RawObject {
  std::string id;
  std::vector<TriMesh> parts;
};

/// Floater merge, then every rule in order mesh_count, components, dominance. Component
/// percentiles are taken over the whole corpus before any verdict.
std::vector<CurationDecision> curate(std::span<const RawObject> corpus, int resolution = kSilhouetteResolution);

/// `n` directions: icosphere vertices when `n` is 12, 42, 162, 642 or 2562, otherwise a
/// Fibonacci lattice.
std::vector<Vec3> view_directions(int n);

struct VisibilityOptions {
  int n_views = kVisibilityViews;
  int resolution = 512;  // ID-buffer pixels per side
};

/// Keeps faces that win at least one pixel of an orthographic ID-buffer render from any view.
/// Depth ties go to the lower face index. Labels are carried along.
TriMesh visibility_cull(const TriMesh& mesh, const VisibilityOptions& options = {});

/// Per-face visibility flags behind visibility_cull.
std::vector<std::uint8_t> visible_faces(const TriMesh& mesh, const VisibilityOptions& options = {});

/// Labels each whole face with the part nearest to its centroid; ties to the lower part index.
std::vector<int> assign_part_masks(const TriMesh& whole, std::span<const TriMesh> parts);

struct PairOptions {
  VisibilityOptions visibility;
  field::WatertightOptions watertight;
};

/// Normalize, merge, cull, watertight the whole, watertight each part, assign masks.
/// Failures are raised as GeometryError naming the stage.
PartObject make_whole_part_pairs(const std::string& id, std::span<const TriMesh> raw_parts,
                                 const PairOptions& options = {});

/// Bundle directory: whole.ply (with part labels), part_<k>.ply, masks.json. `comments` are
/// written into every mesh header and masks.json.
void save_part_object(const PartObject& object, const std::filesystem::path& dir,
                      std::span<const std::string> comments = {});
PartObject load_part_object(const std::filesystem::path& dir);

}  // namespace holopart::curation
