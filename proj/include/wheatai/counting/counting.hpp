#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wheatai/detection.hpp"
#include "wheatai/infer/backend.hpp"
#include "wheatai/infer/types.hpp"

namespace wheatai::counting {

inline constexpr int kDefaultTileSize = 1024;
inline constexpr int kDefaultTileOverlap = 128;
inline constexpr double kDefaultSpikeletTau = 0.5;

struct SpikeCountResult {
    std::string image_ref;
    std::size_t spike_count = 0;
    std::optional<double> spikes_per_m2;
    DetectionSet detections;
};

struct Tile {
    int x0, y0, x1, y1;
    friend bool operator==(const Tile&, const Tile&) = default;
};

struct TileGrid {
    int tile_size = 0;
    int overlap = 0;
    int columns = 0;
    int rows = 0;
    // Row-major: all tiles of the top row first, left to right.
    std::vector<Tile> tiles;
};

struct SpikeletAssignment {
    // Keyed by spike Detection::index; every spike appears, possibly with 0.
    std::map<std::size_t, std::size_t> per_spike_counts;
    // Spikelet Detection::index values, ascending.
    std::vector<std::size_t> unassigned;
    // Spikelet Detection::index -> spike Detection::index.
    std::map<std::size_t, std::size_t> spike_of;
};

/// Role key for tile-local predictions of the tile with origin (x0, y0).
std::string tile_role(int x0, int y0);

/// detect -> postprocess -> count category "spike". `params.role` defaults
/// to "spike" when empty.
SpikeCountResult count_spikes(const std::string& image_ref, const infer::Backend& backend,
                              const infer::InferenceParams& params,
                              std::optional<double> gsd_mm_per_px = std::nullopt);

/// Throws Error(invalid_tiling) unless tile_size > overlap >= 0 and the image
/// dimensions are positive.
TileGrid plan_tiles(int width, int height, int tile_size, int overlap);

/// Tile predictions (role `spike@x0_y0`) shifted to image coordinates,
/// concatenated in grid order, then one global postprocess. Merged indices
/// are positions in that concatenation.
DetectionSet tile_and_merge(const std::string& image_ref, const TileGrid& grid,
                            const infer::Backend& backend, const infer::InferenceParams& params);

/// Spikes per square metre; absent without a ground sample distance.
std::optional<double> spikes_per_area(std::size_t count, std::optional<double> gsd_mm_per_px,
                                      int width, int height);

/// Assigns each spikelet to the spike covering the largest fraction of its
/// area, when that fraction reaches tau. Ties go to the lower spike index.
SpikeletAssignment associate_spikelets(const DetectionSet& spikes, const DetectionSet& spikelets,
                                       double tau = kDefaultSpikeletTau);

}  // namespace wheatai::counting
