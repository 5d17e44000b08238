#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "../support/backend_builder.hpp"
#include "wheatai/counting/counting.hpp"
#include "wheatai/error.hpp"
#include "wheatai/infer/inference.hpp"

using namespace wheatai;
using namespace wheatai::counting;
using wheatai::testing::BackendBuilder;
using wheatai::testing::make_det;

namespace {

std::vector<Detection> grid_of_spikes(int n) {
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
        dets.push_back(make_det(40 + 60 * (i % 6), 40 + 80 * (i / 6), 20, 50, 0.1, "spike", 0.6 + 0.01 * i));
    }
    return dets;
}

// Independent tile count: walk the axis one stride at a time.
int tiles_along(int length, int tile, int overlap) {
    int n = 1;
    for (int x0 = 0; x0 + tile < length; x0 += tile - overlap) ++n;
    return n;
}

}  // namespace

TEST(CountSpikes, CountsPostprocessedSpikes) {
    const auto backend = BackendBuilder().image("p1_a", 400, 400).detections("spike", grid_of_spikes(12)).build();
    const auto r = count_spikes("p1_a", backend, {});
    EXPECT_EQ(r.spike_count, 12u);
    EXPECT_FALSE(r.spikes_per_m2.has_value());
}

TEST(CountSpikes, DuplicatePairCollapses) {
    auto dets = grid_of_spikes(12);
    // A 20 x 50 box shifted along its long axis by 50/9 has IoU 0.8 with the original.
    Detection dup = dets[3];
    const double s = 50.0 / 9.0;
    dup.box = geom::OrientedBox(dup.box.cx() - s * std::sin(0.1), dup.box.cy() + s * std::cos(0.1), 20, 50, 0.1);
    dup.confidence = 0.5;
    EXPECT_NEAR(geom::rotated_iou(dup.box, dets[3].box), 0.8, 1e-9);
    dets.push_back(dup);
    const auto backend = BackendBuilder().image("p1_a", 400, 400).detections("spike", dets).build();
    EXPECT_EQ(count_spikes("p1_a", backend, {.nms_iou = 0.3}).spike_count, 12u);
}

TEST(CountSpikes, ZeroDetections) {
    const auto backend = BackendBuilder().image("p1_a", 400, 400).detections("spike", {}).build();
    const auto r = count_spikes("p1_a", backend, {}, 1.0);
    EXPECT_EQ(r.spike_count, 0u);
    EXPECT_EQ(r.spikes_per_m2, 0.0);
}

TEST(CountSpikes, OnlySpikeCategoryIsCounted) {
    auto dets = grid_of_spikes(4);
    dets[1].category = "awn";
    const auto backend = BackendBuilder().image("x", 400, 400).detections("spike", dets).build();
    EXPECT_EQ(count_spikes("x", backend, {}).spike_count, 3u);
}

TEST(CountSpikes, MissingRolePropagates) {
    const auto backend = BackendBuilder().image("x", 400, 400).detections("kernel", {}).build();
    EXPECT_THROW(count_spikes("x", backend, {}), Error);
}

TEST(PlanTiles, OrthomosaicGrid) {
    const TileGrid g = plan_tiles(4000, 3000, 1024, 128);
    EXPECT_EQ(g.columns, 5);
    EXPECT_EQ(g.rows, 4);
    ASSERT_EQ(g.tiles.size(), 20u);
    EXPECT_EQ(g.columns, tiles_along(4000, 1024, 128));
    EXPECT_EQ(g.rows, tiles_along(3000, 1024, 128));
    EXPECT_EQ(g.tiles[1], (Tile{896, 0, 1920, 1024}));
    EXPECT_EQ(g.tiles[4], (Tile{3584, 0, 4000, 1024}));
    EXPECT_EQ(g.tiles.back(), (Tile{3584, 2688, 4000, 3000}));
}

TEST(PlanTiles, SmallImageIsOneTile) {
    const TileGrid g = plan_tiles(800, 600, 1024, 128);
    ASSERT_EQ(g.tiles.size(), 1u);
    EXPECT_EQ(g.tiles[0], (Tile{0, 0, 800, 600}));
}

TEST(PlanTiles, InvalidOverlap) {
    try {
        plan_tiles(100, 100, 64, 64);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_tiling);
    }
    EXPECT_THROW(plan_tiles(100, 100, 64, -1), Error);
}

TEST(PlanTiles, CoverageAndOverlapProperty) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> dim(1, 3000), tile(16, 1200);
    for (int trial = 0; trial < 300; ++trial) {
        const int w = dim(rng), h = dim(rng), t = tile(rng);
        const int overlap = std::uniform_int_distribution<int>(0, t - 1)(rng);
        const TileGrid g = plan_tiles(w, h, t, overlap);
        ASSERT_EQ(g.tiles.size(), static_cast<std::size_t>(g.columns * g.rows));
        EXPECT_EQ(g.columns, tiles_along(w, t, overlap));
        // Per axis: first tile starts at 0, last ends at the edge, consecutive
        // tiles overlap by exactly `overlap` unless the later one is clamped.
        for (int c = 0; c + 1 < g.columns; ++c) {
            const Tile& a = g.tiles[c];
            const Tile& b = g.tiles[c + 1];
            EXPECT_EQ(a.x1 - b.x0, overlap);
            EXPECT_LE(b.x0, a.x1);
        }
        EXPECT_EQ(g.tiles.front().x0, 0);
        EXPECT_EQ(g.tiles[g.columns - 1].x1, w);
        EXPECT_EQ(g.tiles.back().y1, h);
        for (int r = 0; r + 1 < g.rows; ++r) {
            EXPECT_EQ(g.tiles[r * g.columns].y1 - g.tiles[(r + 1) * g.columns].y0, overlap);
        }
        for (const Tile& tl : g.tiles) {
            EXPECT_GT(tl.x1, tl.x0);
            EXPECT_GT(tl.y1, tl.y0);
            EXPECT_LE(tl.x1 - tl.x0, t);
        }
    }
}

TEST(TileAndMerge, InteriorDetectionKeepsCoordinates) {
    BackendBuilder b;
    b.image("uav", 1800, 1000);
    const TileGrid g = plan_tiles(1800, 1000, 1024, 128);
    ASSERT_EQ(g.tiles.size(), 2u);
    b.detections(tile_role(0, 0), {make_det(100, 200, 20, 40, 0.2, "spike", 0.9)});
    b.detections(tile_role(896, 0), {make_det(500, 300, 20, 40, 0.2, "spike", 0.9)});
    const auto merged = tile_and_merge("uav", g, b.build(), {});
    ASSERT_EQ(merged.size(), 2u);
    EXPECT_DOUBLE_EQ(merged.detections[0].box.cx(), 100);
    EXPECT_DOUBLE_EQ(merged.detections[1].box.cx(), 1396);
    EXPECT_DOUBLE_EQ(merged.detections[1].box.cy(), 300);
    EXPECT_EQ(merged.image_width, 1800);
}

TEST(TileAndMerge, CrossTileDuplicateMerges) {
    BackendBuilder b;
    b.image("uav", 1800, 1000);
    const TileGrid g = plan_tiles(1800, 1000, 1024, 128);
    // Global spike at x = 960 seen by both tiles, slightly displaced in the second.
    b.detections(tile_role(0, 0), {make_det(960, 400, 20, 60, 0, "spike", 0.8)});
    b.detections(tile_role(896, 0), {make_det(64.5, 400.5, 20, 60, 0, "spike", 0.85)});
    const auto backend = b.build();
    const auto merged = tile_and_merge("uav", g, backend, {});
    ASSERT_EQ(merged.size(), 1u);
    EXPECT_DOUBLE_EQ(merged.detections[0].confidence, 0.85);
}

TEST(TileAndMerge, SingleTileEqualsUntiled) {
    auto dets = grid_of_spikes(10);
    BackendBuilder b;
    b.image("x", 500, 500).detections("spike", dets).detections(tile_role(0, 0), dets);
    const auto backend = b.build();
    const auto tiled = tile_and_merge("x", plan_tiles(500, 500, 1024, 128), backend, {});
    const auto plain = count_spikes("x", backend, {}).detections;
    ASSERT_EQ(tiled.size(), plain.size());
    for (std::size_t i = 0; i < tiled.size(); ++i) {
        EXPECT_EQ(tiled.detections[i].box, plain.detections[i].box);
        EXPECT_EQ(tiled.detections[i].index, plain.detections[i].index);
        EXPECT_EQ(tiled.detections[i].confidence, plain.detections[i].confidence);
    }
}

TEST(TileAndMerge, MissingTileThrows) {
    BackendBuilder b;
    b.image("uav", 1800, 1000).detections(tile_role(0, 0), {});
    try {
        tile_and_merge("uav", plan_tiles(1800, 1000, 1024, 128), b.build(), {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::missing_prediction);
    }
}

TEST(SpikesPerArea, Examples) {
    EXPECT_DOUBLE_EQ(*spikes_per_area(120, 1.0, 4000, 3000), 10.0);
    EXPECT_FALSE(spikes_per_area(120, std::nullopt, 4000, 3000));
    EXPECT_EQ(*spikes_per_area(0, 2.0, 4000, 3000), 0.0);
    EXPECT_THROW(spikes_per_area(1, 0.0, 10, 10), Error);
}

TEST(AssociateSpikelets, Examples) {
    DetectionSet spikes{"x", 400, 400,
                        {make_det(100, 100, 40, 100, 0, "spike", 0.9), make_det(140, 100, 40, 100, 0, "spike", 0.9)}};
    spikes.detections[1].index = 1;
    DetectionSet lets{"x", 400, 400,
                      {make_det(100, 100, 10, 10, 0, "spikelet", 0.9),  // inside spike 0
                       make_det(123, 60, 10, 10, 0, "spikelet", 0.9),   // 0.2 / 0.8 split
                       make_det(300, 300, 10, 10, 0, "spikelet", 0.9),  // outside
                       make_det(120, 140, 10, 10, 0, "spikelet", 0.9)}};  // 0.5 / 0.5 tie
    for (std::size_t i = 0; i < lets.size(); ++i) lets.detections[i].index = i;
    const auto a = associate_spikelets(spikes, lets);
    EXPECT_EQ(a.spike_of.at(0), 0u);
    EXPECT_EQ(a.spike_of.at(1), 1u);
    EXPECT_EQ(a.spike_of.at(3), 0u);
    EXPECT_EQ(a.unassigned, (std::vector<std::size_t>{2}));
    EXPECT_EQ(a.per_spike_counts.at(0), 2u);
    EXPECT_EQ(a.per_spike_counts.at(1), 1u);
}

TEST(AssociateSpikelets, BelowTauIsUnassigned) {
    DetectionSet spikes{"x", 400, 400, {make_det(100, 100, 40, 100, 0, "spike", 0.9)}};
    // Only 2 of 10 px of width overlap: ratio 0.2.
    DetectionSet lets{"x", 400, 400, {make_det(123, 100, 10, 10, 0, "spikelet", 0.9)}};
    const auto a = associate_spikelets(spikes, lets);
    EXPECT_EQ(a.unassigned.size(), 1u);
    EXPECT_EQ(a.per_spike_counts.at(0), 0u);
}

TEST(AssociateSpikelets, ConservationProperty) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(0, 300), big(20, 120), small(3, 15), ang(-3, 3);
    for (int trial = 0; trial < 200; ++trial) {
        DetectionSet spikes{"x", 300, 300, {}}, lets{"x", 300, 300, {}};
        const int ns = trial % 7, nl = trial % 23;
        for (int i = 0; i < ns; ++i) {
            spikes.detections.push_back(make_det(pos(rng), pos(rng), big(rng), big(rng), ang(rng), "spike", 0.9));
            spikes.detections.back().index = i;
        }
        for (int i = 0; i < nl; ++i) {
            lets.detections.push_back(make_det(pos(rng), pos(rng), small(rng), small(rng), ang(rng), "s", 0.9));
            lets.detections.back().index = i;
        }
        const auto a = associate_spikelets(spikes, lets);
        std::size_t total = a.unassigned.size();
        for (const auto& [spike, n] : a.per_spike_counts) total += n;
        EXPECT_EQ(total, static_cast<std::size_t>(nl));
        EXPECT_EQ(a.spike_of.size() + a.unassigned.size(), static_cast<std::size_t>(nl));
    }
}
