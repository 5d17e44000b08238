// Writes the bundled fixture dataset: images, prediction files and the
// ground truth the predictions were built from. Deterministic per seed.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "../tests/support/marker_render.hpp"
#include "wheatai/calib/dictionary.hpp"
#include "wheatai/counting/counting.hpp"
#include "wheatai/geom/geometry.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using Rng = std::mt19937_64;

namespace {

constexpr double kPi = std::numbers::pi;

struct Box {
    double cx, cy, w, h, a;
};

double uni(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uint_in(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double r2(double v) {
    return std::round(v * 100.0) / 100.0;
}

double r3(double v) {
    return std::round(v * 1000.0) / 1000.0;
}

json det(const Box& b, const std::string& category, double conf) {
    return {{"cx", r2(b.cx)}, {"cy", r2(b.cy)}, {"w", r2(b.w)},          {"h", r2(b.h)},
            {"angle_rad", r3(b.a)}, {"conf", r3(conf)}, {"category", category}};
}

// Inscribed ellipse with a slight radial wobble, as a segmenter would return.
json ellipse_ring(const Box& b, int n, Rng& rng, double wobble = 0.02) {
    json ring = json::array();
    const double c = std::cos(b.a), s = std::sin(b.a);
    const double phase = uni(rng, 0, 2 * kPi);
    const double amp = uni(rng, 0, wobble);
    for (int k = 0; k < n; ++k) {
        const double t = 2 * kPi * k / n;
        const double f = 1.0 - amp * (1 + std::sin(3 * t + phase)) / 2;
        const double u = f * b.w / 2 * std::cos(t), v = f * b.h / 2 * std::sin(t);
        ring.push_back({r2(b.cx + c * u - s * v), r2(b.cy + s * u + c * v)});
    }
    return ring;
}

void draw(cv::Mat& img, const Box& b, const cv::Scalar& color) {
    cv::ellipse(img, cv::RotatedRect({float(b.cx), float(b.cy)}, {float(b.w), float(b.h)}, float(b.a * 180 / kPi)),
                color, cv::FILLED, cv::LINE_AA);
}

cv::Mat canvas(int w, int h, const cv::Scalar& top, const cv::Scalar& bottom) {
    cv::Mat img(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
        const double t = double(y) / std::max(1, h - 1);
        img.row(y).setTo(top * (1 - t) + bottom * t);
    }
    return img;
}

void stamp(cv::Mat& img, const std::string& text) {
    cv::putText(img, text, {8, img.rows - 10}, cv::FONT_HERSHEY_SIMPLEX, 0.5, {255, 255, 255}, 1, cv::LINE_AA);
}

// Boxes whose centres keep `gap` apart, inside a margin.
std::vector<Box> scatter(Rng& rng, int n, int W, int H, double margin, double gap, double wmin, double wmax,
                         double hmin, double hmax, double amin = -kPi / 2, double amax = kPi / 2) {
    std::vector<Box> out;
    for (int tries = 0; int(out.size()) < n && tries < 20000; ++tries) {
        const Box b{uni(rng, margin, W - margin), uni(rng, margin, H - margin), uni(rng, wmin, wmax),
                    uni(rng, hmin, hmax), uni(rng, amin, amax)};
        bool ok = true;
        for (const Box& o : out) ok = ok && std::hypot(o.cx - b.cx, o.cy - b.cy) >= gap;
        if (ok) out.push_back(b);
    }
    return out;
}

// Point at offset (u along the axis, v across) in a box's frame.
Box along(const Box& parent, double u, double v, double w, double h) {
    const double c = std::cos(parent.a), s = std::sin(parent.a);
    return {parent.cx + c * u - s * v, parent.cy + s * u + c * v, w, h, parent.a};
}

struct Writer {
    fs::path root;
    json truth = json::object();

    fs::path dir(const std::string& pipeline, const char* sub) const {
        const fs::path d = root / pipeline / sub;
        fs::create_directories(d);
        return d;
    }

    void image(const std::string& pipeline, const std::string& stem, const cv::Mat& img) const {
        cv::imwrite((dir(pipeline, "images") / (stem + ".png")).string(), img, {cv::IMWRITE_PNG_COMPRESSION, 9});
    }

    void preds(const std::string& pipeline, const std::string& stem, int W, int H, const json& models) const {
        const json doc = {{"image", stem + ".png"}, {"width", W}, {"height", H}, {"models", models}};
        std::ofstream(dir(pipeline, "preds") / (stem + ".pred.json")) << doc.dump(1) << "\n";
    }
};

void spike(Writer& out, Rng& rng) {
    const std::vector<std::pair<std::string, int>> images{{"PLOT-A01_1", 7}, {"PLOT-A01_2", 10}, {"PLOT-B07_1", 12}};
    for (const auto& [stem, n] : images) {
        const int W = 640, H = 480;
        cv::Mat img = canvas(W, H, {40, 110, 50}, {30, 80, 40});
        json dets = json::array();
        const auto spikes = scatter(rng, n, W, H, 30, 70, 55, 85, 16, 24);
        for (const Box& b : spikes) {
            draw(img, b, {60, 170, 200});
            dets.push_back(det(b, "spike", uni(rng, 0.55, 0.98)));
        }
        // Near-duplicates for NMS and sub-threshold false positives.
        for (int k = 0; k < 2; ++k) {
            Box d = spikes[k];
            d.cx += 1.5;
            d.cy += 1.0;
            dets.push_back(det(d, "spike", 0.5));
        }
        for (const Box& b : scatter(rng, 2, W, H, 20, 10, 30, 40, 10, 14)) dets.push_back(det(b, "spike", uni(rng, 0.05, 0.2)));
        stamp(img, stem);
        out.image("spike", stem, img);
        out.preds("spike", stem, W, H, {{"spike", {{"detections", dets}}}});
        out.truth["spike"][stem] = {{"spike_count", n}};
    }
}

void spike_uav(Writer& out, Rng& rng) {
    const int W = 1400, H = 1000, tile = 512, overlap = 64;
    const auto grid = wheatai::counting::plan_tiles(W, H, tile, overlap);
    const std::vector<std::pair<std::string, int>> images{{"UAV-F1_r01", 60}, {"UAV-F1_r02", 75}, {"UAV-F2_r01", 50}};
    for (const auto& [stem, n] : images) {
        cv::Mat img = canvas(W, H, {50, 120, 70}, {40, 100, 60});
        const auto spikes = scatter(rng, n, W, H, 25, 40, 30, 42, 10, 14);
        json models = json::object();
        for (const auto& t : grid.tiles) models[wheatai::counting::tile_role(t.x0, t.y0)] = {{"detections", json::array()}};
        int duplicated = 0;
        for (const Box& b : spikes) {
            draw(img, b, {70, 180, 210});
            const double conf = uni(rng, 0.5, 0.97);
            int seen = 0;
            for (const auto& t : grid.tiles) {
                if (b.cx < t.x0 || b.cx >= t.x1 || b.cy < t.y0 || b.cy >= t.y1) continue;
                // Each tile sees the spike with its own small localisation error.
                Box local{b.cx - t.x0 + uni(rng, -0.4, 0.4), b.cy - t.y0 + uni(rng, -0.4, 0.4), b.w, b.h, b.a};
                models[wheatai::counting::tile_role(t.x0, t.y0)]["detections"].push_back(
                    det(local, "spike", conf - 0.01 * seen));
                ++seen;
            }
            duplicated += seen > 1;
        }
        stamp(img, stem);
        out.image("spike-uav", stem, img);
        out.preds("spike-uav", stem, W, H, models);
        out.truth["spike-uav"][stem] = {{"spike_count", n}, {"spikes_in_overlaps", duplicated}};
    }
}

void spikelet(Writer& out, Rng& rng) {
    const std::vector<std::pair<std::string, std::vector<int>>> images{
        {"LINE-12_a", {9, 12}}, {"LINE-12_b", {10, 8, 13}}, {"LINE-30_a", {14, 11}}};
    for (const auto& [stem, counts] : images) {
        const int W = 600, H = 800;
        cv::Mat img = canvas(W, H, {235, 235, 235}, {215, 215, 215});
        json spikes = json::array(), lets = json::array();
        json truth = json::array();
        for (std::size_t s = 0; s < counts.size(); ++s) {
            const double L = uni(rng, 240, 300);
            const Box spike{W * (s + 1.0) / (counts.size() + 1), H / 2.0 + uni(rng, -30, 30), L, 72,
                            kPi / 2 + uni(rng, -0.2, 0.2)};
            draw(img, spike, {80, 150, 170});
            spikes.push_back(det(spike, "spike", uni(rng, 0.7, 0.97)));
            const int k = counts[s];
            for (int i = 0; i < k; ++i) {
                const double u = -L / 2 + (i + 0.5) * L / k;
                const Box let = along(spike, u, (i % 2 ? 12 : -12), L / k * 1.1, 26);
                draw(img, let, {60, 120, 150});
                lets.push_back(det(let, "spikelet", uni(rng, 0.45, 0.95)));
            }
            truth.push_back(k);
        }
        // Strays outside every spike and one below threshold inside a spike.
        lets.push_back(det({30, 40, 24, 14, 0.3}, "spikelet", 0.8));
        lets.push_back(det({W - 30.0, H - 50.0, 24, 14, -0.2}, "spikelet", 0.7));
        lets.push_back(det({W / (counts.size() + 1.0), H / 2.0, 24, 14, 0.0}, "spikelet", 0.1));
        stamp(img, stem);
        out.image("spikelet", stem, img);
        out.preds("spikelet", stem, W, H, {{"spike", {{"detections", spikes}}}, {"spikelet", {{"detections", lets}}}});
        out.truth["spikelet"][stem] = {{"spikelets_per_spike", truth}, {"unassigned_spikelets", 2}};
    }
}

// Spikelets along a spike, the first `diseased` bleached.
void spikelet_column(const Box& spike, int k, int diseased, Rng& rng, json& dets, cv::Mat* img,
                     double ox = 0, double oy = 0) {
    for (int i = 0; i < k; ++i) {
        const double u = -spike.w / 2 + (i + 0.5) * spike.w / k;
        Box let = along(spike, u, (i % 2 ? 10 : -10), spike.w / k * 1.15, spike.h * 0.45);
        const bool sick = i < diseased;
        if (img) draw(*img, let, sick ? cv::Scalar{150, 200, 225} : cv::Scalar{60, 150, 90});
        let.cx -= ox;
        let.cy -= oy;
        dets.push_back(det(let, sick ? "diseased" : "healthy", uni(rng, 0.5, 0.96)));
    }
}

void fhb_single(Writer& out, Rng& rng) {
    const std::vector<std::tuple<std::string, int, int>> images{{"GH-03_s1", 14, 5}, {"GH-03_s2", 12, 0}, {"GH-05_s1", 16, 11}};
    for (const auto& [stem, k, d] : images) {
        const int W = 400, H = 700;
        cv::Mat img = canvas(W, H, {30, 30, 30}, {45, 45, 45});
        const Box spike{W / 2.0, H / 2.0, 520, 90, kPi / 2 + uni(rng, -0.1, 0.1)};
        json dets = json::array();
        spikelet_column(spike, k, d, rng, dets, &img);
        dets.push_back(det({60, 60, 30, 20, 0}, "healthy", 0.12));
        stamp(img, stem);
        out.image("fhb-single", stem, img);
        out.preds("fhb-single", stem, W, H, {{"fhb_spike_single", {{"detections", dets}}}});
        out.truth["fhb-single"][stem] = {{"total_spikelets", k}, {"diseased_spikelets", d}};
    }
}

void fhb_field(Writer& out, Rng& rng) {
    struct SpikePlan {
        bool keep;
        const char* view;
        int spikelets;
        int diseased;
    };
    const std::vector<std::pair<std::string, std::vector<SpikePlan>>> images{
        {"FIELD-7_p1", {{true, "frontal", 12, 4}, {true, "lateral", 10, 0}, {false, nullptr, 0, 0}, {true, "frontal", 11, 11}, {true, "lateral", 9, 2}}},
        {"FIELD-7_p2", {{true, "lateral", 12, 0}, {true, "frontal", 0, 0}, {true, "frontal", 10, 3}, {true, "lateral", 13, 0}}},
        {"FIELD-9_p1", {{true, "frontal", 12, 0}, {true, "lateral", 11, 0}, {false, nullptr, 0, 0}, {true, "frontal", 10, 0}, {true, "frontal", 9, 0}, {true, "lateral", 12, 0}}}};
    for (const auto& [stem, plan] : images) {
        const int W = 900, H = 700;
        cv::Mat img = canvas(W, H, {50, 120, 60}, {35, 90, 45});
        const auto boxes = scatter(rng, int(plan.size()), W, H, 120, 200, 200, 240, 60, 70, -0.6, 0.6);
        json spikes = json::array(), verdicts = json::object(), crops = json::object();
        json truth = json::array();
        for (std::size_t i = 0; i < plan.size(); ++i) {
            const Box& b = boxes[i];
            draw(img, b, {70, 160, 120});
            spikes.push_back(det(b, "spike", uni(rng, 0.6, 0.97)));
            json v = {{"keep", plan[i].keep}};
            if (plan[i].view) v["view"] = plan[i].view;
            verdicts[std::to_string(i)] = v;
            if (!plan[i].keep) continue;
            const auto crop = wheatai::geom::padded_crop(wheatai::geom::OrientedBox(r2(b.cx), r2(b.cy), r2(b.w), r2(b.h), r3(b.a)),
                                                         0.1, W, H);
            json local = json::array();
            spikelet_column(b, plan[i].spikelets, plan[i].diseased, rng, local, &img, crop.x0, crop.y0);
            crops[std::to_string(i)] = {{"detections", local}};
            truth.push_back({{"spike_index", i}, {"total", plan[i].spikelets}, {"diseased", plan[i].diseased}});
        }
        spikes.push_back(det({40, 40, 60, 20, 0.2}, "spike", 0.1));
        stamp(img, stem);
        out.image("fhb-field", stem, img);
        out.preds("fhb-field", stem, W, H,
                  {{"spike", {{"detections", spikes}}},
                   {"spike_view", {{"verdicts", verdicts}}},
                   {"fhb_spikelet", {{"crops", crops}}}});
        out.truth["fhb-field"][stem] = {{"kept_spikes", truth}};
    }
}

void fdk(Writer& out, Rng& rng) {
    const std::vector<std::tuple<std::string, int, int>> images{{"LOT-19_a", 24, 7}, {"LOT-19_b", 30, 3}, {"LOT-22_a", 20, 12}};
    for (const auto& [stem, n, damaged] : images) {
        const int W = 600, H = 600;
        cv::Mat img = canvas(W, H, {25, 25, 25}, {35, 35, 35});
        json dets = json::array(), masks = json::object();
        const auto kernels = scatter(rng, n, W, H, 25, 42, 28, 36, 16, 20);
        for (int i = 0; i < n; ++i) {
            const bool bad = i < damaged;
            draw(img, kernels[i], bad ? cv::Scalar{190, 200, 215} : cv::Scalar{60, 120, 170});
            dets.push_back(det(kernels[i], bad ? "damaged" : "healthy", uni(rng, 0.4, 0.98)));
            if (i % 3 != 2) masks[std::to_string(i)] = ellipse_ring(kernels[i], 36, rng);
        }
        dets.push_back(det({20, 20, 18, 10, 0.4}, "debris", 0.9));
        dets.push_back(det({W - 20.0, H - 20.0, 30, 18, 0.0}, "damaged", 0.15));
        stamp(img, stem);
        out.image("fdk", stem, img);
        out.preds("fdk", stem, W, H, {{"kernel", {{"detections", dets}, {"masks", masks}}}});
        out.truth["fdk"][stem] = {{"total_kernels", n}, {"damaged_kernels", damaged}};
    }
}

void paste_marker(cv::Mat& img, int id, double cx, double cy, double side, double angle, Rng& rng) {
    const auto& dict = wheatai::calib::MarkerDictionary::aruco_4x4_50();
    const auto m = wheatai::testing::render_marker(dict.codes()[id], dict.bits_per_side(),
                                                   {.side_px = side, .angle = angle}, rng);
    cv::Mat bgr;
    cv::cvtColor(m.image, bgr, cv::COLOR_GRAY2BGR);
    const cv::Rect at(int(cx) - bgr.cols / 2, int(cy) - bgr.rows / 2, bgr.cols, bgr.rows);
    bgr.copyTo(img(at));
}

void kernel_morph(Writer& out, Rng& rng) {
    const double px_per_mm = 12.0, marker_mm = 10.0;
    const std::vector<std::pair<std::string, int>> images{{"SEED-4_t1", 12}, {"SEED-4_t2", 15}, {"SEED-8_t1", 10}};
    int m = 0;
    for (const auto& [stem, n] : images) {
        const int W = 900, H = 700;
        cv::Mat img = canvas(W, H, {170, 160, 150}, {150, 140, 130});
        paste_marker(img, 3 + m, 140, 140, marker_mm * px_per_mm, uni(rng, -0.3, 0.3), rng);
        paste_marker(img, 17 + m, 760, 140, marker_mm * px_per_mm, uni(rng, -0.3, 0.3), rng);
        ++m;
        json dets = json::array(), masks = json::object(), truth = json::array();
        auto kernels = scatter(rng, n, W, H - 300, 50, 110, 60, 84, 30, 40);
        for (int i = 0; i < n; ++i) {
            Box& k = kernels[i];
            k.cy += 300;
            const bool bad = i % 4 == 1;
            draw(img, k, bad ? cv::Scalar{200, 205, 215} : cv::Scalar{50, 110, 160});
            dets.push_back(det(k, bad ? "damaged" : "healthy", uni(rng, 0.5, 0.98)));
            if (i % 5 != 4) masks[std::to_string(i)] = ellipse_ring(k, 72, rng, 0.0);
            truth.push_back({{"length_mm", k.w / px_per_mm}, {"width_mm", k.h / px_per_mm}});
        }
        Box chaff{W / 2.0, 660, 40, 12, 0.1};
        dets.push_back(det(chaff, "chaff", 0.6));
        stamp(img, stem);
        out.image("kernel-morph", stem, img);
        out.preds("kernel-morph", stem, W, H, {{"kernel", {{"detections", dets}, {"masks", masks}}}});
        out.truth["kernel-morph"][stem] = {{"px_per_mm", px_per_mm}, {"kernels", truth}};
    }
}

void stomata(Writer& out, Rng& rng) {
    const std::vector<std::pair<std::string, int>> images{{"LEAF-2_f1", 10}, {"LEAF-2_f2", 13}, {"LEAF-5_f1", 8}};
    for (const auto& [stem, n] : images) {
        const int W = 640, H = 480;
        cv::Mat img = canvas(W, H, {120, 170, 130}, {110, 160, 120});
        json st = json::array(), pores = json::array(), st_masks = json::object(), pore_masks = json::object();
        const auto boxes = scatter(rng, n, W, H, 40, 80, 50, 60, 30, 38, -0.3, 0.3);
        int with_pore = 0;
        for (int i = 0; i < n; ++i) {
            const Box& s = boxes[i];
            draw(img, s, {80, 130, 95});
            st.push_back(det(s, "stoma", uni(rng, 0.5, 0.97)));
            if (i % 2 == 0) st_masks[std::to_string(i)] = ellipse_ring(s, 48, rng);
            if (i == n - 1) continue;  // closed stoma, no visible pore
            const double len = 0.55 * s.w;
            const Box p{s.cx, s.cy, len, len * uni(rng, 0.1, 0.5), s.a};
            draw(img, p, {30, 50, 40});
            pores.push_back(det(p, "pore", uni(rng, 0.4, 0.95)));
            pore_masks[std::to_string(pores.size() - 1)] = ellipse_ring(p, 40, rng, 0.0);
            ++with_pore;
        }
        // A weaker second pore in stoma 0 and one pore in no stoma.
        pores.push_back(det({boxes[0].cx + 2, boxes[0].cy, 12, 4, boxes[0].a}, "pore", 0.3));
        pores.push_back(det({8, 8, 10, 4, 0.0}, "pore", 0.5));
        stamp(img, stem);
        out.image("stomata", stem, img);
        out.preds("stomata", stem, W, H,
                  {{"stoma", {{"detections", st}, {"masks", st_masks}}}, {"pore", {{"detections", pores}, {"masks", pore_masks}}}});
        out.truth["stomata"][stem] = {{"stomata_count", n}, {"with_pore", with_pore}};
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate the bundled fixture dataset"};
    fs::path root;
    std::uint64_t seed = 20240501;
    app.add_option("--out", root, "Output directory")->required();
    app.add_option("--seed", seed, "Random seed");
    CLI11_PARSE(app, argc, argv);

    Writer out{root};
    Rng rng(seed);
    spike(out, rng);
    spike_uav(out, rng);
    spikelet(out, rng);
    fhb_single(out, rng);
    fhb_field(out, rng);
    fdk(out, rng);
    kernel_morph(out, rng);
    stomata(out, rng);

    const json runs = {{"spike", {"--gsd", "0.5"}},
                       {"spike-uav", {"--gsd", "2.0", "--tile", "512", "--overlap", "64"}},
                       {"spikelet", json::array()},
                       {"fhb-single", json::array()},
                       {"fhb-field", json::array()},
                       {"fdk", {"--area-weighted"}},
                       {"kernel-morph", {"--marker-mm", "10"}},
                       {"stomata", {"--px-per-um", "2.5"}}};
    std::ofstream(root / "runs.json") << runs.dump(2) << "\n";
    std::ofstream(root / "truth.json") << out.truth.dump(2) << "\n";
    fmt::print("fixtures written to {}\n", root.string());
    return 0;
}
