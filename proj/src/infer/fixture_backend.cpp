#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "wheatai/error.hpp"
#include "wheatai/infer/backend.hpp"

namespace wheatai::infer {

using nlohmann::json;

namespace {

constexpr std::string_view kSuffix = ".pred.json";

[[noreturn]] void violation(const std::string& where, const std::string& what) {
    throw Error(ErrorCode::schema_violation, fmt::format("{}: {}", where, what));
}

double number(const json& obj, const char* key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        violation(where, fmt::format("missing or non-numeric '{}'", key));
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) {
        violation(where, fmt::format("'{}' is not finite", key));
    }
    return v;
}

std::size_t index_key(const std::string& key, const std::string& where) {
    if (key.empty() || !std::all_of(key.begin(), key.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        violation(where, fmt::format("key '{}' is not a detection index", key));
    }
    return static_cast<std::size_t>(std::stoull(key));
}

std::vector<Detection> parse_detections(const json& arr, const std::string& where) {
    if (!arr.is_array()) violation(where, "'detections' must be an array");
    std::vector<Detection> out;
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string rec = fmt::format("{}[{}]", where, i);
        const json& d = arr[i];
        if (!d.is_object()) violation(rec, "detection must be an object");
        const double cx = number(d, "cx", rec), cy = number(d, "cy", rec);
        const double w = number(d, "w", rec), h = number(d, "h", rec);
        const double angle = number(d, "angle_rad", rec);
        const double conf = number(d, "conf", rec);
        if (!(w > 0) || !(h > 0)) {
            violation(rec, fmt::format("box size must be positive, got {} x {}", w, h));
        }
        if (conf < 0.0 || conf > 1.0) {
            violation(rec, fmt::format("conf {} outside [0, 1]", conf));
        }
        const auto cat = d.find("category");
        if (cat == d.end() || !cat->is_string() || cat->get<std::string>().empty()) {
            violation(rec, "missing or empty 'category'");
        }
        out.push_back(Detection{geom::OrientedBox(cx, cy, w, h, angle), cat->get<std::string>(),
                                conf, i, false});
    }
    return out;
}

FixtureBackend::RoleData parse_role(const json& role, const std::string& where) {
    if (!role.is_object()) violation(where, "role entry must be an object");
    FixtureBackend::RoleData data;
    if (const auto it = role.find("detections"); it != role.end()) {
        data.detections = parse_detections(*it, where + ".detections");
    }
    if (const auto it = role.find("masks"); it != role.end()) {
        if (!it->is_object()) violation(where + ".masks", "must be an object");
        for (const auto& [key, ring] : it->items()) {
            const std::string rec = fmt::format("{}.masks[{}]", where, key);
            const std::size_t idx = index_key(key, rec);
            if (!ring.is_array() || ring.size() < 3) violation(rec, "mask needs at least 3 points");
            std::vector<geom::Point2> pts;
            for (const json& p : ring) {
                if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                    violation(rec, "mask points must be [x, y] pairs");
                }
                pts.push_back({p[0].get<double>(), p[1].get<double>()});
            }
            data.masks.emplace(idx, std::move(pts));
        }
    }
    if (const auto it = role.find("verdicts"); it != role.end()) {
        if (!it->is_object()) violation(where + ".verdicts", "must be an object");
        for (const auto& [key, v] : it->items()) {
            const std::string rec = fmt::format("{}.verdicts[{}]", where, key);
            Verdict verdict;
            verdict.detection_index = index_key(key, rec);
            const auto keep = v.find("keep");
            if (!v.is_object() || keep == v.end() || !keep->is_boolean()) {
                violation(rec, "verdict needs boolean 'keep'");
            }
            verdict.keep = keep->get<bool>();
            if (const auto view = v.find("view"); view != v.end() && !view->is_null()) {
                const std::string name = view->is_string() ? view->get<std::string>() : "";
                if (name == "frontal") {
                    verdict.view = View::frontal;
                } else if (name == "lateral") {
                    verdict.view = View::lateral;
                } else {
                    violation(rec, "view must be 'frontal' or 'lateral'");
                }
            }
            data.verdicts.emplace(verdict.detection_index, verdict);
        }
    }
    if (const auto it = role.find("crops"); it != role.end()) {
        if (!it->is_object()) violation(where + ".crops", "must be an object");
        for (const auto& [key, crop] : it->items()) {
            const std::string rec = fmt::format("{}.crops[{}]", where, key);
            const std::size_t idx = index_key(key, rec);
            if (!crop.is_object() || !crop.contains("detections")) {
                violation(rec, "crop needs 'detections'");
            }
            data.crops.emplace(idx, parse_detections(crop.at("detections"), rec + ".detections"));
        }
    }
    return data;
}

void flag_out_of_frame(std::vector<Detection>& dets, int width, int height) {
    for (Detection& d : dets) {
        d.out_of_frame = d.box.cx() < 0 || d.box.cy() < 0 || d.box.cx() > width ||
                         d.box.cy() > height;
    }
}

}  // namespace

FixtureBackend::FixtureBackend(std::map<std::string, ImageData> images)
    : images_(std::move(images)) {}

FixtureBackend::ImageData FixtureBackend::parse(const std::string& json_text,
                                                const std::string& source) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        violation(source, fmt::format("invalid JSON ({})", e.what()));
    }
    if (!doc.is_object()) violation(source, "document must be an object");
    ImageData data;
    const auto image = doc.find("image");
    if (image == doc.end() || !image->is_string()) violation(source, "missing string 'image'");
    data.image = image->get<std::string>();
    for (const char* key : {"width", "height"}) {
        const auto it = doc.find(key);
        if (it == doc.end() || !it->is_number_integer() || it->get<long long>() <= 0) {
            violation(source, fmt::format("'{}' must be a positive integer", key));
        }
    }
    data.width = doc.at("width").get<int>();
    data.height = doc.at("height").get<int>();
    const auto models = doc.find("models");
    if (models == doc.end() || !models->is_object()) violation(source, "missing object 'models'");
    for (const auto& [role, entry] : models->items()) {
        RoleData rd = parse_role(entry, fmt::format("{}: models.{}", source, role));
        flag_out_of_frame(rd.detections, data.width, data.height);
        for (auto& [parent, dets] : rd.crops) {
            for (Detection& d : dets) d.out_of_frame = false;
        }
        data.models.emplace(role, std::move(rd));
    }
    return data;
}

std::vector<std::string> FixtureBackend::images() const {
    std::vector<std::string> out;
    out.reserve(images_.size());
    for (const auto& [stem, data] : images_) out.push_back(stem);
    return out;
}

const FixtureBackend::ImageData* FixtureBackend::find(const std::string& image_ref) const {
    const auto it = images_.find(image_ref);
    return it == images_.end() ? nullptr : &it->second;
}

DetectionSet FixtureBackend::detect(const std::string& image_ref, const std::string& role) const {
    const ImageData* img = find(image_ref);
    if (img == nullptr) {
        throw Error(ErrorCode::missing_prediction,
                    fmt::format("no predictions for image '{}'", image_ref));
    }
    const auto it = img->models.find(role);
    if (it == img->models.end()) {
        throw Error(ErrorCode::missing_prediction,
                    fmt::format("no '{}' predictions for image '{}'", role, image_ref));
    }
    return DetectionSet{image_ref, img->width, img->height, it->second.detections};
}

std::optional<std::vector<geom::Point2>> FixtureBackend::mask(const std::string& image_ref,
                                                              const std::string& role,
                                                              std::size_t detection_index) const {
    const ImageData* img = find(image_ref);
    if (img == nullptr) return std::nullopt;
    const auto it = img->models.find(role);
    if (it == img->models.end()) return std::nullopt;
    const auto m = it->second.masks.find(detection_index);
    if (m == it->second.masks.end()) return std::nullopt;
    return m->second;
}

std::optional<Verdict> FixtureBackend::verdict(const std::string& image_ref,
                                               const std::string& role,
                                               std::size_t detection_index) const {
    const ImageData* img = find(image_ref);
    if (img == nullptr) return std::nullopt;
    const auto it = img->models.find(role);
    if (it == img->models.end()) return std::nullopt;
    const auto v = it->second.verdicts.find(detection_index);
    if (v == it->second.verdicts.end()) return std::nullopt;
    return v->second;
}

DetectionSet FixtureBackend::crop_detections(const std::string& image_ref, const std::string& role,
                                             std::size_t parent_index) const {
    const ImageData* img = find(image_ref);
    const RoleData* rd = nullptr;
    if (img != nullptr) {
        const auto it = img->models.find(role);
        if (it != img->models.end()) rd = &it->second;
    }
    const auto crop = rd ? rd->crops.find(parent_index) : decltype(rd->crops.find(0)){};
    if (rd == nullptr || crop == rd->crops.end()) {
        throw Error(ErrorCode::missing_prediction,
                    fmt::format("no '{}' crop predictions for detection {} of image '{}'", role,
                                parent_index, image_ref));
    }
    return DetectionSet{image_ref, 0, 0, crop->second};
}

std::shared_ptr<const FixtureBackend> open_fixture_backend(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) {
        throw Error(ErrorCode::not_a_directory,
                    fmt::format("fixture backend root '{}' is not a directory", root.string()));
    }
    std::map<std::string, FixtureBackend::ImageData> images;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.size() <= kSuffix.size() || !name.ends_with(kSuffix)) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream text;
        text << in.rdbuf();
        images.emplace(name.substr(0, name.size() - kSuffix.size()),
                       FixtureBackend::parse(text.str(), name));
    }
    return std::make_shared<const FixtureBackend>(std::move(images));
}

}  // namespace wheatai::infer
