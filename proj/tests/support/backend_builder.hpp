#pragma once

// In-memory fixture backends for tests.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "wheatai/infer/backend.hpp"

namespace wheatai::testing {

inline Detection make_det(double cx, double cy, double w, double h, double theta,
                          std::string category, double conf) {
    return Detection{geom::OrientedBox(cx, cy, w, h, theta), std::move(category), conf, 0, false};
}

class BackendBuilder {
public:
    BackendBuilder& image(const std::string& stem, int width, int height) {
        auto& img = images_[stem];
        img.image = stem + ".png";
        img.width = width;
        img.height = height;
        current_ = stem;
        return *this;
    }

    infer::FixtureBackend::RoleData& role(const std::string& name) {
        return images_.at(current_).models[name];
    }

    BackendBuilder& detections(const std::string& name, std::vector<Detection> dets) {
        for (std::size_t i = 0; i < dets.size(); ++i) dets[i].index = i;
        role(name).detections = std::move(dets);
        return *this;
    }

    BackendBuilder& crop(const std::string& name, std::size_t parent, std::vector<Detection> dets) {
        for (std::size_t i = 0; i < dets.size(); ++i) dets[i].index = i;
        role(name).crops[parent] = std::move(dets);
        return *this;
    }

    BackendBuilder& mask(const std::string& name, std::size_t index, std::vector<geom::Point2> ring) {
        role(name).masks[index] = std::move(ring);
        return *this;
    }

    BackendBuilder& verdict(const std::string& name, std::size_t index, bool keep,
                            std::optional<infer::View> view = std::nullopt) {
        role(name).verdicts[index] = infer::Verdict{index, keep, view};
        return *this;
    }

    infer::FixtureBackend build() const { return infer::FixtureBackend(images_); }

private:
    std::map<std::string, infer::FixtureBackend::ImageData> images_;
    std::string current_;
};

}  // namespace wheatai::testing
