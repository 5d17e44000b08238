#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "wheatai/detection.hpp"
#include "wheatai/infer/types.hpp"

namespace wheatai::infer {

/// Inference provider. Implementations are immutable once constructed and
/// safe for concurrent use.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::vector<std::string> images() const = 0;

    /// Raw detections for (image, role) in provider order.
    /// Throws Error(missing_prediction) when the provider has none.
    virtual DetectionSet detect(const std::string& image_ref, const std::string& role) const = 0;

    /// Segmentation ring for a detection of `role`, if the provider has one.
    virtual std::optional<std::vector<geom::Point2>> mask(const std::string& image_ref,
                                                          const std::string& role,
                                                          std::size_t detection_index) const = 0;

    virtual std::optional<Verdict> verdict(const std::string& image_ref, const std::string& role,
                                           std::size_t detection_index) const = 0;

    /// Stage-two detections inside the crop of parent detection
    /// `parent_index`, in crop-local coordinates. Image dimensions are left
    /// at zero; the caller knows the crop geometry.
    /// Throws Error(missing_prediction) when absent.
    virtual DetectionSet crop_detections(const std::string& image_ref, const std::string& role,
                                         std::size_t parent_index) const = 0;
};

/// Serves predictions from `<image_stem>.pred.json` files in one directory.
class FixtureBackend final : public Backend {
public:
    struct RoleData {
        std::vector<Detection> detections;
        std::map<std::size_t, std::vector<geom::Point2>> masks;
        std::map<std::size_t, Verdict> verdicts;
        std::map<std::size_t, std::vector<Detection>> crops;
    };
    struct ImageData {
        std::string image;
        int width = 0;
        int height = 0;
        std::map<std::string, RoleData> models;
    };

    explicit FixtureBackend(std::map<std::string, ImageData> images);

    /// Parses one fixture document. `source` names the file in diagnostics.
    /// Throws Error(schema_violation) naming the offending record.
    static ImageData parse(const std::string& json_text, const std::string& source);

    std::vector<std::string> images() const override;
    DetectionSet detect(const std::string& image_ref, const std::string& role) const override;
    std::optional<std::vector<geom::Point2>> mask(const std::string& image_ref,
                                                  const std::string& role,
                                                  std::size_t detection_index) const override;
    std::optional<Verdict> verdict(const std::string& image_ref, const std::string& role,
                                   std::size_t detection_index) const override;
    DetectionSet crop_detections(const std::string& image_ref, const std::string& role,
                                 std::size_t parent_index) const override;

    const ImageData* find(const std::string& image_ref) const;

private:
    std::map<std::string, ImageData> images_;
};

/// Loads every `*.pred.json` under `root` (non-recursive).
/// Throws Error(not_a_directory) or Error(schema_violation).
std::shared_ptr<const FixtureBackend> open_fixture_backend(const std::filesystem::path& root);

}  // namespace wheatai::infer
