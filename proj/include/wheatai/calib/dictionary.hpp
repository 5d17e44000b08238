#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace wheatai::calib {

/// Square binary marker dictionary. Codes are row-major with the top-left
/// cell in the most significant used bit; a set bit is a white cell.
class MarkerDictionary {
public:
    /// Validates the dictionary (distinct under rotation, minimum rotational
    /// Hamming distance) and throws Error(invalid_dictionary) otherwise.
    MarkerDictionary(std::string name, int bits_per_side, std::vector<std::uint32_t> codes,
                     int required_distance = 4);

    /// Parses the versioned text format: `#` comment lines (`# name <n>`,
    /// `# bits_per_side <k>`) and `<id> <hex code>` records.
    static MarkerDictionary parse(std::istream& in);

    /// The bundled 4x4, 50-id dictionary.
    static const MarkerDictionary& aruco_4x4_50();

    const std::string& name() const noexcept { return name_; }
    int bits_per_side() const noexcept { return bits_; }
    const std::vector<std::uint32_t>& codes() const noexcept { return codes_; }
    std::size_t size() const noexcept { return codes_.size(); }

    /// Smallest Hamming distance between any two ids under any rotation,
    /// including an id against its own non-trivial rotations.
    int min_rotational_distance() const;

    bool bit(std::uint32_t code, int row, int col) const;
    /// Code of the marker as it appears after one clockwise quarter turn.
    std::uint32_t rotate_cw(std::uint32_t code) const;

    struct Match {
        int id;
        int rotation;  // clockwise quarter turns from the dictionary pose
        int distance;
    };
    /// Best match within `max_distance` bit errors over all rotations.
    std::optional<Match> match(std::uint32_t observed, int max_distance) const;

private:
    std::string name_;
    int bits_;
    std::vector<std::uint32_t> codes_;
};

}  // namespace wheatai::calib
