#include "wheatai/calib/dictionary.hpp"

#include <bit>
#include <limits>
#include <sstream>

#include <fmt/format.h>

#include "wheatai/error.hpp"

namespace wheatai::calib {

// Generated from data/dictionaries/aruco_4x4_50.txt at configure time.
extern const char* const kBundledAruco4x4_50;

namespace {

int hamming(std::uint32_t a, std::uint32_t b) {
    return std::popcount(a ^ b);
}

}  // namespace

MarkerDictionary::MarkerDictionary(std::string name, int bits_per_side,
                                   std::vector<std::uint32_t> codes, int required_distance)
    : name_(std::move(name)), bits_(bits_per_side), codes_(std::move(codes)) {
    if (bits_ < 2 || bits_ > 5) {
        throw Error(ErrorCode::invalid_dictionary,
                    fmt::format("dictionary '{}': unsupported bits_per_side {}", name_, bits_));
    }
    const std::uint32_t limit = 1u << (bits_ * bits_);
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        if (codes_[i] >= limit) {
            throw Error(ErrorCode::invalid_dictionary,
                        fmt::format("dictionary '{}': code for id {} exceeds {} bits", name_, i,
                                    bits_ * bits_));
        }
    }
    if (codes_.empty()) {
        throw Error(ErrorCode::invalid_dictionary, fmt::format("dictionary '{}' is empty", name_));
    }
    const int d = min_rotational_distance();
    if (d < required_distance) {
        throw Error(ErrorCode::invalid_dictionary,
                    fmt::format("dictionary '{}': minimum rotational Hamming distance {} < {}",
                                name_, d, required_distance));
    }
}

MarkerDictionary MarkerDictionary::parse(std::istream& in) {
    std::string name = "unnamed";
    int bits = 4;
    std::vector<std::uint32_t> codes;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        if (line[0] == '#') {
            std::string hash, key;
            ls >> hash >> key;
            if (key == "name") ls >> name;
            if (key == "bits_per_side") ls >> bits;
            continue;
        }
        std::size_t id = 0;
        std::string hex;
        if (!(ls >> id >> hex)) {
            throw Error(ErrorCode::invalid_dictionary,
                        fmt::format("dictionary line {}: expected '<id> <code>'", line_no));
        }
        if (id != codes.size()) {
            throw Error(ErrorCode::invalid_dictionary,
                        fmt::format("dictionary line {}: id {} out of sequence", line_no, id));
        }
        codes.push_back(static_cast<std::uint32_t>(std::stoul(hex, nullptr, 0)));
    }
    return MarkerDictionary(name, bits, std::move(codes));
}

const MarkerDictionary& MarkerDictionary::aruco_4x4_50() {
    static const MarkerDictionary dict = [] {
        std::istringstream in(kBundledAruco4x4_50);
        return parse(in);
    }();
    return dict;
}

bool MarkerDictionary::bit(std::uint32_t code, int row, int col) const {
    const int shift = bits_ * bits_ - 1 - (row * bits_ + col);
    return ((code >> shift) & 1u) != 0;
}

std::uint32_t MarkerDictionary::rotate_cw(std::uint32_t code) const {
    std::uint32_t out = 0;
    for (int r = 0; r < bits_; ++r) {
        for (int c = 0; c < bits_; ++c) {
            // Cell (r, c) of the rotated marker came from (n-1-c, r).
            if (bit(code, bits_ - 1 - c, r)) {
                out |= 1u << (bits_ * bits_ - 1 - (r * bits_ + c));
            }
        }
    }
    return out;
}

int MarkerDictionary::min_rotational_distance() const {
    int best = std::numeric_limits<int>::max();
    for (std::size_t i = 0; i < codes_.size(); ++i) {
        std::uint32_t rot = codes_[i];
        for (int k = 1; k < 4; ++k) {
            rot = rotate_cw(rot);
            best = std::min(best, hamming(codes_[i], rot));
        }
        for (std::size_t j = i + 1; j < codes_.size(); ++j) {
            std::uint32_t other = codes_[j];
            for (int k = 0; k < 4; ++k) {
                best = std::min(best, hamming(codes_[i], other));
                other = rotate_cw(other);
            }
        }
    }
    return best;
}

std::optional<MarkerDictionary::Match> MarkerDictionary::match(std::uint32_t observed,
                                                               int max_distance) const {
    std::optional<Match> best;
    for (std::size_t id = 0; id < codes_.size(); ++id) {
        std::uint32_t rotated = codes_[id];
        for (int k = 0; k < 4; ++k) {
            const int d = hamming(observed, rotated);
            if (d <= max_distance && (!best || d < best->distance)) {
                best = Match{static_cast<int>(id), k, d};
            }
            rotated = rotate_cw(rotated);
        }
    }
    return best;
}

}  // namespace wheatai::calib
