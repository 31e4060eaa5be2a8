#pragma once

#include <algorithm>
#include <array>
#include <cstdlib>
#include <string>
#include <vector>

#include "nrpose/error.hpp"
#include "nrpose/mathcore.hpp"

namespace nrpose {

/// One of the seven discrete head yaw angles, in degrees.
class PoseLabel {
public:
    static constexpr std::array<int, 7> kAngles{-90, -60, -30, 0, 30, 60, 90};

    constexpr PoseLabel() = default;

    static PoseLabel from_degrees(int yaw) {
        if (std::find(kAngles.begin(), kAngles.end(), yaw) == kAngles.end())
            throw ConfigError("invalid pose yaw " + std::to_string(yaw) +
                              " (expected one of -90,-60,-30,0,30,60,90)");
        return PoseLabel(yaw);
    }

    static PoseLabel parse(const std::string& text) {
        std::size_t used = 0;
        int yaw = 0;
        try {
            yaw = std::stoi(text, &used);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse pose label '" + text + "'");
        }
        if (used != text.size())
            throw ConfigError("cannot parse pose label '" + text + "'");
        return from_degrees(yaw);
    }

    static std::vector<PoseLabel> all() {
        std::vector<PoseLabel> out;
        for (int a : kAngles)
            out.push_back(PoseLabel(a));
        return out;
    }

    constexpr int degrees() const noexcept { return yaw_; }
    constexpr std::size_t index() const noexcept { return static_cast<std::size_t>((yaw_ + 90) / 30); }

    /// Rank used to break exact residual ties: smaller |yaw| first, then
    /// negative before positive.
    constexpr int tie_rank() const noexcept { return 2 * (yaw_ < 0 ? -yaw_ : yaw_) + (yaw_ > 0 ? 1 : 0); }

    std::string to_string() const { return std::to_string(yaw_); }

    friend constexpr auto operator<=>(PoseLabel, PoseLabel) = default;

private:
    constexpr explicit PoseLabel(int yaw) : yaw_(yaw) {}
    int yaw_ = 0;
};

/// Class-labelled list of atoms A_1..A_l sharing one shape.
struct TrainingDictionary {
    std::vector<ImageMatrix> atoms;
    std::vector<PoseLabel> labels;
    int per_class_count = 0;

    std::size_t size() const noexcept { return atoms.size(); }
    bool empty() const noexcept { return atoms.empty(); }
    Index rows() const { return atoms.empty() ? 0 : atoms.front().rows(); }
    Index cols() const { return atoms.empty() ? 0 : atoms.front().cols(); }

    /// Distinct labels, ascending yaw.
    std::vector<PoseLabel> classes() const {
        std::vector<PoseLabel> out = labels;
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    bool contains(PoseLabel c) const { return std::find(labels.begin(), labels.end(), c) != labels.end(); }

    void validate() const {
        if (atoms.empty())
            throw ShapeError("training dictionary is empty");
        if (atoms.size() != labels.size())
            throw ShapeError("dictionary has " + std::to_string(atoms.size()) + " atoms but " +
                             std::to_string(labels.size()) + " labels");
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            if (atoms[j].rows() != rows() || atoms[j].cols() != cols())
                throw ShapeError("atom " + std::to_string(j) + " is " + std::to_string(atoms[j].rows()) + "x" +
                                 std::to_string(atoms[j].cols()) + ", expected " + std::to_string(rows()) + "x" +
                                 std::to_string(cols()));
            check_image(atoms[j], "atom " + std::to_string(j));
        }
    }
};

} // namespace nrpose
