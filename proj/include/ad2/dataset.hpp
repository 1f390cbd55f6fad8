#pragma once

#include <array>
#include <string>
#include <vector>

#include "ad2/errors.hpp"
#include "ad2/imaging.hpp"

namespace ad2::dataset {

using imaging::Frame;

// class 0 = benign, then the three attack kinds
enum class Label : int { benign = 0, poltergeist = 1, snal = 2, esia = 3 };

inline constexpr int kNumClasses = 4;

inline const char* label_name(Label l) {
    switch (l) {
        case Label::benign: return "benign";
        case Label::poltergeist: return "poltergeist";
        case Label::snal: return "snal";
        case Label::esia: return "esia";
    }
    return "?";
}

inline Label label_from_int(int v) {
    if (v < 0 || v >= kNumClasses) {
        throw ArgumentError("label out of range: " + std::to_string(v));
    }
    return static_cast<Label>(v);
}

// (clean|attack) status of the prev and curr sides of a pair
enum class Combo : int { clean_clean = 0, clean_attack = 1, attack_clean = 2, attack_attack = 3 };

inline const char* combo_name(Combo c) {
    switch (c) {
        case Combo::clean_clean: return "clean_clean";
        case Combo::clean_attack: return "clean_attack";
        case Combo::attack_clean: return "attack_clean";
        case Combo::attack_attack: return "attack_attack";
    }
    return "?";
}

struct Provenance {
    std::string route_id;
    long step_t = 0;
    Combo combo = Combo::clean_clean;
    // attack kind used on either side; empty for clean_clean
    std::string attack_kind;
};

struct LabeledPair {
    std::array<Frame, 3> prev;  // cameras at t-1s, order [left, centre, right]
    std::array<Frame, 3> curr;  // cameras at t
    Label label = Label::benign;
    Provenance provenance;
};

using Dataset = std::vector<LabeledPair>;

inline std::array<int, kNumClasses> class_counts(const Dataset& ds) {
    std::array<int, kNumClasses> counts{};
    for (const auto& p : ds) counts[static_cast<std::size_t>(static_cast<int>(p.label))]++;
    return counts;
}

}  // namespace ad2::dataset
