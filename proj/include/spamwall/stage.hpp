#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace spamwall {

/// Filter layers in execution order: connection stages first, content last.
enum class Stage { Dnsbl, Rdns, Greylist, Spf, Surbl, Content, Policy, Bayes };

inline constexpr std::array<Stage, 8> kStageOrder = {
    Stage::Dnsbl,  Stage::Rdns,    Stage::Greylist, Stage::Spf,
    Stage::Surbl,  Stage::Content, Stage::Policy,   Stage::Bayes,
};

constexpr const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Dnsbl: return "dnsbl";
        case Stage::Rdns: return "rdns";
        case Stage::Greylist: return "greylist";
        case Stage::Spf: return "spf";
        case Stage::Surbl: return "surbl";
        case Stage::Content: return "content";
        case Stage::Policy: return "policy";
        case Stage::Bayes: return "bayes";
    }
    return "?";
}

std::optional<Stage> stage_from_name(std::string_view name);

}  // namespace spamwall
