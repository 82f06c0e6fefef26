// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#include "metasel/prompt.hpp"

#include <stdexcept>

namespace metasel {

std::string_view to_string(PromptMode mode) noexcept {
    switch (mode) {
    case PromptMode::plain_icl: return "plain_icl";
    case PromptMode::zero_shot_cot: return "zero_shot_cot";
    case PromptMode::few_shot_cot_passthrough: return "few_shot_cot_passthrough";
    }
    return "plain_icl";
}

PromptMode prompt_mode_from_string(std::string_view name) {
    if (name == "plain_icl") return PromptMode::plain_icl;
    if (name == "zero_shot_cot") return PromptMode::zero_shot_cot;
    if (name == "few_shot_cot_passthrough") return PromptMode::few_shot_cot_passthrough;
    throw std::invalid_argument("unknown prompt mode '" + std::string(name) + "'");
}

std::string build_prompt(std::string_view query_text, std::span<const Example* const> demos,
                         std::span<const std::string> labels, PromptMode mode) {
    if (mode == PromptMode::zero_shot_cot && !demos.empty()) {
        throw std::invalid_argument("build_prompt: zero_shot_cot takes no demonstrations");
    }
    if (mode != PromptMode::zero_shot_cot && demos.empty()) {
        throw std::invalid_argument("build_prompt: at least one demonstration is required");
    }

    std::string out;
    out.append(kLabelListPrefix);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (i) out.append(", ");
        out.append(labels[i]);
    }
    out.push_back('\n');
    out.append(kInstruction);
    out.append("\n\n");

    for (std::size_t i = 0; i < demos.size(); ++i) {
        const Example& d = *demos[i];
        out.append("[Demo ").append(std::to_string(i + 1)).append("] Utterance: ").append(d.text);
        if (mode == PromptMode::few_shot_cot_passthrough && d.rationale) {
            out.append(" -> Reasoning: ").append(*d.rationale);
        }
        out.append(" -> Intent: ").append(d.label).push_back('\n');
    }
    if (!demos.empty()) out.push_back('\n');

    out.append("Utterance: ").append(query_text).append(" -> Intent:");
    if (mode == PromptMode::zero_shot_cot) out.append("\n").append(kChainOfThoughtCue);
    return out;
}

std::string build_prompt(const Example& query, std::span<const Example> demos,
                         std::span<const std::string> labels, PromptMode mode) {
    std::vector<const Example*> ptrs;
    ptrs.reserve(demos.size());
    for (const auto& d : demos) ptrs.push_back(&d);
    return build_prompt(query.text, ptrs, labels, mode);
}

}  // namespace metasel
