// Copyright (C) 2026 The metasel Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "metasel/corpus.hpp"

namespace metasel {

enum class PromptMode { plain_icl, zero_shot_cot, few_shot_cot_passthrough };

std::string_view to_string(PromptMode mode) noexcept;
PromptMode prompt_mode_from_string(std::string_view name);

inline constexpr std::string_view kLabelListPrefix = "Valid intent labels: ";
inline constexpr std::string_view kInstruction =
    "Classify the following utterance into one of the intent categories.";
inline constexpr std::string_view kChainOfThoughtCue = "Let's think step by step.";

/// Renders the classification prompt:
///
///   Valid intent labels: a, b, c
///   Classify the following utterance into one of the intent categories.
///
///   [Demo 1] Utterance: {text} -> Intent: {label}
///   ...
///
///   Utterance: {query} -> Intent:
///
/// Demos are emitted in the given order. zero_shot_cot takes no demos and
/// appends the step-by-step cue on its own line; few_shot_cot_passthrough adds
/// "Reasoning: {rationale} ->" for demos that carry a rationale.
std::string build_prompt(std::string_view query_text, std::span<const Example* const> demos,
                         std::span<const std::string> labels, PromptMode mode);

std::string build_prompt(const Example& query, std::span<const Example> demos,
                         std::span<const std::string> labels, PromptMode mode);

}  // namespace metasel
