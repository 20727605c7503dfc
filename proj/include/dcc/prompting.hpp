#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dcc/task.hpp"

namespace dcc {

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};
using MessageList = std::vector<ChatMessage>;

enum class PromptMode { Base, Icl, DccIcl, DccInstructionOnly };
enum class ThinkPolicy { Default, SuppressThinking };

const char* prompt_mode_name(PromptMode mode);
bool is_dcc_mode(PromptMode mode);

// A worked three-step example shown in-context. answer0 and answer0_again
// must match after normalization: exemplars themselves satisfy the
// consistency criterion. The inverse intervention textually undoes the
// forward one; that pairing is guaranteed where the exemplar was produced
// (the mutation engine), not re-checked semantically here.
struct DccExemplar {
    std::string question;
    std::string answer0;
    std::string intervention_fwd;
    std::string answer1;
    std::string intervention_inv;
    std::string answer0_again;
    std::string reasoning0;  // optional; empty renders as an empty block
    std::string reasoning1;
    std::string reasoning2;
};

nlohmann::json exemplar_to_json(const DccExemplar& e);
DccExemplar exemplar_from_json(const nlohmann::json& j);
std::vector<DccExemplar> load_exemplars_jsonl(const std::string& path);
void save_exemplars_jsonl(const std::string& path, const std::vector<DccExemplar>& exemplars);

// Default wordings. They are configuration, not constants of the method;
// resolved values are hashed into the run manifest.
extern const std::string_view kDefaultSystemPreamble;
extern const std::string_view kDccStepInstructions;
extern const std::string_view kDefaultThinkSuppressionToken;  // "/nothink"

struct PromptSpec {
    PromptMode mode = PromptMode::Base;
    std::vector<DccExemplar> icl_exemplars;
    ThinkPolicy think_policy = ThinkPolicy::Default;
    std::string system_preamble = std::string(kDefaultSystemPreamble);
    int icl_required = 2;  // exemplar count Icl mode must carry (configurable)
    std::string think_suppression_token = std::string(kDefaultThinkSuppressionToken);
};

// Mode/exemplar invariants: DccIcl requires exemplars, Base and
// DccInstructionOnly require none, Icl requires exactly icl_required.
// Throws WrongMode / MissingExemplars.
void validate_prompt_spec(const PromptSpec& spec);

// One exemplar as a single-step scaffold block (question, <reasoning>,
// <answer>), used by the Icl baseline.
std::string render_icl_exemplar_block(const DccExemplar& e);
// One exemplar as a full three-segment trace in the template the model is
// asked to imitate. Parsing this block recovers the exemplar's answers.
std::string render_dcc_exemplar_block(const DccExemplar& e);

// Base/Icl prompt: system preamble (plus exemplar blocks in Icl mode), then
// the bare question as the user message. Throws WrongMode on DCC modes.
MessageList render_single_prompt(const TaskInstance& instance, const PromptSpec& spec);

// Three-step single-generation prompt. The step instructions direct the
// model to author its own forward and inverse interventions; exemplars (in
// DccIcl mode) appear in the system message as complete three-segment
// traces. Throws WrongMode / MissingExemplars.
MessageList render_dcc_prompt(const TaskInstance& instance, const PromptSpec& spec);

// Per-call prompt for the separate-trace variant. step is 0, 1 or 2;
// steps 1 and 2 receive only the previous step's normalized answer.
MessageList render_dcc_step_prompt(const TaskInstance& instance, const PromptSpec& spec, int step,
                                   std::string_view previous_answer);

// SuppressThinking appends " <token>" to the final user message; Default is
// identity. Throws EmptyPrompt on an empty list.
MessageList apply_think_policy(MessageList messages, ThinkPolicy policy,
                               std::string_view token = kDefaultThinkSuppressionToken);

}  // namespace dcc
