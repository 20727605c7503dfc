#include "dcc/prompting.hpp"

#include <fstream>

#include "dcc/errors.hpp"
#include "dcc/trace_parser.hpp"

namespace dcc {

const std::string_view kDefaultSystemPreamble =
    "You are a careful problem solver. Put your working inside <reasoning>...</reasoning> tags "
    "and your final answer, alone, inside <answer>...</answer> tags. Follow the requested format "
    "exactly and write nothing outside the tags.";

const std::string_view kDccStepInstructions =
    "Answer in three steps, all in one continuous response.\n"
    "\n"
    "1. Answer the question below. Write your working inside <reasoning>...</reasoning> and the "
    "final answer alone inside <answer>...</answer>.\n"
    "\n"
    "2. Now consider a counterfactual version of this question, where the following intervention "
    "is made: state an intervention of your own that changes one quantity or condition in the "
    "question. Then answer the counterfactual question with its own <reasoning>...</reasoning> "
    "and <answer>...</answer>.\n"
    "\n"
    "3. Now consider a counterfactual version of the *counterfactual* question, where the "
    "following change intervenes on the previous intervention to restore the question to its "
    "original state: state the inverse of your step 2 intervention. Then answer with a final "
    "<reasoning>...</reasoning> and <answer>...</answer>.";

const std::string_view kDefaultThinkSuppressionToken = "/nothink";

const char* prompt_mode_name(PromptMode mode) {
    switch (mode) {
        case PromptMode::Base: return "base";
        case PromptMode::Icl: return "icl";
        case PromptMode::DccIcl: return "dcc-icl";
        case PromptMode::DccInstructionOnly: return "dcc-instruction-only";
    }
    return "?";
}

bool is_dcc_mode(PromptMode mode) {
    return mode == PromptMode::DccIcl || mode == PromptMode::DccInstructionOnly;
}

nlohmann::json exemplar_to_json(const DccExemplar& e) {
    nlohmann::json j{{"question", e.question},
                     {"answer0", e.answer0},
                     {"intervention_fwd", e.intervention_fwd},
                     {"answer1", e.answer1},
                     {"intervention_inv", e.intervention_inv},
                     {"answer0_again", e.answer0_again}};
    if (!e.reasoning0.empty()) j["reasoning0"] = e.reasoning0;
    if (!e.reasoning1.empty()) j["reasoning1"] = e.reasoning1;
    if (!e.reasoning2.empty()) j["reasoning2"] = e.reasoning2;
    return j;
}

DccExemplar exemplar_from_json(const nlohmann::json& j) {
    DccExemplar e;
    try {
        e.question = j.at("question").get<std::string>();
        e.answer0 = j.at("answer0").get<std::string>();
        e.intervention_fwd = j.at("intervention_fwd").get<std::string>();
        e.answer1 = j.at("answer1").get<std::string>();
        e.intervention_inv = j.at("intervention_inv").get<std::string>();
        e.answer0_again = j.at("answer0_again").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
        throw DccError(Errc::FormatError, std::string("exemplar: ") + ex.what());
    }
    e.reasoning0 = j.value("reasoning0", std::string{});
    e.reasoning1 = j.value("reasoning1", std::string{});
    e.reasoning2 = j.value("reasoning2", std::string{});
    if (normalize_answer(e.answer0) != normalize_answer(e.answer0_again)) {
        throw DccError(Errc::FormatError,
                       "exemplar violates consistency: answer0 '" + e.answer0 +
                           "' != answer0_again '" + e.answer0_again + "'");
    }
    return e;
}

std::vector<DccExemplar> load_exemplars_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DccError(Errc::Io, "cannot open " + path);
    std::vector<DccExemplar> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(exemplar_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DccError(Errc::FormatError, path + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const DccError& e) {
            throw DccError(e.code(), path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

void save_exemplars_jsonl(const std::string& path, const std::vector<DccExemplar>& exemplars) {
    std::ofstream out(path);
    if (!out) throw DccError(Errc::Io, "cannot write " + path);
    for (const auto& e : exemplars) out << exemplar_to_json(e).dump() << "\n";
}

void validate_prompt_spec(const PromptSpec& spec) {
    size_t n = spec.icl_exemplars.size();
    switch (spec.mode) {
        case PromptMode::Base:
        case PromptMode::DccInstructionOnly:
            if (n != 0) {
                throw DccError(Errc::Config, std::string(prompt_mode_name(spec.mode)) +
                                                 " mode takes no exemplars (got " +
                                                 std::to_string(n) + ")");
            }
            break;
        case PromptMode::Icl:
            if (static_cast<int>(n) != spec.icl_required) {
                throw DccError(Errc::MissingExemplars,
                               "icl mode requires exactly " + std::to_string(spec.icl_required) +
                                   " exemplars (got " + std::to_string(n) + ")");
            }
            break;
        case PromptMode::DccIcl:
            if (n == 0) {
                throw DccError(Errc::MissingExemplars, "dcc-icl mode requires exemplars");
            }
            break;
    }
}

std::string render_icl_exemplar_block(const DccExemplar& e) {
    return "Question: " + e.question + "\n<reasoning>" + e.reasoning0 + "</reasoning>\n<answer>" +
           e.answer0 + "</answer>";
}

std::string render_dcc_exemplar_block(const DccExemplar& e) {
    std::string out;
    out += "Question: " + e.question + "\n";
    out += "<reasoning>" + e.reasoning0 + "</reasoning>\n";
    out += "<answer>" + e.answer0 + "</answer>\n";
    out += "\n";
    out += "Now consider a counterfactual version of this question, where the following "
           "intervention is made:\n";
    out += e.intervention_fwd + "\n";
    out += "What is the answer?\n";
    out += "<reasoning>" + e.reasoning1 + "</reasoning>\n";
    out += "<answer>" + e.answer1 + "</answer>\n";
    out += "\n";
    out += "Now consider a counterfactual version of the *counterfactual* question, where the "
           "following change intervenes on the previous intervention to restore the question to "
           "its original state:\n";
    out += e.intervention_inv + "\n";
    out += "What is the answer?\n";
    out += "<reasoning>" + e.reasoning2 + "</reasoning>\n";
    out += "<answer>" + e.answer0_again + "</answer>";
    return out;
}

namespace {

std::string join_blocks(const std::vector<std::string>& blocks) {
    std::string out;
    for (const auto& b : blocks) {
        if (!out.empty()) out += "\n\n";
        out += b;
    }
    return out;
}

MessageList finish(MessageList messages, const PromptSpec& spec) {
    return apply_think_policy(std::move(messages), spec.think_policy,
                              spec.think_suppression_token);
}

}  // namespace

MessageList render_single_prompt(const TaskInstance& instance, const PromptSpec& spec) {
    if (is_dcc_mode(spec.mode)) {
        throw DccError(Errc::WrongMode, "render_single_prompt called with a DCC mode");
    }
    validate_prompt_spec(spec);
    std::string system = spec.system_preamble;
    if (spec.mode == PromptMode::Icl) {
        std::vector<std::string> blocks;
        for (const auto& e : spec.icl_exemplars) blocks.push_back(render_icl_exemplar_block(e));
        system += "\n\nHere are worked examples:\n\n" + join_blocks(blocks);
    }
    MessageList messages{{"system", system}, {"user", instance.question}};
    return finish(std::move(messages), spec);
}

namespace {

std::string dcc_system_message(const PromptSpec& spec) {
    std::string system = spec.system_preamble;
    if (spec.mode == PromptMode::DccIcl) {
        std::vector<std::string> blocks;
        for (const auto& e : spec.icl_exemplars) blocks.push_back(render_dcc_exemplar_block(e));
        system += "\n\nHere are complete examples of the three-step procedure:\n\n" +
                  join_blocks(blocks);
    }
    return system;
}

}  // namespace

MessageList render_dcc_prompt(const TaskInstance& instance, const PromptSpec& spec) {
    if (!is_dcc_mode(spec.mode)) {
        throw DccError(Errc::WrongMode, "render_dcc_prompt called with a non-DCC mode");
    }
    validate_prompt_spec(spec);
    std::string user = std::string(kDccStepInstructions) + "\n\nQuestion: " + instance.question;
    MessageList messages{{"system", dcc_system_message(spec)}, {"user", user}};
    return finish(std::move(messages), spec);
}

MessageList render_dcc_step_prompt(const TaskInstance& instance, const PromptSpec& spec, int step,
                                   std::string_view previous_answer) {
    if (!is_dcc_mode(spec.mode)) {
        throw DccError(Errc::WrongMode, "render_dcc_step_prompt called with a non-DCC mode");
    }
    validate_prompt_spec(spec);
    if (step < 0 || step > 2) {
        throw DccError(Errc::Config, "dcc step must be 0, 1 or 2 (got " + std::to_string(step) + ")");
    }
    if (step > 0 && previous_answer.empty()) {
        throw DccError(Errc::Config, "dcc step " + std::to_string(step) + " requires the previous answer");
    }
    std::string user;
    switch (step) {
        case 0:
            user = "Answer the question below. Write your working inside "
                   "<reasoning>...</reasoning> and the final answer alone inside "
                   "<answer>...</answer>.\n\nQuestion: " +
                   instance.question;
            break;
        case 1:
            user = "Question: " + instance.question + "\n\nThis question was previously answered "
                   "with: " + std::string(previous_answer) +
                   "\n\nNow consider a counterfactual version of this question, where the "
                   "following intervention is made: state an intervention of your own that "
                   "changes one quantity or condition in the question. Then answer the "
                   "counterfactual question. Write your working inside "
                   "<reasoning>...</reasoning> and the final answer alone inside "
                   "<answer>...</answer>.";
            break;
        case 2:
            user = "Question: " + instance.question + "\n\nThe counterfactual version of this "
                   "question was previously answered with: " + std::string(previous_answer) +
                   "\n\nNow consider a counterfactual version of the *counterfactual* question, "
                   "where the following change intervenes on the previous intervention to "
                   "restore the question to its original state: state the inverse of the "
                   "previous intervention. Then answer the restored question. Write your working "
                   "inside <reasoning>...</reasoning> and the final answer alone inside "
                   "<answer>...</answer>.";
            break;
    }
    MessageList messages{{"system", dcc_system_message(spec)}, {"user", user}};
    return finish(std::move(messages), spec);
}

MessageList apply_think_policy(MessageList messages, ThinkPolicy policy, std::string_view token) {
    if (messages.empty()) throw DccError(Errc::EmptyPrompt, "empty message list");
    if (policy == ThinkPolicy::Default) return messages;
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
        if (it->role == "user") {
            it->content += " ";
            it->content += token;
            return messages;
        }
    }
    throw DccError(Errc::EmptyPrompt, "no user message to carry the think suppression token");
}

}  // namespace dcc
