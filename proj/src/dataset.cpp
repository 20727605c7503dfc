#include "dcc/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "dcc/errors.hpp"
#include "dcc/trace_parser.hpp"

namespace dcc {

const char* dataset_format_name(DatasetFormat format) {
    switch (format) {
        case DatasetFormat::Generic: return "generic";
        case DatasetFormat::Gsm8kRaw: return "gsm8k";
        case DatasetFormat::CruxEvalRaw: return "cruxeval";
    }
    return "?";
}

namespace {

std::string id_or_line(const nlohmann::json& j, int line_no) {
    if (j.contains("id")) {
        const auto& id = j.at("id");
        if (id.is_string()) return id.get<std::string>();
        if (id.is_number_integer()) return std::to_string(id.get<int64_t>());
    }
    return std::to_string(line_no);
}

// Applies fn to each parsed JSONL line, with line numbers in errors.
template <typename Fn>
void for_each_jsonl(const std::string& path, Fn fn) {
    std::ifstream in(path);
    if (!in) throw DccError(Errc::Io, "cannot open " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DccError(Errc::FormatError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(j, line_no);
        } catch (const nlohmann::json::exception& e) {
            throw DccError(Errc::FormatError, path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

}  // namespace

std::pair<std::string, std::string> split_gsm8k_answer(const std::string& answer) {
    static constexpr std::string_view kMarker = "#### ";
    auto pos = answer.rfind(kMarker);
    if (pos == std::string::npos) {
        throw DccError(Errc::FormatError, "gsm8k answer lacks the '#### ' gold marker");
    }
    std::string rationale = answer.substr(0, pos);
    while (!rationale.empty() && (rationale.back() == '\n' || rationale.back() == ' ')) {
        rationale.pop_back();
    }
    std::string gold = answer.substr(pos + kMarker.size());
    if (auto nl = gold.find('\n'); nl != std::string::npos) gold.resize(nl);
    return {rationale, gold};
}

std::vector<CruxItem> load_cruxeval_items(const std::string& path) {
    std::vector<CruxItem> items;
    for_each_jsonl(path, [&](const nlohmann::json& j, int line_no) {
        CruxItem item;
        item.id = id_or_line(j, line_no);
        item.code = j.at("code").get<std::string>();
        item.input = j.at("input").get<std::string>();
        item.output = j.value("output", std::string{});
        items.push_back(std::move(item));
    });
    return items;
}

std::string render_crux_question(const CruxItem& item) {
    return "You are given the following function:\n\n" + item.code +
           "\n\nWhat does f(" + item.input + ") evaluate to? Reply with the exact value.";
}

std::vector<TaskInstance> load_dataset(const DatasetSpec& spec) {
    std::vector<TaskInstance> instances;
    switch (spec.format) {
        case DatasetFormat::Generic:
            for_each_jsonl(spec.path, [&](const nlohmann::json& j, int line_no) {
                TaskInstance inst;
                inst.id = id_or_line(j, line_no);
                if (!j.contains("question")) {
                    throw DccError(Errc::FormatError, spec.path + ":" + std::to_string(line_no) +
                                                          ": missing 'question'");
                }
                inst.question = j.at("question").get<std::string>();
                if (j.contains("answer") && !j.at("answer").is_null()) {
                    inst.gold_answer = normalize_answer(j.at("answer").get<std::string>());
                }
                inst.rationale = j.value("rationale", std::string{});
                inst.dataset = spec.name;
                instances.push_back(std::move(inst));
            });
            break;
        case DatasetFormat::Gsm8kRaw:
            for_each_jsonl(spec.path, [&](const nlohmann::json& j, int line_no) {
                TaskInstance inst;
                inst.id = id_or_line(j, line_no);
                inst.question = j.at("question").get<std::string>();
                try {
                    auto [rationale, gold] = split_gsm8k_answer(j.at("answer").get<std::string>());
                    inst.rationale = std::move(rationale);
                    inst.gold_answer = normalize_answer(gold);
                } catch (const DccError& e) {
                    throw DccError(e.code(),
                                   spec.path + ":" + std::to_string(line_no) + ": " + e.what());
                }
                inst.dataset = spec.name;
                instances.push_back(std::move(inst));
            });
            break;
        case DatasetFormat::CruxEvalRaw: {
            auto items = load_cruxeval_items(spec.path);
            for (const auto& item : items) {
                TaskInstance inst;
                inst.id = item.id;
                inst.question = render_crux_question(item);
                if (!item.output.empty()) inst.gold_answer = normalize_answer(item.output);
                inst.dataset = spec.name;
                instances.push_back(std::move(inst));
            }
            break;
        }
    }
    for (const auto& inst : instances) {
        if (inst.id.empty() || inst.question.empty()) {
            throw DccError(Errc::FormatError, spec.path + ": instance with empty id or question");
        }
    }
    return instances;
}

void save_dataset_jsonl(const std::string& path, const std::vector<TaskInstance>& instances) {
    std::ofstream out(path);
    if (!out) throw DccError(Errc::Io, "cannot write " + path);
    for (const auto& inst : instances) {
        nlohmann::json j{{"id", inst.id}, {"question", inst.question}};
        if (inst.gold_answer) j["answer"] = *inst.gold_answer;
        if (!inst.rationale.empty()) j["rationale"] = inst.rationale;
        out << j.dump() << "\n";
    }
}

}  // namespace dcc
