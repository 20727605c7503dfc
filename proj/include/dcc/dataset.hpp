#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcc/task.hpp"

namespace dcc {

enum class DatasetFormat { Generic, Gsm8kRaw, CruxEvalRaw };

const char* dataset_format_name(DatasetFormat format);

struct DatasetSpec {
    std::string path;
    DatasetFormat format = DatasetFormat::Generic;
    std::string name;  // tag carried into instances and reports
};

// One code-reasoning item in its raw form; also consumed directly by the
// string mutation, which needs the code rather than the rendered question.
struct CruxItem {
    std::string id;
    std::string code;
    std::string input;
    std::string output;
};

std::vector<CruxItem> load_cruxeval_items(const std::string& path);
std::string render_crux_question(const CruxItem& item);

// Loads instances in file order. Missing ids are assigned the 1-based line
// number as a string; gold answers are normalized on load. Malformed lines
// raise FormatError naming the line.
std::vector<TaskInstance> load_dataset(const DatasetSpec& spec);

// Splits a raw GSM8K answer field into (rationale, gold): gold is the token
// following the final "#### " marker.
std::pair<std::string, std::string> split_gsm8k_answer(const std::string& answer);

void save_dataset_jsonl(const std::string& path, const std::vector<TaskInstance>& instances);

}  // namespace dcc
