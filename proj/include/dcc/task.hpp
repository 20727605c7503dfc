#pragma once

#include <optional>
#include <string>

#include "dcc/symbolic.hpp"

namespace dcc {

// One benchmark question as presented to the model.
struct TaskInstance {
    std::string id;
    std::string question;                      // rendered natural-language text
    std::optional<std::string> gold_answer;    // normalized; absent when unlabeled
    std::optional<SymbolicProblem> symbolic;   // present for symbolic corpora
    std::string dataset;                       // source tag for reports
    std::string rationale;                     // optional worked solution (exemplar reasoning)
};

}  // namespace dcc
