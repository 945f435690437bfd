// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ddc/reinforce.hpp"

namespace ddc {

std::string record_to_json(const EvaluationRecord& rec);
EvaluationRecord record_from_json(const std::string& text);

/// One compact JSON object per line, full-precision floats.
std::string iteration_log_to_json(const IterationLog& log);
IterationLog iteration_log_from_json(const std::string& line);

std::vector<IterationLog> read_iterations_jsonl(const std::filesystem::path& file);

}  // namespace ddc
