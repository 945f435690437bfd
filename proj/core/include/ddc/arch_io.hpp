// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>

#include "ddc/arch.hpp"

namespace ddc {

/// JSON document with one record per layer; field names match the
/// LayerDescriptor fields exactly.
std::string architecture_to_json(const ArchitectureSpec& arch);
ArchitectureSpec architecture_from_json(const std::string& text);

void save_architecture(const ArchitectureSpec& arch, const std::filesystem::path& file);
ArchitectureSpec load_architecture(const std::filesystem::path& file);

}  // namespace ddc
