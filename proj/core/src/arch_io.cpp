// SPDX-License-Identifier: Apache-2.0
#include "ddc/arch_io.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace ddc {

using nlohmann::json;

std::string architecture_to_json(const ArchitectureSpec& arch) {
  json j;
  j["family"] = to_string(arch.family);
  j["input_shape"] = {arch.input_shape.channels, arch.input_shape.height, arch.input_shape.width};
  j["num_classes"] = arch.num_classes;
  j["layers"] = json::array();
  for (const auto& l : arch.layers) {
    j["layers"].push_back({{"index", l.index},
                           {"kind", to_string(l.kind)},
                           {"kernel_size", l.kernel_size},
                           {"stride", l.stride},
                           {"padding", l.padding},
                           {"out_channels", l.out_channels},
                           {"skip_start", l.skip_start},
                           {"skip_end", l.skip_end},
                           {"removable", l.removable}});
  }
  return j.dump(2) + "\n";
}

ArchitectureSpec architecture_from_json(const std::string& text) {
  json j = json::parse(text);
  ArchitectureSpec arch;
  arch.family = family_from_string(j.at("family").get<std::string>());
  auto shape = j.at("input_shape");
  arch.input_shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
  arch.num_classes = j.at("num_classes").get<int>();
  for (const auto& jl : j.at("layers")) {
    LayerDescriptor l;
    l.index = jl.at("index").get<int>();
    l.kind = layer_kind_from_string(jl.at("kind").get<std::string>());
    l.kernel_size = jl.at("kernel_size").get<int>();
    l.stride = jl.at("stride").get<int>();
    l.padding = jl.at("padding").get<int>();
    l.out_channels = jl.at("out_channels").get<int>();
    l.skip_start = jl.at("skip_start").get<bool>();
    l.skip_end = jl.at("skip_end").get<bool>();
    l.removable = jl.at("removable").get<bool>();
    arch.layers.push_back(l);
  }
  return arch;
}

void save_architecture(const ArchitectureSpec& arch, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << architecture_to_json(arch);
}

ArchitectureSpec load_architecture(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return architecture_from_json(text);
}

}  // namespace ddc
