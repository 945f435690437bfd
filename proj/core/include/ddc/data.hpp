// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddc {

enum class BaseDataset { cifar10, cifar100 };
enum class Split { train, test };

const char* to_string(BaseDataset d);
BaseDataset base_dataset_from_string(const std::string& s);

/// A named class subset of a base dataset. Labels are remapped to
/// 0..classes.size()-1 in listed order.
struct SubsetSpec {
  BaseDataset base_dataset = BaseDataset::cifar10;
  std::string name;
  std::vector<int> classes;  // original class identifiers, unique

  friend bool operator==(const SubsetSpec&, const SubsetSpec&) = default;
};

/// The paper-named subsets (animals, vehicles10, seven CIFAR-100
/// superclasses) plus `cifar10` / `cifar100` full pseudo-subsets.
std::map<std::string, SubsetSpec> builtin_subsets();

/// In-memory split: raw uint8 CHW pixels plus remapped labels and the
/// base dataset's full-train normalization statistics. Read-only after
/// construction; safe for concurrent readers.
struct Dataset {
  int channels = 3, height = 32, width = 32;
  std::vector<std::uint8_t> pixels;  // size() * 3072, channel-major per image
  std::vector<int> labels;
  int num_classes = 0;
  std::array<double, 3> channel_mean{};
  std::array<double, 3> channel_std{};

  std::size_t size() const { return labels.size(); }
  int image_size() const { return channels * height * width; }
};

/// Thrown when dataset files are absent; the message carries fetch
/// instructions.
class DatasetMissingError : public std::runtime_error {
 public:
  explicit DatasetMissingError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Reads the standard binary distribution under `root`
/// (root/cifar-10-batches-bin or root/cifar-100-binary), filters to the
/// subset's classes and remaps labels. CIFAR-100 subsets are defined over
/// fine labels.
Dataset load_split(const SubsetSpec& spec, Split split, const std::filesystem::path& root);

/// Normalized image batch, one column per requested index.
Eigen::MatrixXd materialize_batch(const Dataset& ds, std::span<const int> indices);

/// Selects the logit rows of spec.classes in remapped order
/// (logits: classes x batch).
Eigen::MatrixXd restrict_teacher_logits(const Eigen::MatrixXd& teacher_logits,
                                        const SubsetSpec& spec);

}  // namespace ddc
