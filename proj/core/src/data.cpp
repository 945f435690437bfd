// SPDX-License-Identifier: Apache-2.0
#include "ddc/data.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <set>

namespace ddc {

const char* to_string(BaseDataset d) { return d == BaseDataset::cifar10 ? "cifar10" : "cifar100"; }

BaseDataset base_dataset_from_string(const std::string& s) {
  if (s == "cifar10") return BaseDataset::cifar10;
  if (s == "cifar100") return BaseDataset::cifar100;
  throw std::invalid_argument("unknown dataset: " + s);
}

namespace {

constexpr int kImageBytes = 3072;

// CIFAR-10 label order: airplane automobile bird cat deer dog frog horse ship truck.
constexpr int kAnimals[] = {2, 3, 4, 5, 6, 7};
constexpr int kVehicles10[] = {0, 1, 8, 9};

// CIFAR-100 fine labels per superclass (official taxonomy).
constexpr int kInsects[] = {6, 7, 14, 18, 24};        // bee beetle butterfly caterpillar cockroach
constexpr int kFruits[] = {0, 51, 53, 57, 83};        // fruit and vegetables
constexpr int kTrees[] = {47, 52, 56, 59, 96};        // maple oak palm pine willow
constexpr int kVehicles1[] = {8, 13, 48, 58, 90};     // bicycle bus motorcycle pickup train
constexpr int kVehicles2[] = {41, 69, 81, 85, 89};    // lawn_mower rocket streetcar tank tractor
constexpr int kPeople[] = {2, 11, 35, 46, 98};        // baby boy girl man woman
constexpr int kReptiles[] = {27, 29, 44, 78, 93};     // crocodile dinosaur lizard snake turtle

SubsetSpec make_subset(BaseDataset base, std::string name, std::span<const int> classes) {
  return SubsetSpec{base, std::move(name), {classes.begin(), classes.end()}};
}

std::vector<int> iota_classes(int n) {
  std::vector<int> v(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<size_t>(i)] = i;
  return v;
}

struct RawSplit {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;  // fine labels for cifar100
};

void read_records(const std::filesystem::path& file, int label_bytes, RawSplit& out) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DatasetMissingError("cannot open " + file.string());
  const int record = label_bytes + kImageBytes;
  std::vector<char> buf(static_cast<size_t>(record));
  while (in.read(buf.data(), record)) {
    // cifar100 records carry (coarse, fine); the last label byte is the one used
    out.labels.push_back(static_cast<std::uint8_t>(buf[static_cast<size_t>(label_bytes) - 1]));
    out.pixels.insert(out.pixels.end(), buf.begin() + label_bytes, buf.end());
  }
}

RawSplit load_raw(BaseDataset base, Split split, const std::filesystem::path& root) {
  RawSplit raw;
  if (base == BaseDataset::cifar10) {
    const auto dir = root / "cifar-10-batches-bin";
    if (!std::filesystem::exists(dir))
      throw DatasetMissingError(
          "CIFAR-10 binary distribution not found under " + dir.string() +
          "\nFetch with:\n  curl -LO https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz\n"
          "  tar -xzf cifar-10-binary.tar.gz -C " + root.string());
    if (split == Split::train) {
      for (int i = 1; i <= 5; ++i)
        read_records(dir / ("data_batch_" + std::to_string(i) + ".bin"), 1, raw);
    } else {
      read_records(dir / "test_batch.bin", 1, raw);
    }
  } else {
    const auto dir = root / "cifar-100-binary";
    if (!std::filesystem::exists(dir))
      throw DatasetMissingError(
          "CIFAR-100 binary distribution not found under " + dir.string() +
          "\nFetch with:\n  curl -LO https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz\n"
          "  tar -xzf cifar-100-binary.tar.gz -C " + root.string());
    read_records(dir / (split == Split::train ? "train.bin" : "test.bin"), 2, raw);
  }
  return raw;
}

// Per-channel mean/std of the full training split, shared by every subset so
// teacher and student see identical preprocessing.
struct NormStats {
  std::array<double, 3> mean{}, stddev{};
};

NormStats compute_stats(const RawSplit& train) {
  NormStats st;
  const size_t n = train.labels.size();
  const size_t plane = 1024;
  std::array<double, 3> sum{}, sumsq{};
  for (size_t img = 0; img < n; ++img) {
    const std::uint8_t* p = train.pixels.data() + img * kImageBytes;
    for (int c = 0; c < 3; ++c) {
      for (size_t i = 0; i < plane; ++i) {
        const double v = p[static_cast<size_t>(c) * plane + i] / 255.0;
        sum[static_cast<size_t>(c)] += v;
        sumsq[static_cast<size_t>(c)] += v * v;
      }
    }
  }
  const double count = static_cast<double>(n * plane);
  for (int c = 0; c < 3; ++c) {
    st.mean[static_cast<size_t>(c)] = sum[static_cast<size_t>(c)] / count;
    const double var =
        sumsq[static_cast<size_t>(c)] / count -
        st.mean[static_cast<size_t>(c)] * st.mean[static_cast<size_t>(c)];
    st.stddev[static_cast<size_t>(c)] = std::sqrt(std::max(var, 1e-12));
  }
  return st;
}

NormStats cached_stats(BaseDataset base, const std::filesystem::path& root) {
  static std::mutex mu;
  static std::map<std::string, NormStats> cache;
  const std::string key = std::string(to_string(base)) + "@" + root.string();
  std::lock_guard lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  NormStats st = compute_stats(load_raw(base, Split::train, root));
  cache.emplace(key, st);
  return st;
}

}  // namespace

std::map<std::string, SubsetSpec> builtin_subsets() {
  std::map<std::string, SubsetSpec> m;
  m["animals"] = make_subset(BaseDataset::cifar10, "animals", kAnimals);
  m["vehicles10"] = make_subset(BaseDataset::cifar10, "vehicles10", kVehicles10);
  m["insects"] = make_subset(BaseDataset::cifar100, "insects", kInsects);
  m["fruits"] = make_subset(BaseDataset::cifar100, "fruits", kFruits);
  m["trees"] = make_subset(BaseDataset::cifar100, "trees", kTrees);
  m["vehicles1"] = make_subset(BaseDataset::cifar100, "vehicles1", kVehicles1);
  m["vehicles2"] = make_subset(BaseDataset::cifar100, "vehicles2", kVehicles2);
  m["people"] = make_subset(BaseDataset::cifar100, "people", kPeople);
  m["reptiles"] = make_subset(BaseDataset::cifar100, "reptiles", kReptiles);
  m["cifar10"] = SubsetSpec{BaseDataset::cifar10, "cifar10", iota_classes(10)};
  m["cifar100"] = SubsetSpec{BaseDataset::cifar100, "cifar100", iota_classes(100)};
  return m;
}

Dataset load_split(const SubsetSpec& spec, Split split, const std::filesystem::path& root) {
  if (spec.classes.empty()) throw std::invalid_argument("subset has no classes");
  const int max_label = spec.base_dataset == BaseDataset::cifar10 ? 9 : 99;
  std::set<int> seen;
  for (int c : spec.classes) {
    if (c < 0 || c > max_label)
      throw std::invalid_argument("class " + std::to_string(c) + " is not valid for " +
                                  to_string(spec.base_dataset));
    if (!seen.insert(c).second)
      throw std::invalid_argument("duplicate class " + std::to_string(c) + " in subset");
  }

  std::map<int, int> remap;
  for (size_t i = 0; i < spec.classes.size(); ++i)
    remap[spec.classes[i]] = static_cast<int>(i);

  RawSplit raw = load_raw(spec.base_dataset, split, root);
  NormStats st = cached_stats(spec.base_dataset, root);

  Dataset ds;
  ds.num_classes = static_cast<int>(spec.classes.size());
  ds.channel_mean = st.mean;
  ds.channel_std = st.stddev;
  for (size_t i = 0; i < raw.labels.size(); ++i) {
    auto it = remap.find(raw.labels[i]);
    if (it == remap.end()) continue;
    ds.labels.push_back(it->second);
    const auto* p = raw.pixels.data() + i * kImageBytes;
    ds.pixels.insert(ds.pixels.end(), p, p + kImageBytes);
  }
  return ds;
}

Eigen::MatrixXd materialize_batch(const Dataset& ds, std::span<const int> indices) {
  const int plane = ds.height * ds.width;
  Eigen::MatrixXd out(ds.image_size(), static_cast<Eigen::Index>(indices.size()));
  for (size_t col = 0; col < indices.size(); ++col) {
    const int idx = indices[col];
    if (idx < 0 || static_cast<size_t>(idx) >= ds.size())
      throw std::out_of_range("batch index out of range");
    const std::uint8_t* p = ds.pixels.data() + static_cast<size_t>(idx) * ds.image_size();
    for (int c = 0; c < ds.channels; ++c) {
      const double mean = ds.channel_mean[static_cast<size_t>(c)];
      const double inv_std = 1.0 / ds.channel_std[static_cast<size_t>(c)];
      for (int i = 0; i < plane; ++i)
        out(static_cast<Eigen::Index>(c) * plane + i, static_cast<Eigen::Index>(col)) =
            (p[static_cast<size_t>(c) * plane + i] / 255.0 - mean) * inv_std;
    }
  }
  return out;
}

Eigen::MatrixXd restrict_teacher_logits(const Eigen::MatrixXd& teacher_logits,
                                        const SubsetSpec& spec) {
  for (int c : spec.classes)
    if (c < 0 || c >= teacher_logits.rows())
      throw std::invalid_argument("teacher logit width is too small for subset class " +
                                  std::to_string(c));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(spec.classes.size()), teacher_logits.cols());
  for (size_t i = 0; i < spec.classes.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = teacher_logits.row(spec.classes[i]);
  return out;
}

}  // namespace ddc
