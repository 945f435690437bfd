// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <numeric>
#include <set>

#include "ddc/data.hpp"
#include "support/synthetic_cifar.hpp"

using namespace ddc;
namespace fs = std::filesystem;

namespace {

struct MiniCifar {
  fs::path root;
  static constexpr int kTrainPerClass = 12;
  static constexpr int kTestPerClass = 5;

  MiniCifar() {
    root = fs::temp_directory_path() / "ddc_data_fixture_v1";
    if (!fs::exists(root / "cifar-10-batches-bin" / "data_batch_5.bin"))
      testsupport::write_synthetic_cifar10(root, kTrainPerClass, kTestPerClass, 99);
    if (!fs::exists(root / "cifar-100-binary" / "train.bin")) {
      std::vector<int> all(100);
      std::iota(all.begin(), all.end(), 0);
      testsupport::write_synthetic_cifar100(root, 3, 2, 99, all);
    }
  }
};

}  // namespace

TEST_CASE("builtin subsets are exactly the named ones") {
  auto subsets = builtin_subsets();
  CHECK(subsets.size() == 11);  // nine named + two full pseudo-subsets

  CHECK(subsets.at("animals").classes == std::vector<int>{2, 3, 4, 5, 6, 7});
  CHECK(subsets.at("animals").base_dataset == BaseDataset::cifar10);
  CHECK(subsets.at("vehicles10").classes == std::vector<int>{0, 1, 8, 9});

  for (const auto* name : {"insects", "fruits", "trees", "vehicles1", "vehicles2", "people",
                           "reptiles"}) {
    INFO(name);
    CHECK(subsets.at(name).classes.size() == 5);
    CHECK(subsets.at(name).base_dataset == BaseDataset::cifar100);
  }

  CHECK(subsets.at("cifar10").classes.size() == 10);
  CHECK(subsets.at("cifar100").classes.size() == 100);

  // all superclass fine labels are distinct and valid
  std::set<int> seen;
  for (const auto* name : {"insects", "fruits", "trees", "vehicles1", "vehicles2", "people",
                           "reptiles"})
    for (int c : subsets.at(name).classes) {
      CHECK(c >= 0);
      CHECK(c <= 99);
      CHECK(seen.insert(c).second);
    }
}

TEST_CASE("load_split filters, remaps and counts correctly") {
  MiniCifar fx;

  SUBCASE("full dataset sees every record") {
    Dataset full = load_split(builtin_subsets().at("cifar10"), Split::train, fx.root);
    CHECK(full.size() == 10 * MiniCifar::kTrainPerClass);
    Dataset test = load_split(builtin_subsets().at("cifar10"), Split::test, fx.root);
    CHECK(test.size() == 10 * MiniCifar::kTestPerClass);
  }

  SUBCASE("subset sizes are per-class counts times class count") {
    Dataset animals = load_split(builtin_subsets().at("animals"), Split::test, fx.root);
    CHECK(animals.size() == 6 * MiniCifar::kTestPerClass);
    CHECK(animals.num_classes == 6);
  }

  SUBCASE("labels are remapped to listed order") {
    // frog is original class 6, fifth entry (index 4) of the animals ordering
    Dataset animals = load_split(builtin_subsets().at("animals"), Split::train, fx.root);
    std::set<int> labels(animals.labels.begin(), animals.labels.end());
    CHECK(*labels.begin() == 0);
    CHECK(*labels.rbegin() == 5);
    const auto& cls = builtin_subsets().at("animals").classes;
    CHECK(cls[4] == 6);  // frog
  }

  SUBCASE("partitioning subsets add up to the full split") {
    Dataset animals = load_split(builtin_subsets().at("animals"), Split::train, fx.root);
    Dataset vehicles = load_split(builtin_subsets().at("vehicles10"), Split::train, fx.root);
    SubsetSpec rest{BaseDataset::cifar10, "rest", {2, 3}};  // bird, cat already in animals
    Dataset full = load_split(builtin_subsets().at("cifar10"), Split::train, fx.root);
    CHECK(animals.size() + vehicles.size() == full.size());
  }

  SUBCASE("cifar100 superclass subsets load fine labels") {
    Dataset insects = load_split(builtin_subsets().at("insects"), Split::train, fx.root);
    CHECK(insects.size() == 5 * 3);
    CHECK(insects.num_classes == 5);
  }

  SUBCASE("invalid classes are rejected") {
    SubsetSpec bad{BaseDataset::cifar10, "bad", {0, 11}};
    CHECK_THROWS_AS(load_split(bad, Split::train, fx.root), std::invalid_argument);
    SubsetSpec dup{BaseDataset::cifar10, "dup", {1, 1}};
    CHECK_THROWS_AS(load_split(dup, Split::train, fx.root), std::invalid_argument);
  }

  SUBCASE("missing files raise fetch instructions") {
    SubsetSpec full = builtin_subsets().at("cifar10");
    try {
      load_split(full, Split::train, fx.root / "nowhere");
      FAIL("expected DatasetMissingError");
    } catch (const DatasetMissingError& e) {
      CHECK(std::string(e.what()).find("curl") != std::string::npos);
    }
  }
}

TEST_CASE("loading is deterministic: same spec and split give the same sequence") {
  MiniCifar fx;
  SubsetSpec pair{BaseDataset::cifar10, "pair", {3, 7}};
  Dataset a = load_split(pair, Split::train, fx.root);
  Dataset b = load_split(pair, Split::train, fx.root);
  CHECK(a.labels == b.labels);
  CHECK(a.pixels == b.pixels);
}

TEST_CASE("normalization statistics come from the full training split") {
  MiniCifar fx;
  Dataset full = load_split(builtin_subsets().at("cifar10"), Split::train, fx.root);
  Dataset pair = load_split(SubsetSpec{BaseDataset::cifar10, "pair", {0, 1}}, Split::train,
                            fx.root);
  CHECK(full.channel_mean == pair.channel_mean);
  CHECK(full.channel_std == pair.channel_std);
  for (double s : full.channel_std) CHECK(s > 0.0);
}

TEST_CASE("materialize_batch normalizes and preserves layout") {
  MiniCifar fx;
  Dataset ds = load_split(builtin_subsets().at("cifar10"), Split::train, fx.root);
  std::vector<int> idx{0, 1};
  Eigen::MatrixXd batch = materialize_batch(ds, idx);
  CHECK(batch.rows() == 3072);
  CHECK(batch.cols() == 2);
  // spot-check one pixel against the normalization formula
  const double raw = ds.pixels[5] / 255.0;
  CHECK(batch(5, 0) ==
        doctest::Approx((raw - ds.channel_mean[0]) / ds.channel_std[0]).epsilon(1e-12));
}

TEST_CASE("restrict_teacher_logits selects the right rows") {
  Eigen::MatrixXd logits(10, 2);
  for (int i = 0; i < 10; ++i) {
    logits(i, 0) = i;
    logits(i, 1) = -i;
  }
  SubsetSpec animals = builtin_subsets().at("animals");

  Eigen::MatrixXd out = restrict_teacher_logits(logits, animals);
  REQUIRE(out.rows() == 6);
  for (int r = 0; r < 6; ++r) CHECK(out(r, 0) == animals.classes[static_cast<size_t>(r)]);

  SUBCASE("identity restriction is a no-op") {
    SubsetSpec full = builtin_subsets().at("cifar10");
    CHECK(restrict_teacher_logits(logits, full) == logits);
  }

  SUBCASE("argmax agrees whenever the winner is inside the subset") {
    Eigen::MatrixXd l(10, 1);
    l.setZero();
    l(6, 0) = 5.0;  // frog wins overall
    Eigen::MatrixXd r = restrict_teacher_logits(l, animals);
    Eigen::Index full_arg, sub_arg;
    l.col(0).maxCoeff(&full_arg);
    r.col(0).maxCoeff(&sub_arg);
    CHECK(animals.classes[static_cast<size_t>(sub_arg)] == static_cast<int>(full_arg));
  }

  SUBCASE("width mismatch is an error") {
    Eigen::MatrixXd narrow(4, 1);
    narrow.setZero();
    CHECK_THROWS_AS(restrict_teacher_logits(narrow, animals), std::invalid_argument);
  }
}
