// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <variant>
#include <vector>

#include "ddc/arch.hpp"

namespace ddc {

/// CPU execution engine for ArchitectureSpec models (double precision,
/// im2col + GEMM convolutions). One runtime layer per descriptor; activation
/// layout is channel-major (c*H*W + y*W + x) per image, images as columns.
class Model {
 public:
  struct Conv {
    int k = 0, s = 0, p = 0;
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, out_h = 0, out_w = 0;
    bool relu = true;
    bool skip_save = false;   // stash this layer's input for a later residual add
    int skip_from = -1;       // layer whose stashed input is added before the relu
    Eigen::MatrixXd W;        // out_c x (in_c*k*k)
    Eigen::VectorXd b;
    std::vector<int> gather;  // im2col source offsets, -1 for padding
  };
  struct Pool {
    int k = 0, s = 0;
    int c = 0, in_h = 0, in_w = 0, out_h = 0, out_w = 0;
  };
  struct Flatten {
    int width = 0;  // c*h*w, layout is already flat
  };
  struct Linear {
    int in_w = 0, out_w = 0;
    bool relu = false;
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
  };
  using Layer = std::variant<Conv, Pool, Flatten, Linear>;

  struct Cache {
    std::vector<Eigen::MatrixXd> acts;  // acts[0] = input, acts[i+1] = output of layer i
    std::vector<Eigen::MatrixXi> pool_src;  // per layer; empty unless pooling
  };

  struct Gradients {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
  };

  /// Observes (layer index, post-activation outputs, dLoss/dOutput) during
  /// backward, in activation layout. Used by filter ranking.
  using ActivationProbe =
      std::function<void(int, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

  Model() = default;

  /// Builds and randomly initializes a model. Throws std::invalid_argument
  /// if the spec does not validate.
  static Model instantiate(const ArchitectureSpec& spec, std::uint64_t seed);

  const ArchitectureSpec& spec() const { return spec_; }
  int input_size() const;
  int num_classes() const { return spec_.num_classes; }
  long long parameter_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Logits (classes x batch). Thread-safe: no member mutation.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;

  /// Forward pass that records everything backward() needs.
  Eigen::MatrixXd forward_train(const Eigen::MatrixXd& input, Cache& cache) const;

  Gradients zero_gradients() const;

  /// Accumulates parameter gradients given dLoss/dLogits.
  void backward(const Cache& cache, const Eigen::MatrixXd& dlogits, Gradients& grads,
                const ActivationProbe& probe = nullptr) const;

  /// v = momentum*v + g; theta -= lr*v.
  void apply_sgd(const Gradients& grads, Gradients& velocity, double lr, double momentum);

 private:
  ArchitectureSpec spec_;
  std::vector<Layer> layers_;
};

void save_model_weights(const Model& model, const std::filesystem::path& file);
/// Loads weights saved by save_model_weights into a model instantiated from
/// the matching spec; throws on any shape mismatch.
Model load_model_weights(const ArchitectureSpec& spec, const std::filesystem::path& file);

}  // namespace ddc
