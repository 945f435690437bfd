// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddc {

enum class LayerKind { convolution, pooling, linear, flatten };
enum class Family { sequential, residual };

const char* to_string(LayerKind kind);
const char* to_string(Family family);
LayerKind layer_kind_from_string(const std::string& s);
Family family_from_string(const std::string& s);

/// One layer of an architecture. Convolutions may carry skip flags marking a
/// residual connection from the input of the skip_start layer to the output
/// of the skip_end layer. Batch-norm and activation are considered fused into
/// their convolution and carry no descriptor of their own.
struct LayerDescriptor {
  int index = 0;                 // 0-based position in the network
  LayerKind kind = LayerKind::convolution;
  int kernel_size = 0;           // 0 for non-spatial layers
  int stride = 0;                // 0 for non-spatial layers
  int padding = 0;               // 0 for non-spatial layers
  int out_channels = 0;          // filter count; output width for linear; 0 for pooling/flatten
  bool skip_start = false;       // residual connection originates at this layer's input
  bool skip_end = false;         // residual connection terminates at this layer's output
  bool removable = false;        // the policy may act on this layer (convolutions only)

  friend bool operator==(const LayerDescriptor&, const LayerDescriptor&) = default;
};

struct InputShape {
  int channels = 3;
  int height = 32;
  int width = 32;

  friend bool operator==(const InputShape&, const InputShape&) = default;
};

/// An ordered layer sequence plus input/output contract. Immutable by
/// convention after construction; all operations on it are pure.
struct ArchitectureSpec {
  std::vector<LayerDescriptor> layers;
  InputShape input_shape;
  int num_classes = 2;
  Family family = Family::sequential;

  friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Binary keep/remove decisions, one per removable layer (1 = keep).
struct ActionVector {
  std::vector<std::uint8_t> actions;

  friend bool operator==(const ActionVector&, const ActionVector&) = default;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Thrown by derive_student when an action vector removes every convolution.
/// Callers assign such trajectories the penalty reward rather than crashing.
class AllLayersRemovedError : public std::runtime_error {
 public:
  AllLayersRemovedError() : std::runtime_error("action vector removes every convolution layer") {}
};

/// Per-layer shape bookkeeping for a valid spec: the tensor shape *after*
/// each layer, plus the input channel count each layer sees.
struct LayerShape {
  int in_channels = 0;   // features consumed (flatten width for linear layers)
  int channels = 0;      // features produced
  int height = 0;
  int width = 0;
};

/// Walks the spatial pipeline. Throws std::invalid_argument if the walk is
/// impossible (spatial collapse, linear before flatten); use validate() for a
/// non-throwing report.
std::vector<LayerShape> compute_shapes(const ArchitectureSpec& arch);

int removable_count(const ArchitectureSpec& arch);
int max_conv_channels(const ArchitectureSpec& arch);

/// Applies keep/remove decisions to the teacher: keeps all non-removable
/// layers plus the kept convolutions, re-pairs or drops skip flags so every
/// surviving residual add is shape-sound, and replaces fully emptied residual
/// blocks with identity (channels match) or a single 1x1 projection.
/// Downstream input channels and the classifier head width follow implicitly
/// from the surviving layer sequence.
ArchitectureSpec derive_student(const ArchitectureSpec& teacher, const ActionVector& actions);

/// Feature-vector width produced by the encoders.
inline constexpr int kEncodingWidth = 7;

/// One row per removable layer:
/// (index/T, kernel, stride, padding, out_channels/max_channels, skip_start, skip_end).
Eigen::MatrixXd encode_architecture(const ArchitectureSpec& arch);

/// Encoding of *all* layers (same row layout) plus the row indices at which
/// actions are emitted. Non-removable layers contribute context to the
/// policy recurrence but no action of their own.
struct PolicyEncoding {
  Eigen::MatrixXd rows;           // layers x kEncodingWidth
  std::vector<int> action_rows;   // rows of removable layers, ascending
};
PolicyEncoding encode_policy_context(const ArchitectureSpec& arch);

/// Exact parameter count of the instantiated model:
/// sum of k*k*c_in*n + n over convolutions plus in*out + out over linears.
long long count_parameters(const ArchitectureSpec& arch);

/// Structural invariant check; failures are reported, never thrown.
ValidationReport validate(const ArchitectureSpec& arch);

}  // namespace ddc
