// SPDX-License-Identifier: Apache-2.0
#include "ddc/builtins.hpp"

namespace ddc {

namespace {

struct Builder {
  ArchitectureSpec spec;

  explicit Builder(int num_classes, Family family) {
    spec.num_classes = num_classes;
    spec.family = family;
    spec.input_shape = {3, 32, 32};
  }

  Builder& conv(int out_ch, int k = 3, int s = 1, int p = 1, bool skip_start = false,
                bool skip_end = false) {
    LayerDescriptor d;
    d.index = static_cast<int>(spec.layers.size());
    d.kind = LayerKind::convolution;
    d.kernel_size = k;
    d.stride = s;
    d.padding = p;
    d.out_channels = out_ch;
    d.skip_start = skip_start;
    d.skip_end = skip_end;
    d.removable = true;
    spec.layers.push_back(d);
    return *this;
  }

  Builder& pool(int k = 2, int s = 2) {
    LayerDescriptor d;
    d.index = static_cast<int>(spec.layers.size());
    d.kind = LayerKind::pooling;
    d.kernel_size = k;
    d.stride = s;
    spec.layers.push_back(d);
    return *this;
  }

  Builder& flatten() {
    LayerDescriptor d;
    d.index = static_cast<int>(spec.layers.size());
    d.kind = LayerKind::flatten;
    spec.layers.push_back(d);
    return *this;
  }

  Builder& classifier() {
    LayerDescriptor d;
    d.index = static_cast<int>(spec.layers.size());
    d.kind = LayerKind::linear;
    d.out_channels = spec.num_classes;
    spec.layers.push_back(d);
    return *this;
  }

  // A channel-preserving residual block of two 3x3 convolutions.
  Builder& block(int ch) { return conv(ch, 3, 1, 1, true, false).conv(ch, 3, 1, 1, false, true); }
};

}  // namespace

ArchitectureSpec desk_teacher(int num_classes) {
  Builder b(num_classes, Family::sequential);
  b.conv(8).pool().conv(16).pool().conv(16).conv(32).pool().flatten().classifier();
  return b.spec;
}

ArchitectureSpec desk_wide_teacher(int num_classes) {
  Builder b(num_classes, Family::sequential);
  b.conv(16).pool().conv(32).pool().conv(32).conv(64).pool().flatten().classifier();
  return b.spec;
}

ArchitectureSpec desk_residual_teacher(int num_classes) {
  Builder b(num_classes, Family::residual);
  b.conv(16).block(16).pool().block(16).pool().flatten().classifier();
  return b.spec;
}

ArchitectureSpec vgg11(int num_classes) {
  Builder b(num_classes, Family::sequential);
  b.conv(64).pool();
  b.conv(128).pool();
  b.conv(256).conv(256).pool();
  b.conv(512).conv(512).pool();
  b.conv(512).conv(512).pool();
  b.flatten().classifier();
  return b.spec;
}

ArchitectureSpec resnet18(int num_classes) {
  // Identity-skip adaptation: channel changes happen in transition
  // convolutions between stages, downsampling in pooling layers, so every
  // residual add is parameter-free.
  Builder b(num_classes, Family::residual);
  b.conv(64);
  b.block(64).block(64).pool();
  b.conv(128).block(128).block(128).pool();
  b.conv(256).block(256).block(256).pool();
  b.conv(512).block(512).block(512).pool();
  b.flatten().classifier();
  return b.spec;
}

ArchitectureSpec kd_student_vgg7(int num_classes) {
  Builder b(num_classes, Family::sequential);
  b.conv(32).pool();
  b.conv(64).pool();
  b.conv(128).conv(128).pool();
  b.conv(128).conv(128).pool();
  b.flatten().classifier();
  return b.spec;
}

ArchitectureSpec builtin_architecture(const std::string& name, int num_classes) {
  if (name == "desk") return desk_teacher(num_classes);
  if (name == "desk-wide") return desk_wide_teacher(num_classes);
  if (name == "desk-residual") return desk_residual_teacher(num_classes);
  if (name == "vgg11") return vgg11(num_classes);
  if (name == "resnet18") return resnet18(num_classes);
  if (name == "kd-vgg7") return kd_student_vgg7(num_classes);
  throw std::invalid_argument("unknown builtin architecture: " + name);
}

}  // namespace ddc
