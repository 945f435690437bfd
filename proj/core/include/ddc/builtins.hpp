// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ddc/arch.hpp"

namespace ddc {

/// Built-in teacher/student families for 32x32 RGB inputs. "desk" variants
/// are small enough to search and train on a laptop CPU; vgg11/resnet18 are
/// the full-scale teachers.
ArchitectureSpec desk_teacher(int num_classes);
ArchitectureSpec desk_wide_teacher(int num_classes);
ArchitectureSpec desk_residual_teacher(int num_classes);
ArchitectureSpec vgg11(int num_classes);
ArchitectureSpec resnet18(int num_classes);

/// 7 weight layers (6 conv + classifier), the fixed hand-designed student
/// used by the knowledge-distillation baseline.
ArchitectureSpec kd_student_vgg7(int num_classes);

/// Looks up a family by name ("desk", "desk-residual", "vgg11", "resnet18",
/// "kd-vgg7"); throws std::invalid_argument for unknown names.
ArchitectureSpec builtin_architecture(const std::string& name, int num_classes);

}  // namespace ddc
