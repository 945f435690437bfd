// SPDX-License-Identifier: Apache-2.0
#include "ddc/arch.hpp"

#include <algorithm>

namespace ddc {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::convolution: return "convolution";
    case LayerKind::pooling: return "pooling";
    case LayerKind::linear: return "linear";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

const char* to_string(Family family) {
  return family == Family::sequential ? "sequential" : "residual";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "convolution") return LayerKind::convolution;
  if (s == "pooling") return LayerKind::pooling;
  if (s == "linear") return LayerKind::linear;
  if (s == "flatten") return LayerKind::flatten;
  throw std::invalid_argument("unknown layer kind: " + s);
}

Family family_from_string(const std::string& s) {
  if (s == "sequential") return Family::sequential;
  if (s == "residual") return Family::residual;
  throw std::invalid_argument("unknown architecture family: " + s);
}

namespace {

// Floor division; C++ '/' truncates toward zero which would report a
// 1-wide output for windows larger than the input.
int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

int conv_out_dim(int in, int k, int s, int p) { return floor_div(in + 2 * p - k, s) + 1; }
int pool_out_dim(int in, int k, int s) { return floor_div(in - k, s) + 1; }

}  // namespace

std::vector<LayerShape> compute_shapes(const ArchitectureSpec& arch) {
  std::vector<LayerShape> shapes;
  shapes.reserve(arch.layers.size());
  int c = arch.input_shape.channels;
  int h = arch.input_shape.height;
  int w = arch.input_shape.width;
  bool flat = false;
  for (const auto& l : arch.layers) {
    LayerShape s;
    switch (l.kind) {
      case LayerKind::convolution: {
        if (flat) throw std::invalid_argument("convolution after flatten");
        if (l.kernel_size < 1 || l.stride < 1 || l.out_channels < 1)
          throw std::invalid_argument("convolution kernel, stride and out_channels must be >= 1");
        s.in_channels = c;
        s.channels = l.out_channels;
        s.height = conv_out_dim(h, l.kernel_size, l.stride, l.padding);
        s.width = conv_out_dim(w, l.kernel_size, l.stride, l.padding);
        break;
      }
      case LayerKind::pooling: {
        if (flat) throw std::invalid_argument("pooling after flatten");
        if (l.kernel_size < 1 || l.stride < 1)
          throw std::invalid_argument("pooling kernel and stride must be >= 1");
        s.in_channels = c;
        s.channels = c;
        s.height = pool_out_dim(h, l.kernel_size, l.stride);
        s.width = pool_out_dim(w, l.kernel_size, l.stride);
        break;
      }
      case LayerKind::flatten: {
        if (flat) throw std::invalid_argument("repeated flatten");
        s.in_channels = c;
        s.channels = c * h * w;
        s.height = 1;
        s.width = 1;
        flat = true;
        break;
      }
      case LayerKind::linear: {
        if (!flat) throw std::invalid_argument("linear before flatten");
        if (l.out_channels < 1) throw std::invalid_argument("linear out_channels must be >= 1");
        s.in_channels = c;
        s.channels = l.out_channels;
        s.height = 1;
        s.width = 1;
        break;
      }
    }
    if (s.height < 1 || s.width < 1)
      throw std::invalid_argument("spatial dimensions collapse below 1 at layer " +
                                  std::to_string(l.index));
    c = s.channels;
    h = s.height;
    w = s.width;
    shapes.push_back(s);
  }
  return shapes;
}

int removable_count(const ArchitectureSpec& arch) {
  int n = 0;
  for (const auto& l : arch.layers) n += l.removable ? 1 : 0;
  return n;
}

int max_conv_channels(const ArchitectureSpec& arch) {
  int m = 0;
  for (const auto& l : arch.layers)
    if (l.kind == LayerKind::convolution) m = std::max(m, l.out_channels);
  return m;
}

ArchitectureSpec derive_student(const ArchitectureSpec& teacher, const ActionVector& actions) {
  if (static_cast<int>(actions.actions.size()) != removable_count(teacher))
    throw std::invalid_argument("action vector length does not match removable layer count");

  const auto& layers = teacher.layers;
  std::vector<bool> kept(layers.size(), true);
  {
    size_t a = 0;
    for (size_t i = 0; i < layers.size(); ++i)
      if (layers[i].removable) kept[i] = actions.actions[a++] != 0;
  }

  bool any_conv = false;
  for (size_t i = 0; i < layers.size(); ++i)
    if (kept[i] && layers[i].kind == LayerKind::convolution) any_conv = true;
  if (!any_conv) throw AllLayersRemovedError();

  ArchitectureSpec out;
  out.input_shape = teacher.input_shape;
  out.num_classes = teacher.num_classes;
  out.family = teacher.family;

  // Channels produced so far along the kept main path; drives the
  // identity-vs-projection choice for emptied residual blocks.
  int incoming = teacher.input_shape.channels;

  auto append = [&out](LayerDescriptor d) {
    d.index = static_cast<int>(out.layers.size());
    out.layers.push_back(d);
  };
  auto append_plain = [&](size_t i) {
    LayerDescriptor d = layers[i];
    d.skip_start = false;
    d.skip_end = false;
    append(d);
    if (d.kind == LayerKind::convolution || d.kind == LayerKind::linear)
      incoming = d.out_channels;
  };

  size_t i = 0;
  while (i < layers.size()) {
    if (!layers[i].skip_start) {
      if (kept[i]) append_plain(i);
      ++i;
      continue;
    }

    // Residual block span [i .. end].
    size_t end = i;
    while (end < layers.size() && !layers[end].skip_end) ++end;
    if (end == layers.size())
      throw std::invalid_argument("skip_start without matching skip_end");

    int block_in = incoming;
    int block_out_teacher = 0;
    for (size_t j = i; j <= end; ++j)
      if (layers[j].kind == LayerKind::convolution) block_out_teacher = layers[j].out_channels;

    std::vector<size_t> kept_in_block;
    bool kept_conv = false, spatial_change = false;
    for (size_t j = i; j <= end; ++j) {
      if (!kept[j]) continue;
      kept_in_block.push_back(j);
      if (layers[j].kind == LayerKind::convolution) {
        kept_conv = true;
        // out = in + 2p - k + 1 at stride 1, so shape-preserving iff 2p == k-1
        if (layers[j].stride != 1 || 2 * layers[j].padding != layers[j].kernel_size - 1)
          spatial_change = true;
      } else if (layers[j].kind == LayerKind::pooling) {
        spatial_change = true;
      }
    }

    if (!kept_conv) {
      // Fully emptied block: identity when widths line up, otherwise a 1x1
      // projection that restores the teacher's downstream width.
      if (incoming != block_out_teacher) {
        LayerDescriptor proj;
        proj.kind = LayerKind::convolution;
        proj.kernel_size = 1;
        proj.stride = 1;
        proj.padding = 0;
        proj.out_channels = block_out_teacher;
        proj.removable = true;
        append(proj);
        incoming = block_out_teacher;
      }
      for (size_t j : kept_in_block)
        if (layers[j].kind != LayerKind::convolution) append_plain(j);
      i = end + 1;
      continue;
    }

    int block_out = 0;
    size_t first_conv = layers.size(), last_conv = 0;
    for (size_t j : kept_in_block) {
      if (layers[j].kind != LayerKind::convolution) continue;
      if (first_conv == layers.size()) first_conv = j;
      last_conv = j;
      block_out = layers[j].out_channels;
    }
    // The residual add is only kept when it stays shape-sound.
    bool keep_skip = (block_out == block_in) && !spatial_change;

    for (size_t j : kept_in_block) {
      LayerDescriptor d = layers[j];
      d.skip_start = keep_skip && j == first_conv;
      d.skip_end = keep_skip && j == last_conv;
      append(d);
      if (d.kind == LayerKind::convolution || d.kind == LayerKind::linear)
        incoming = d.out_channels;
    }
    i = end + 1;
  }

  return out;
}

Eigen::MatrixXd encode_architecture(const ArchitectureSpec& arch) {
  PolicyEncoding full = encode_policy_context(arch);
  Eigen::MatrixXd rows(full.action_rows.size(), kEncodingWidth);
  for (size_t r = 0; r < full.action_rows.size(); ++r)
    rows.row(static_cast<int>(r)) = full.rows.row(full.action_rows[r]);
  return rows;
}

PolicyEncoding encode_policy_context(const ArchitectureSpec& arch) {
  const double total = static_cast<double>(arch.layers.size());
  const double max_ch = static_cast<double>(std::max(1, max_conv_channels(arch)));
  PolicyEncoding enc;
  enc.rows.resize(static_cast<int>(arch.layers.size()), kEncodingWidth);
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    enc.rows(i, 0) = static_cast<double>(l.index) / total;
    enc.rows(i, 1) = static_cast<double>(l.kernel_size);
    enc.rows(i, 2) = static_cast<double>(l.stride);
    enc.rows(i, 3) = static_cast<double>(l.padding);
    enc.rows(i, 4) = static_cast<double>(l.out_channels) / max_ch;
    enc.rows(i, 5) = l.skip_start ? 1.0 : 0.0;
    enc.rows(i, 6) = l.skip_end ? 1.0 : 0.0;
    if (l.removable) enc.action_rows.push_back(static_cast<int>(i));
  }
  return enc;
}

long long count_parameters(const ArchitectureSpec& arch) {
  auto shapes = compute_shapes(arch);
  long long total = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    const auto& s = shapes[i];
    if (l.kind == LayerKind::convolution) {
      long long k = l.kernel_size;
      total += k * k * s.in_channels * l.out_channels + l.out_channels;
    } else if (l.kind == LayerKind::linear) {
      total += static_cast<long long>(s.in_channels) * l.out_channels + l.out_channels;
    }
  }
  return total;
}

ValidationReport validate(const ArchitectureSpec& arch) {
  ValidationReport rep;
  auto fail = [&rep](std::string msg) {
    rep.ok = false;
    rep.violations.push_back(std::move(msg));
  };

  if (arch.num_classes < 2) fail("num_classes must be >= 2");
  if (arch.input_shape.channels < 1 || arch.input_shape.height < 1 || arch.input_shape.width < 1)
    fail("input shape dimensions must be >= 1");
  if (arch.layers.empty()) {
    fail("at least one convolution layer present");
    return rep;
  }

  int conv_count = 0, flatten_count = 0;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.index != static_cast<int>(i)) fail("layer indices must be 0..n-1 in listed order");
    switch (l.kind) {
      case LayerKind::convolution:
        ++conv_count;
        if (l.kernel_size < 1 || l.stride < 1 || l.out_channels < 1)
          fail("convolution kernel_size, stride and out_channels must be >= 1 (layer " +
               std::to_string(i) + ")");
        if (l.padding < 0) fail("padding must be >= 0 (layer " + std::to_string(i) + ")");
        break;
      case LayerKind::pooling:
        if (l.kernel_size < 1 || l.stride < 1)
          fail("pooling kernel_size and stride must be >= 1 (layer " + std::to_string(i) + ")");
        if (l.removable) fail("pooling layers are never removable (layer " + std::to_string(i) + ")");
        break;
      case LayerKind::flatten:
        ++flatten_count;
        if (l.kernel_size != 0 || l.stride != 0 || l.padding != 0)
          fail("flatten must have kernel_size = stride = padding = 0 (layer " + std::to_string(i) + ")");
        if (l.removable) fail("flatten layers are never removable (layer " + std::to_string(i) + ")");
        break;
      case LayerKind::linear:
        if (l.kernel_size != 0 || l.stride != 0 || l.padding != 0)
          fail("linear must have kernel_size = stride = padding = 0 (layer " + std::to_string(i) + ")");
        if (l.out_channels < 1) fail("linear out_channels must be >= 1 (layer " + std::to_string(i) + ")");
        if (l.removable) fail("the linear classifier is never removable (layer " + std::to_string(i) + ")");
        break;
    }
    if (l.removable && l.kind != LayerKind::convolution)
      fail("removable is true only for kind = convolution (layer " + std::to_string(i) + ")");
    if ((l.skip_start || l.skip_end) && arch.family != Family::residual)
      fail("skip flags require the residual family (layer " + std::to_string(i) + ")");
    if ((l.skip_start || l.skip_end) && l.kind != LayerKind::convolution)
      fail("skip flags may only be set on convolutions (layer " + std::to_string(i) + ")");
  }

  if (conv_count == 0) fail("at least one convolution layer present");
  if (flatten_count > 1) fail("at most one flatten layer");

  const auto& last = arch.layers.back();
  if (last.kind != LayerKind::linear || last.out_channels != arch.num_classes)
    fail("exactly one final linear layer with out_channels = num_classes");
  for (size_t i = 0; i + 1 < arch.layers.size(); ++i)
    if (arch.layers[i].kind == LayerKind::linear && arch.layers[i].out_channels == arch.num_classes)
      fail("classifier-width linear layer must be final");

  // Skip pairing: non-nested spans, each skip_start closed by a later
  // skip_end (a single layer may carry both flags).
  bool open = false;
  for (size_t i = 0; i < arch.layers.size(); ++i) {
    const auto& l = arch.layers[i];
    if (l.skip_start) {
      if (open) fail("nested or overlapping residual blocks (layer " + std::to_string(i) + ")");
      open = true;
    }
    if (l.skip_end) {
      if (!open) fail("skip_end without preceding skip_start (layer " + std::to_string(i) + ")");
      open = false;
    }
  }
  if (open) fail("every skip_start has a matching later skip_end");

  // Shape walk: spatial collapse, flatten/linear ordering, residual add
  // soundness (equal channels and spatial dims at the block boundary).
  try {
    auto shapes = compute_shapes(arch);
    std::ptrdiff_t span_start = -1;
    for (size_t i = 0; i < arch.layers.size(); ++i) {
      if (arch.layers[i].skip_start) span_start = static_cast<std::ptrdiff_t>(i);
      if (arch.layers[i].skip_end && span_start >= 0) {
        const size_t start = static_cast<size_t>(span_start);
        const LayerShape& out = shapes[i];
        int in_c = shapes[start].in_channels;
        int in_h = start == 0 ? arch.input_shape.height : shapes[start - 1].height;
        int in_w = start == 0 ? arch.input_shape.width : shapes[start - 1].width;
        if (out.channels != in_c || out.height != in_h || out.width != in_w)
          fail("residual add requires equal shapes at skip endpoints (layers " +
               std::to_string(start) + ".." + std::to_string(i) + ")");
        span_start = -1;
      }
    }
  } catch (const std::invalid_argument& e) {
    std::string what = e.what();
    if (what.find("collapse") != std::string::npos)
      fail("spatial dimensions must remain >= 1 throughout the network");
    else
      fail(what);
  }

  return rep;
}

}  // namespace ddc
