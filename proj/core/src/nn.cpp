// SPDX-License-Identifier: Apache-2.0
#include "ddc/nn.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "ddc/rng.hpp"

namespace ddc {

namespace {

// Gather table mapping im2col cells to source offsets within one image
// column (-1 = zero padding). Rows: ci*k*k + ky*k + kx; cols: oy*out_w + ox.
std::vector<int> build_gather(const Model::Conv& cv) {
  std::vector<int> g(static_cast<size_t>(cv.in_c * cv.k * cv.k) * cv.out_h * cv.out_w, -1);
  const int positions = cv.out_h * cv.out_w;
  for (int ci = 0; ci < cv.in_c; ++ci) {
    for (int ky = 0; ky < cv.k; ++ky) {
      for (int kx = 0; kx < cv.k; ++kx) {
        const int row = (ci * cv.k + ky) * cv.k + kx;
        for (int oy = 0; oy < cv.out_h; ++oy) {
          const int iy = oy * cv.s - cv.p + ky;
          if (iy < 0 || iy >= cv.in_h) continue;
          for (int ox = 0; ox < cv.out_w; ++ox) {
            const int ix = ox * cv.s - cv.p + kx;
            if (ix < 0 || ix >= cv.in_w) continue;
            g[static_cast<size_t>(row) * positions + oy * cv.out_w + ox] =
                (ci * cv.in_h + iy) * cv.in_w + ix;
          }
        }
      }
    }
  }
  return g;
}

// X: (C*H*W) x B activation -> cols: (in_c*k*k) x (B*positions).
void im2col(const Model::Conv& cv, const Eigen::MatrixXd& x, Eigen::MatrixXd& cols) {
  const int rows = cv.in_c * cv.k * cv.k;
  const int positions = cv.out_h * cv.out_w;
  const int batch = static_cast<int>(x.cols());
  cols.resize(rows, static_cast<Eigen::Index>(batch) * positions);
  for (int img = 0; img < batch; ++img) {
    const double* src = x.col(img).data();
    for (int r = 0; r < rows; ++r) {
      const int* gi = cv.gather.data() + static_cast<size_t>(r) * positions;
      double* dst = &cols(r, static_cast<Eigen::Index>(img) * positions);
      // column-major: walking a row means striding; write via coeffRef loop
      for (int c = 0; c < positions; ++c)
        dst[static_cast<size_t>(c) * rows] = gi[c] >= 0 ? src[gi[c]] : 0.0;
    }
  }
}

// Scatter-add transpose of im2col.
void col2im(const Model::Conv& cv, const Eigen::MatrixXd& dcols, Eigen::MatrixXd& dx) {
  const int rows = cv.in_c * cv.k * cv.k;
  const int positions = cv.out_h * cv.out_w;
  const int batch = static_cast<int>(dx.cols());
  for (int img = 0; img < batch; ++img) {
    double* dst = dx.col(img).data();
    for (int r = 0; r < rows; ++r) {
      const int* gi = cv.gather.data() + static_cast<size_t>(r) * positions;
      const double* src = &dcols(r, static_cast<Eigen::Index>(img) * positions);
      for (int c = 0; c < positions; ++c)
        if (gi[c] >= 0) dst[gi[c]] += src[static_cast<size_t>(c) * rows];
    }
  }
}

// (out_c x B*positions) sheet -> activation layout (out_c*positions x B).
Eigen::MatrixXd sheet_to_act(const Eigen::MatrixXd& sheet, int out_c, int positions, int batch) {
  Eigen::MatrixXd act(static_cast<Eigen::Index>(out_c) * positions, batch);
  for (int img = 0; img < batch; ++img)
    for (int c = 0; c < out_c; ++c)
      act.col(img).segment(static_cast<Eigen::Index>(c) * positions, positions) =
          sheet.row(c).segment(static_cast<Eigen::Index>(img) * positions, positions).transpose();
  return act;
}

Eigen::MatrixXd act_to_sheet(const Eigen::MatrixXd& act, int out_c, int positions, int batch) {
  Eigen::MatrixXd sheet(out_c, static_cast<Eigen::Index>(batch) * positions);
  for (int img = 0; img < batch; ++img)
    for (int c = 0; c < out_c; ++c)
      sheet.row(c).segment(static_cast<Eigen::Index>(img) * positions, positions) =
          act.col(img).segment(static_cast<Eigen::Index>(c) * positions, positions).transpose();
  return sheet;
}

void he_uniform(Eigen::MatrixXd& w, int fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = uniform_range(rng, -bound, bound);
}

}  // namespace

Model Model::instantiate(const ArchitectureSpec& spec, std::uint64_t seed) {
  ValidationReport rep = validate(spec);
  if (!rep.ok)
    throw std::invalid_argument("invalid architecture: " + rep.violations.front());

  Model m;
  m.spec_ = spec;
  auto shapes = compute_shapes(spec);
  std::mt19937_64 rng(seed);

  // Pair skip endpoints: stash the input of the skip_start layer, add it at
  // the skip_end layer's pre-activation.
  std::vector<int> skip_from(spec.layers.size(), -1);
  {
    int open = -1;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
      if (spec.layers[i].skip_start) open = static_cast<int>(i);
      if (spec.layers[i].skip_end) {
        skip_from[i] = open;
        open = -1;
      }
    }
  }

  int in_c = spec.input_shape.channels, in_h = spec.input_shape.height,
      in_w = spec.input_shape.width;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& s = shapes[i];
    switch (l.kind) {
      case LayerKind::convolution: {
        Conv cv;
        cv.k = l.kernel_size;
        cv.s = l.stride;
        cv.p = l.padding;
        cv.in_c = in_c;
        cv.in_h = in_h;
        cv.in_w = in_w;
        cv.out_c = l.out_channels;
        cv.out_h = s.height;
        cv.out_w = s.width;
        cv.relu = true;
        cv.skip_save = l.skip_start;
        cv.skip_from = skip_from[i];
        cv.W.resize(cv.out_c, cv.in_c * cv.k * cv.k);
        he_uniform(cv.W, cv.in_c * cv.k * cv.k, rng);
        cv.b = Eigen::VectorXd::Zero(cv.out_c);
        cv.gather = build_gather(cv);
        m.layers_.emplace_back(std::move(cv));
        break;
      }
      case LayerKind::pooling: {
        Pool pl;
        pl.k = l.kernel_size;
        pl.s = l.stride;
        pl.c = in_c;
        pl.in_h = in_h;
        pl.in_w = in_w;
        pl.out_h = s.height;
        pl.out_w = s.width;
        m.layers_.emplace_back(pl);
        break;
      }
      case LayerKind::flatten: {
        m.layers_.emplace_back(Flatten{s.channels});
        break;
      }
      case LayerKind::linear: {
        Linear ln;
        ln.in_w = s.in_channels;
        ln.out_w = l.out_channels;
        ln.relu = i + 1 < spec.layers.size();  // hidden linears get an activation
        ln.W.resize(ln.out_w, ln.in_w);
        he_uniform(ln.W, ln.in_w, rng);
        ln.b = Eigen::VectorXd::Zero(ln.out_w);
        m.layers_.emplace_back(std::move(ln));
        break;
      }
    }
    in_c = s.channels;
    in_h = s.height;
    in_w = s.width;
  }
  return m;
}

int Model::input_size() const {
  return spec_.input_shape.channels * spec_.input_shape.height * spec_.input_shape.width;
}

long long Model::parameter_count() const {
  long long n = 0;
  for (const auto& layer : layers_) {
    if (const auto* cv = std::get_if<Conv>(&layer)) n += cv->W.size() + cv->b.size();
    if (const auto* ln = std::get_if<Linear>(&layer)) n += ln->W.size() + ln->b.size();
  }
  return n;
}

Eigen::MatrixXd Model::forward(const Eigen::MatrixXd& input) const {
  Cache cache;
  return forward_train(input, cache);
}

Eigen::MatrixXd Model::forward_train(const Eigen::MatrixXd& input, Cache& cache) const {
  if (input.rows() != input_size())
    throw std::invalid_argument("input feature size mismatch");
  const int batch = static_cast<int>(input.cols());

  cache.acts.assign(1, input);
  cache.acts.reserve(layers_.size() + 1);
  cache.pool_src.assign(layers_.size(), Eigen::MatrixXi());

  Eigen::MatrixXd cols;
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Eigen::MatrixXd& x = cache.acts.back();
    if (const auto* cv = std::get_if<Conv>(&layers_[i])) {
      const int positions = cv->out_h * cv->out_w;
      im2col(*cv, x, cols);
      Eigen::MatrixXd sheet = cv->W * cols;
      sheet.colwise() += cv->b;
      Eigen::MatrixXd y = sheet_to_act(sheet, cv->out_c, positions, batch);
      if (cv->skip_from >= 0) y += cache.acts[cv->skip_from];
      if (cv->relu) y = y.cwiseMax(0.0);
      cache.acts.push_back(std::move(y));
    } else if (const auto* pl = std::get_if<Pool>(&layers_[i])) {
      const int positions = pl->out_h * pl->out_w;
      Eigen::MatrixXd y(static_cast<Eigen::Index>(pl->c) * positions, batch);
      Eigen::MatrixXi src(static_cast<Eigen::Index>(pl->c) * positions, batch);
      for (int img = 0; img < batch; ++img) {
        const double* xp = x.col(img).data();
        for (int c = 0; c < pl->c; ++c) {
          const int base = c * pl->in_h * pl->in_w;
          for (int oy = 0; oy < pl->out_h; ++oy) {
            for (int ox = 0; ox < pl->out_w; ++ox) {
              double best = -std::numeric_limits<double>::infinity();
              int best_idx = -1;
              for (int ky = 0; ky < pl->k; ++ky) {
                const int iy = oy * pl->s + ky;
                if (iy >= pl->in_h) break;
                for (int kx = 0; kx < pl->k; ++kx) {
                  const int ix = ox * pl->s + kx;
                  if (ix >= pl->in_w) break;
                  const int idx = base + iy * pl->in_w + ix;
                  if (xp[idx] > best) {
                    best = xp[idx];
                    best_idx = idx;
                  }
                }
              }
              const int out_idx = (c * pl->out_h + oy) * pl->out_w + ox;
              y(out_idx, img) = best;
              src(out_idx, img) = best_idx;
            }
          }
        }
      }
      cache.pool_src[i] = std::move(src);
      cache.acts.push_back(std::move(y));
    } else if (std::holds_alternative<Flatten>(layers_[i])) {
      cache.acts.push_back(x);  // layout is already flat
    } else {
      const auto& ln = std::get<Linear>(layers_[i]);
      Eigen::MatrixXd y = ln.W * x;
      y.colwise() += ln.b;
      if (ln.relu) y = y.cwiseMax(0.0);
      cache.acts.push_back(std::move(y));
    }
  }
  return cache.acts.back();
}

Model::Gradients Model::zero_gradients() const {
  Gradients g;
  g.dW.resize(layers_.size());
  g.db.resize(layers_.size());
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* cv = std::get_if<Conv>(&layers_[i])) {
      g.dW[i] = Eigen::MatrixXd::Zero(cv->W.rows(), cv->W.cols());
      g.db[i] = Eigen::VectorXd::Zero(cv->b.size());
    } else if (const auto* ln = std::get_if<Linear>(&layers_[i])) {
      g.dW[i] = Eigen::MatrixXd::Zero(ln->W.rows(), ln->W.cols());
      g.db[i] = Eigen::VectorXd::Zero(ln->b.size());
    }
  }
  return g;
}

void Model::backward(const Cache& cache, const Eigen::MatrixXd& dlogits, Gradients& grads,
                     const ActivationProbe& probe) const {
  const int batch = static_cast<int>(dlogits.cols());
  Eigen::MatrixXd d = dlogits;
  // Residual shortcut gradients waiting to be added once the backward pass
  // reaches the layer whose input the shortcut taps.
  std::vector<Eigen::MatrixXd> pending(layers_.size());

  Eigen::MatrixXd cols;
  for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
    const Eigen::MatrixXd& x = cache.acts[i];
    const Eigen::MatrixXd& y = cache.acts[i + 1];
    if (const auto* cv = std::get_if<Conv>(&layers_[i])) {
      if (probe) probe(i, y, d);
      if (cv->relu) d = d.cwiseProduct((y.array() > 0.0).cast<double>().matrix());
      if (cv->skip_from >= 0) pending[cv->skip_from] = d;  // dAdd flows to the stash too
      const int positions = cv->out_h * cv->out_w;
      Eigen::MatrixXd dsheet = act_to_sheet(d, cv->out_c, positions, batch);
      im2col(*cv, x, cols);
      grads.dW[i].noalias() += dsheet * cols.transpose();
      grads.db[i] += dsheet.rowwise().sum();
      Eigen::MatrixXd dcols = cv->W.transpose() * dsheet;
      d = Eigen::MatrixXd::Zero(x.rows(), batch);
      col2im(*cv, dcols, d);
    } else if (const auto* pl = std::get_if<Pool>(&layers_[i])) {
      const Eigen::MatrixXi& src = cache.pool_src[i];
      Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(x.rows(), batch);
      for (int img = 0; img < batch; ++img)
        for (Eigen::Index o = 0; o < src.rows(); ++o) dx(src(o, img), img) += d(o, img);
      d = std::move(dx);
      (void)pl;
    } else if (std::holds_alternative<Flatten>(layers_[i])) {
      // identity
    } else {
      const auto& ln = std::get<Linear>(layers_[i]);
      if (ln.relu) d = d.cwiseProduct((y.array() > 0.0).cast<double>().matrix());
      grads.dW[i].noalias() += d * x.transpose();
      grads.db[i] += d.rowwise().sum();
      d = ln.W.transpose() * d;
    }
    if (pending[i].size() > 0) d += pending[i];
  }
}

void Model::apply_sgd(const Gradients& grads, Gradients& velocity, double lr, double momentum) {
  if (velocity.dW.empty()) velocity = zero_gradients();
  for (size_t i = 0; i < layers_.size(); ++i) {
    if (grads.dW[i].size() == 0) continue;
    velocity.dW[i] = momentum * velocity.dW[i] + grads.dW[i];
    velocity.db[i] = momentum * velocity.db[i] + grads.db[i];
    if (auto* cv = std::get_if<Conv>(&layers_[i])) {
      cv->W -= lr * velocity.dW[i];
      cv->b -= lr * velocity.db[i];
    } else if (auto* ln = std::get_if<Linear>(&layers_[i])) {
      ln->W -= lr * velocity.dW[i];
      ln->b -= lr * velocity.db[i];
    }
  }
}

using nlohmann::json;

void save_model_weights(const Model& model, const std::filesystem::path& file) {
  json j;
  j["format"] = "ddc-weights-v1";
  j["layers"] = json::array();
  for (size_t i = 0; i < model.layers().size(); ++i) {
    const Eigen::MatrixXd* w = nullptr;
    const Eigen::VectorXd* b = nullptr;
    if (const auto* cv = std::get_if<Model::Conv>(&model.layers()[i])) {
      w = &cv->W;
      b = &cv->b;
    } else if (const auto* ln = std::get_if<Model::Linear>(&model.layers()[i])) {
      w = &ln->W;
      b = &ln->b;
    }
    if (!w) continue;
    std::vector<double> wv(w->data(), w->data() + w->size());
    std::vector<double> bv(b->data(), b->data() + b->size());
    j["layers"].push_back({{"index", i},
                           {"rows", w->rows()},
                           {"cols", w->cols()},
                           {"W", std::move(wv)},
                           {"b", std::move(bv)}});
  }
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump();
}

Model load_model_weights(const ArchitectureSpec& spec, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  json j = json::parse(in);
  if (j.at("format").get<std::string>() != "ddc-weights-v1")
    throw std::runtime_error("unknown weight file format");

  Model model = Model::instantiate(spec, 0);
  for (const auto& jl : j.at("layers")) {
    const size_t idx = jl.at("index").get<size_t>();
    if (idx >= model.layers().size()) throw std::runtime_error("weight layer index out of range");
    Eigen::MatrixXd* w = nullptr;
    Eigen::VectorXd* b = nullptr;
    if (auto* cv = std::get_if<Model::Conv>(&model.layers()[idx])) {
      w = &cv->W;
      b = &cv->b;
    } else if (auto* ln = std::get_if<Model::Linear>(&model.layers()[idx])) {
      w = &ln->W;
      b = &ln->b;
    }
    if (!w) throw std::runtime_error("weights assigned to a parameter-free layer");
    const auto wv = jl.at("W").get<std::vector<double>>();
    const auto bv = jl.at("b").get<std::vector<double>>();
    if (jl.at("rows").get<Eigen::Index>() != w->rows() ||
        jl.at("cols").get<Eigen::Index>() != w->cols() ||
        static_cast<Eigen::Index>(wv.size()) != w->size() ||
        static_cast<Eigen::Index>(bv.size()) != b->size())
      throw std::runtime_error("weight shape mismatch at layer " + std::to_string(idx));
    std::copy(wv.begin(), wv.end(), w->data());
    std::copy(bv.begin(), bv.end(), b->data());
  }
  return model;
}

}  // namespace ddc
