// SPDX-License-Identifier: Apache-2.0
#include "ddc/policy.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "ddc/rng.hpp"

namespace ddc {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large |x|.
double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

struct StepState {
  Eigen::VectorXd i, f, g, o;  // gate activations
  Eigen::VectorXd c, tanh_c, h;
};

// Runs one direction over the given visit order; states indexed by visit step.
std::vector<StepState> run_direction(const LstmCell& cell, const Eigen::MatrixXd& enc,
                                     const std::vector<int>& order, int hidden) {
  std::vector<StepState> states(order.size());
  Eigen::VectorXd h = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd xin(enc.cols() + hidden);
  for (size_t t = 0; t < order.size(); ++t) {
    xin << enc.row(order[t]).transpose(), h;
    Eigen::VectorXd pre = cell.W * xin + cell.b;
    StepState& s = states[t];
    s.i = pre.segment(0, hidden).unaryExpr([](double v) { return sigmoid(v); });
    s.f = pre.segment(hidden, hidden).unaryExpr([](double v) { return sigmoid(v); });
    s.g = pre.segment(2 * hidden, hidden).array().tanh();
    s.o = pre.segment(3 * hidden, hidden).unaryExpr([](double v) { return sigmoid(v); });
    s.c = s.f.cwiseProduct(c) + s.i.cwiseProduct(s.g);
    s.tanh_c = s.c.array().tanh();
    s.h = s.o.cwiseProduct(s.tanh_c);
    h = s.h;
    c = s.c;
  }
  return states;
}

// Backpropagates through one direction. dh[t] are the gradients flowing into
// h at visit step t from the action heads; returns gradient w.r.t. the
// encoding rows (added into denc) and accumulates cell gradients.
void backprop_direction(const LstmCell& cell, const Eigen::MatrixXd& enc,
                        const std::vector<int>& order, int hidden,
                        const std::vector<StepState>& states,
                        std::vector<Eigen::VectorXd>& dh_in, LstmCell& dcell) {
  const int input_width = static_cast<int>(enc.cols());
  Eigen::VectorXd dh = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd dc = Eigen::VectorXd::Zero(hidden);
  Eigen::VectorXd xin(input_width + hidden);
  Eigen::VectorXd dpre(4 * hidden);
  for (int t = static_cast<int>(order.size()) - 1; t >= 0; --t) {
    const StepState& s = states[static_cast<size_t>(t)];
    dh += dh_in[static_cast<size_t>(t)];
    Eigen::VectorXd do_ = dh.cwiseProduct(s.tanh_c);
    dc += dh.cwiseProduct(s.o).cwiseProduct(
        (1.0 - s.tanh_c.array().square()).matrix());
    const Eigen::VectorXd c_prev =
        t > 0 ? states[static_cast<size_t>(t) - 1].c : Eigen::VectorXd::Zero(hidden);
    const Eigen::VectorXd h_prev =
        t > 0 ? states[static_cast<size_t>(t) - 1].h : Eigen::VectorXd::Zero(hidden);
    Eigen::VectorXd di = dc.cwiseProduct(s.g);
    Eigen::VectorXd df = dc.cwiseProduct(c_prev);
    Eigen::VectorXd dg = dc.cwiseProduct(s.i);
    dpre.segment(0, hidden) = di.cwiseProduct(s.i).cwiseProduct((1.0 - s.i.array()).matrix());
    dpre.segment(hidden, hidden) = df.cwiseProduct(s.f).cwiseProduct((1.0 - s.f.array()).matrix());
    dpre.segment(2 * hidden, hidden) = dg.cwiseProduct((1.0 - s.g.array().square()).matrix());
    dpre.segment(3 * hidden, hidden) = do_.cwiseProduct(s.o).cwiseProduct((1.0 - s.o.array()).matrix());
    xin << enc.row(order[static_cast<size_t>(t)]).transpose(), h_prev;
    dcell.W.noalias() += dpre * xin.transpose();
    dcell.b += dpre;
    Eigen::VectorXd dxin = cell.W.transpose() * dpre;
    dh = dxin.segment(input_width, hidden);
    dc = dc.cwiseProduct(s.f);
  }
}

std::vector<int> forward_order(int rows) {
  std::vector<int> order(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) order[static_cast<size_t>(i)] = i;
  return order;
}

std::vector<int> backward_order(int rows) {
  std::vector<int> order(static_cast<size_t>(rows));
  for (int i = 0; i < rows; ++i) order[static_cast<size_t>(i)] = rows - 1 - i;
  return order;
}

std::vector<int> resolve_action_rows(const Eigen::MatrixXd& enc, const std::vector<int>& rows) {
  if (!rows.empty()) return rows;
  return forward_order(static_cast<int>(enc.rows()));
}

void check_encoding(const PolicyParameters& params, const Eigen::MatrixXd& enc) {
  if (enc.rows() == 0) throw std::invalid_argument("empty encoding");
  if (enc.cols() != params.input_width)
    throw std::invalid_argument("encoding width does not match policy input_width");
}

// Logit per action row, with the per-direction states kept for backprop.
struct ForwardPass {
  std::vector<StepState> fwd, bwd;
  std::vector<double> logits;
};

ForwardPass policy_forward(const PolicyParameters& params, const Eigen::MatrixXd& enc,
                           const std::vector<int>& action_rows) {
  const int rows = static_cast<int>(enc.rows());
  const int hidden = params.hidden_width;
  ForwardPass pass;
  pass.fwd = run_direction(params.fwd, enc, forward_order(rows), hidden);
  pass.bwd = run_direction(params.bwd, enc, backward_order(rows), hidden);
  pass.logits.reserve(action_rows.size());
  for (int row : action_rows) {
    if (row < 0 || row >= rows) throw std::invalid_argument("action row out of range");
    // backward direction visits row r at step rows-1-r
    const Eigen::VectorXd& hf = pass.fwd[static_cast<size_t>(row)].h;
    const Eigen::VectorXd& hb = pass.bwd[static_cast<size_t>(rows - 1 - row)].h;
    double z = params.head_b;
    z += params.head_w.segment(0, hidden).dot(hf);
    z += params.head_w.segment(hidden, hidden).dot(hb);
    z += params.head_w.segment(2 * hidden, params.input_width).dot(enc.row(row));
    pass.logits.push_back(z);
  }
  return pass;
}

}  // namespace

PolicyGradients zero_gradients(const PolicyParameters& params) {
  PolicyGradients g;
  g.fwd.W = Eigen::MatrixXd::Zero(params.fwd.W.rows(), params.fwd.W.cols());
  g.fwd.b = Eigen::VectorXd::Zero(params.fwd.b.size());
  g.bwd.W = Eigen::MatrixXd::Zero(params.bwd.W.rows(), params.bwd.W.cols());
  g.bwd.b = Eigen::VectorXd::Zero(params.bwd.b.size());
  g.head_w = Eigen::VectorXd::Zero(params.head_w.size());
  g.head_b = 0.0;
  return g;
}

PolicyParameters init_policy(int input_width, int hidden_width, std::uint64_t seed,
                             double head_bias) {
  if (input_width < 1 || hidden_width < 1)
    throw std::invalid_argument("policy widths must be >= 1");
  PolicyParameters p;
  p.input_width = input_width;
  p.hidden_width = hidden_width;
  std::mt19937_64 rng(seed);
  const int fan_in = input_width + hidden_width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  auto init_cell = [&](LstmCell& cell) {
    cell.W.resize(4 * hidden_width, fan_in);
    for (Eigen::Index j = 0; j < cell.W.cols(); ++j)
      for (Eigen::Index i = 0; i < cell.W.rows(); ++i)
        cell.W(i, j) = uniform_range(rng, -bound, bound);
    cell.b = Eigen::VectorXd::Zero(4 * hidden_width);
  };
  init_cell(p.fwd);
  init_cell(p.bwd);
  const int head_in = 2 * hidden_width + input_width;
  p.head_w.resize(head_in);
  const double hb = 1.0 / std::sqrt(static_cast<double>(head_in));
  for (int i = 0; i < head_in; ++i) p.head_w(i) = uniform_range(rng, -hb, hb);
  p.head_b = head_bias;
  return p;
}

std::vector<double> action_probabilities(const PolicyParameters& params,
                                         const Eigen::MatrixXd& encoding,
                                         const std::vector<int>& action_rows) {
  check_encoding(params, encoding);
  const auto rows = resolve_action_rows(encoding, action_rows);
  ForwardPass pass = policy_forward(params, encoding, rows);
  std::vector<double> probs(pass.logits.size());
  for (size_t i = 0; i < probs.size(); ++i) probs[i] = sigmoid(pass.logits[i]);
  return probs;
}

std::vector<Trajectory> sample_trajectories(const PolicyParameters& params,
                                            const Eigen::MatrixXd& encoding,
                                            const std::vector<int>& action_rows, int count,
                                            std::mt19937_64& rng) {
  if (count < 1) throw std::invalid_argument("trajectory count must be >= 1");
  check_encoding(params, encoding);
  const auto rows = resolve_action_rows(encoding, action_rows);
  ForwardPass pass = policy_forward(params, encoding, rows);

  std::vector<Trajectory> out(static_cast<size_t>(count));
  for (auto& traj : out) {
    traj.actions.actions.resize(rows.size());
    traj.step_log_probs.resize(rows.size());
    for (size_t t = 0; t < rows.size(); ++t) {
      const double z = pass.logits[t];
      const double keep_p = sigmoid(z);
      const bool keep = uniform01(rng) < keep_p;
      traj.actions.actions[t] = keep ? 1 : 0;
      traj.step_log_probs[t] = keep ? log_sigmoid(z) : log_sigmoid(-z);
    }
  }
  return out;
}

double trajectory_log_prob(const PolicyParameters& params, const Eigen::MatrixXd& encoding,
                           const std::vector<int>& action_rows, const ActionVector& actions) {
  check_encoding(params, encoding);
  const auto rows = resolve_action_rows(encoding, action_rows);
  if (actions.actions.size() != rows.size())
    throw std::invalid_argument("action vector length does not match action rows");
  ForwardPass pass = policy_forward(params, encoding, rows);
  double total = 0.0;
  for (size_t t = 0; t < rows.size(); ++t)
    total += actions.actions[t] ? log_sigmoid(pass.logits[t]) : log_sigmoid(-pass.logits[t]);
  return total;
}

double accumulate_log_prob_gradient(const PolicyParameters& params,
                                    const Eigen::MatrixXd& encoding,
                                    const std::vector<int>& action_rows,
                                    const ActionVector& actions, double coeff,
                                    PolicyGradients& grads) {
  check_encoding(params, encoding);
  const auto rows = resolve_action_rows(encoding, action_rows);
  if (actions.actions.size() != rows.size())
    throw std::invalid_argument("action vector length does not match action rows");

  const int n_rows = static_cast<int>(encoding.rows());
  const int hidden = params.hidden_width;
  ForwardPass pass = policy_forward(params, encoding, rows);

  double total = 0.0;
  // d(log p)/d(logit) = a - sigmoid(logit); head gradients are direct,
  // state gradients are collected per step then pushed through both
  // recurrences.
  std::vector<Eigen::VectorXd> dh_fwd(static_cast<size_t>(n_rows),
                                      Eigen::VectorXd::Zero(hidden));
  std::vector<Eigen::VectorXd> dh_bwd(static_cast<size_t>(n_rows),
                                      Eigen::VectorXd::Zero(hidden));
  for (size_t t = 0; t < rows.size(); ++t) {
    const int row = rows[t];
    const double z = pass.logits[t];
    const double p = sigmoid(z);
    const double a = actions.actions[t] ? 1.0 : 0.0;
    total += actions.actions[t] ? log_sigmoid(z) : log_sigmoid(-z);
    const double dz = coeff * (a - p);
    const Eigen::VectorXd& hf = pass.fwd[static_cast<size_t>(row)].h;
    const Eigen::VectorXd& hb = pass.bwd[static_cast<size_t>(n_rows - 1 - row)].h;
    grads.head_w.segment(0, hidden) += dz * hf;
    grads.head_w.segment(hidden, hidden) += dz * hb;
    grads.head_w.segment(2 * hidden, params.input_width) += dz * encoding.row(row).transpose();
    grads.head_b += dz;
    dh_fwd[static_cast<size_t>(row)] += dz * params.head_w.segment(0, hidden);
    dh_bwd[static_cast<size_t>(n_rows - 1 - row)] += dz * params.head_w.segment(hidden, hidden);
  }

  backprop_direction(params.fwd, encoding, forward_order(n_rows), hidden, pass.fwd, dh_fwd,
                     grads.fwd);
  backprop_direction(params.bwd, encoding, backward_order(n_rows), hidden, pass.bwd, dh_bwd,
                     grads.bwd);
  return total;
}

using nlohmann::json;

namespace {

json tensor_to_json(const Eigen::MatrixXd& m) {
  return json{{"rows", m.rows()},
              {"cols", m.cols()},
              {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Eigen::MatrixXd tensor_from_json(const json& j) {
  Eigen::MatrixXd m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
  auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != m.size())
    throw std::runtime_error("checkpoint tensor size mismatch");
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& file) {
  json j;
  j["format"] = "ddc-policy-v1";
  j["input_width"] = ckpt.params.input_width;
  j["hidden_width"] = ckpt.params.hidden_width;
  j["iteration"] = ckpt.iteration;
  j["num_encoding_rows"] = ckpt.num_encoding_rows;
  j["num_actions"] = ckpt.num_actions;
  j["baseline"] = {{"value", ckpt.baseline_value},
                   {"decay", ckpt.baseline_decay},
                   {"initialized", ckpt.baseline_initialized}};
  j["tensors"] = {{"fwd.W", tensor_to_json(ckpt.params.fwd.W)},
                  {"fwd.b", tensor_to_json(ckpt.params.fwd.b)},
                  {"bwd.W", tensor_to_json(ckpt.params.bwd.W)},
                  {"bwd.b", tensor_to_json(ckpt.params.bwd.b)},
                  {"head.w", tensor_to_json(ckpt.params.head_w)},
                  {"head.b", ckpt.params.head_b}};
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump();
}

PolicyCheckpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read checkpoint " + file.string());
  json j = json::parse(in);
  if (j.at("format").get<std::string>() != "ddc-policy-v1")
    throw std::runtime_error("unknown checkpoint format");
  PolicyCheckpoint c;
  c.params.input_width = j.at("input_width").get<int>();
  c.params.hidden_width = j.at("hidden_width").get<int>();
  c.iteration = j.at("iteration").get<int>();
  c.num_encoding_rows = j.at("num_encoding_rows").get<int>();
  c.num_actions = j.at("num_actions").get<int>();
  c.baseline_value = j.at("baseline").at("value").get<double>();
  c.baseline_decay = j.at("baseline").at("decay").get<double>();
  c.baseline_initialized = j.at("baseline").at("initialized").get<bool>();
  const auto& t = j.at("tensors");
  c.params.fwd.W = tensor_from_json(t.at("fwd.W"));
  c.params.fwd.b = tensor_from_json(t.at("fwd.b"));
  c.params.bwd.W = tensor_from_json(t.at("bwd.W"));
  c.params.bwd.b = tensor_from_json(t.at("bwd.b"));
  c.params.head_w = tensor_from_json(t.at("head.w"));
  c.params.head_b = t.at("head.b").get<double>();
  return c;
}

}  // namespace ddc
