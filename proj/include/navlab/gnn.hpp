#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "navlab/kinematics.hpp"
#include "navlab/rng.hpp"
#include "navlab/scenario.hpp"

namespace navlab {

// A scenario at one instant: what the policy sees.
struct SceneSnapshot {
  StateRow states;
  std::vector<TargetPose> targets;
  std::vector<Obstacle> obstacles;
};

inline SceneSnapshot make_snapshot(const Scenario& sc, const StateRow& states) {
  SceneSnapshot snap;
  snap.states = states;
  snap.targets.reserve(sc.vehicles.size());
  for (const auto& task : sc.vehicles) snap.targets.push_back(task.target);
  snap.obstacles = sc.obstacles;
  return snap;
}

struct LabeledSample {
  SceneSnapshot snapshot;
  ControlRow labels;  // first control row of the optimized plan
};

enum class NodeKind : std::uint8_t { vehicle = 0, obstacle = 1 };

constexpr int kNodeFeatureDim = 8;

// Vehicles: [x, y, theta, v, tx, ty, ttheta, 0]
// Obstacles: [x, y, 0, 0, x, y, 0, r]
struct SceneGraph {
  std::vector<std::array<double, kNodeFeatureDim>> features;
  std::vector<NodeKind> kinds;
  std::vector<std::pair<int, int>> edges;  // (source, destination)
  int n_vehicles = 0;

  int n_nodes() const { return static_cast<int>(features.size()); }
};

// Vehicles first, then obstacles; every vehicle receives an edge from every
// other node, obstacles receive none.
inline SceneGraph build_graph(const SceneSnapshot& snap) {
  SceneGraph g;
  g.n_vehicles = static_cast<int>(snap.states.size());
  const int n_obs = static_cast<int>(snap.obstacles.size());
  const int n_nodes = g.n_vehicles + n_obs;
  g.features.reserve(n_nodes);
  g.kinds.reserve(n_nodes);

  for (int i = 0; i < g.n_vehicles; ++i) {
    const VehicleState& s = snap.states[i];
    const TargetPose& t = snap.targets[i];
    g.features.push_back({s.x, s.y, s.theta, s.v, t.x, t.y, t.theta, 0.0});
    g.kinds.push_back(NodeKind::vehicle);
  }
  for (int j = 0; j < n_obs; ++j) {
    const Obstacle& o = snap.obstacles[j];
    g.features.push_back({o.x, o.y, 0.0, 0.0, o.x, o.y, 0.0, o.r});
    g.kinds.push_back(NodeKind::obstacle);
  }

  g.edges.reserve(static_cast<std::size_t>(g.n_vehicles) * (n_nodes - 1));
  for (int dst = 0; dst < g.n_vehicles; ++dst) {
    for (int src = 0; src < n_nodes; ++src) {
      if (src != dst) g.edges.emplace_back(src, dst);
    }
  }
  return g;
}

struct GnnConfig {
  int layers = 3;
  int hidden = 64;
  bool recenter = true;      // subtract the per-graph position centroid
  double pos_scale = 10.0;   // meters per unit fed to the encoder
  double steer_limit = kPi / 4.0;  // output squash scales
  double pedal_limit = 1.0;
};

// Shared-weight message-passing network. All parameters live in one flat
// vector so the trainer can treat them uniformly; named views are exposed
// for persistence.
class GnnModel {
 public:
  struct TensorInfo {
    std::string name;
    std::size_t offset;
    std::size_t rows;
    std::size_t cols;  // 0 for bias vectors

    std::size_t count() const { return cols == 0 ? rows : rows * cols; }
  };

  GnnModel() { rebuild_layout(); }

  GnnModel(const GnnConfig& cfg, std::uint64_t seed) : config(cfg) {
    rebuild_layout();
    params.assign(total_params_, 0.0);
    Rng rng(seed);
    for (const TensorInfo& t : layout_) {
      if (t.cols == 0) continue;  // biases start at zero
      const double bound = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      for (std::size_t k = 0; k < t.count(); ++k) {
        params[t.offset + k] = rng.uniform(-bound, bound);
      }
    }
  }

  GnnConfig config;
  std::vector<double> params;

  const std::vector<TensorInfo>& tensor_layout() const { return layout_; }
  std::size_t parameter_count() const { return total_params_; }

  const double* tensor(const char* name) const {
    for (const TensorInfo& t : layout_) {
      if (t.name == name) return params.data() + t.offset;
    }
    throw std::invalid_argument(std::string("GnnModel: unknown tensor ") + name);
  }

  // call after mutating config so offsets match
  void rebuild_layout() {
    layout_.clear();
    const std::size_t d = static_cast<std::size_t>(config.hidden);
    std::size_t off = 0;
    auto add = [&](std::string name, std::size_t rows, std::size_t cols) {
      layout_.push_back({std::move(name), off, rows, cols});
      off += cols == 0 ? rows : rows * cols;
    };
    add("enc.w", d, kNodeFeatureDim);
    add("enc.b", d, 0);
    for (int l = 0; l < config.layers; ++l) {
      const std::string p = "l" + std::to_string(l) + ".";
      add(p + "msg.w1", d, 2 * d);
      add(p + "msg.b1", d, 0);
      add(p + "msg.w2", d, d);
      add(p + "msg.b2", d, 0);
      add(p + "upd.w", d, 2 * d);
      add(p + "upd.b", d, 0);
    }
    add("head.w", 2, d);
    add("head.b", 2, 0);
    total_params_ = off;
  }

 private:
  std::vector<TensorInfo> layout_;
  std::size_t total_params_ = 0;
};

namespace detail {

// y = W x + b, W row-major (rows x cols)
inline void affine(double* y, const double* w, const double* b, const double* x,
                   std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double s = b[r];
    const double* wr = w + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
}

// gx += W^T gy; gw += gy x^T; gb += gy
inline void affine_backward(const double* w, const double* x, const double* gy,
                            double* gw, double* gb, double* gx,
                            std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double gr = gy[r];
    gb[r] += gr;
    const double* wr = w + r * cols;
    double* gwr = gw + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      gwr[c] += gr * x[c];
      if (gx) gx[c] += wr[c] * gr;
    }
  }
}

struct GnnWeights {
  const double* enc_w;
  const double* enc_b;
  struct Layer {
    const double* msg_w1;
    const double* msg_b1;
    const double* msg_w2;
    const double* msg_b2;
    const double* upd_w;
    const double* upd_b;
  };
  std::vector<Layer> layers;
  const double* head_w;
  const double* head_b;
};

inline GnnWeights weight_views(const GnnModel& m, const double* base) {
  GnnWeights v;
  std::size_t idx = 0;
  const auto& layout = m.tensor_layout();
  auto next = [&]() { return base + layout[idx++].offset; };
  v.enc_w = next();
  v.enc_b = next();
  v.layers.resize(m.config.layers);
  for (int l = 0; l < m.config.layers; ++l) {
    v.layers[l].msg_w1 = next();
    v.layers[l].msg_b1 = next();
    v.layers[l].msg_w2 = next();
    v.layers[l].msg_b2 = next();
    v.layers[l].upd_w = next();
    v.layers[l].upd_b = next();
  }
  v.head_w = next();
  v.head_b = next();
  return v;
}

inline GnnWeights weight_views(const GnnModel& m) {
  return weight_views(m, m.params.data());
}

}  // namespace detail

// Intermediate activations kept for the reverse pass.
struct GnnTrace {
  std::vector<std::array<double, kNodeFeatureDim>> inputs;  // post recenter/scale
  std::vector<std::vector<double>> h;           // [layer 0..L][node*D]
  std::vector<std::vector<double>> msg_hidden;  // [layer][edge*D], post tanh
  std::vector<std::vector<double>> msg_out;     // [layer][edge*D]
  std::vector<std::vector<double>> msg_mean;    // [layer][vehicle*D]
  std::vector<double> head_out;                 // [vehicle*2] raw logits
};

inline ControlRow gnn_forward(const GnnModel& model, const SceneGraph& graph,
                              GnnTrace* trace = nullptr) {
  const int n_nodes = graph.n_nodes();
  const int n_veh = graph.n_vehicles;
  const std::size_t d = static_cast<std::size_t>(model.config.hidden);
  const auto w = detail::weight_views(model);

  // input transform: optional recentering of every position slot, then scale
  std::vector<std::array<double, kNodeFeatureDim>> inputs = graph.features;
  if (model.config.recenter && n_nodes > 0) {
    double cx = 0.0, cy = 0.0;
    for (const auto& f : inputs) {
      cx += f[0];
      cy += f[1];
    }
    cx /= n_nodes;
    cy /= n_nodes;
    for (auto& f : inputs) {
      f[0] -= cx;
      f[1] -= cy;
      f[4] -= cx;
      f[5] -= cy;
    }
  }
  const double inv_scale = 1.0 / model.config.pos_scale;
  for (auto& f : inputs) {
    f[0] *= inv_scale;
    f[1] *= inv_scale;
    f[4] *= inv_scale;
    f[5] *= inv_scale;
  }

  std::vector<std::vector<double>> h(model.config.layers + 1);
  h[0].resize(n_nodes * d);
  for (int i = 0; i < n_nodes; ++i) {
    detail::affine(h[0].data() + i * d, w.enc_w, w.enc_b, inputs[i].data(), d,
                   kNodeFeatureDim);
    for (std::size_t k = 0; k < d; ++k) {
      h[0][i * d + k] = std::tanh(h[0][i * d + k]);
    }
  }

  const std::size_t n_edges = graph.edges.size();
  std::vector<std::vector<double>> msg_hidden(model.config.layers);
  std::vector<std::vector<double>> msg_out(model.config.layers);
  std::vector<std::vector<double>> msg_mean(model.config.layers);
  std::vector<double> concat(2 * d);

  const double in_degree =
      n_nodes > 1 ? static_cast<double>(n_nodes - 1) : 1.0;

  for (int l = 0; l < model.config.layers; ++l) {
    const auto& lw = w.layers[l];
    msg_hidden[l].resize(n_edges * d);
    msg_out[l].resize(n_edges * d);
    msg_mean[l].assign(n_veh * d, 0.0);

    for (std::size_t e = 0; e < n_edges; ++e) {
      const int src = graph.edges[e].first;
      const int dst = graph.edges[e].second;
      std::copy_n(h[l].data() + dst * d, d, concat.data());
      std::copy_n(h[l].data() + src * d, d, concat.data() + d);
      double* hid = msg_hidden[l].data() + e * d;
      detail::affine(hid, lw.msg_w1, lw.msg_b1, concat.data(), d, 2 * d);
      for (std::size_t k = 0; k < d; ++k) hid[k] = std::tanh(hid[k]);
      double* out = msg_out[l].data() + e * d;
      detail::affine(out, lw.msg_w2, lw.msg_b2, hid, d, d);
      double* mean = msg_mean[l].data() + dst * d;
      for (std::size_t k = 0; k < d; ++k) mean[k] += out[k];
    }
    for (int i = 0; i < n_veh; ++i) {
      double* mean = msg_mean[l].data() + i * d;
      for (std::size_t k = 0; k < d; ++k) mean[k] /= in_degree;
    }

    h[l + 1].resize(n_nodes * d);
    for (int i = 0; i < n_veh; ++i) {
      std::copy_n(h[l].data() + i * d, d, concat.data());
      std::copy_n(msg_mean[l].data() + i * d, d, concat.data() + d);
      double* out = h[l + 1].data() + i * d;
      detail::affine(out, lw.upd_w, lw.upd_b, concat.data(), d, 2 * d);
      for (std::size_t k = 0; k < d; ++k) out[k] = std::tanh(out[k]);
    }
    // obstacle nodes are static message sources
    for (int i = n_veh; i < n_nodes; ++i) {
      std::copy_n(h[l].data() + i * d, d, h[l + 1].data() + i * d);
    }
    for (int i = 0; i < n_veh; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        if (!std::isfinite(h[l + 1][i * d + k])) {
          throw std::runtime_error("gnn_forward: non-finite activation at layer " +
                                   std::to_string(l));
        }
      }
    }
  }

  std::vector<double> head_out(n_veh * 2);
  ControlRow controls(n_veh);
  for (int i = 0; i < n_veh; ++i) {
    detail::affine(head_out.data() + i * 2, w.head_w, w.head_b,
                   h[model.config.layers].data() + i * d, 2, d);
    controls[i].steering = model.config.steer_limit * std::tanh(head_out[i * 2]);
    controls[i].pedal = model.config.pedal_limit * std::tanh(head_out[i * 2 + 1]);
  }

  if (trace) {
    trace->inputs = std::move(inputs);
    trace->h = std::move(h);
    trace->msg_hidden = std::move(msg_hidden);
    trace->msg_out = std::move(msg_out);
    trace->msg_mean = std::move(msg_mean);
    trace->head_out = std::move(head_out);
  }
  return controls;
}

// Mean squared error over vehicles and both control dimensions.
inline double gnn_mse_loss(const ControlRow& pred, const ControlRow& label) {
  if (pred.size() != label.size()) {
    throw std::invalid_argument("gnn_mse_loss: size mismatch");
  }
  if (pred.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dp = pred[i].pedal - label[i].pedal;
    const double ds = pred[i].steering - label[i].steering;
    s += dp * dp + ds * ds;
  }
  return s / (2.0 * static_cast<double>(pred.size()));
}

// Accumulate d(loss)/d(params) into `grad` given d(loss)/d(controls).
inline void gnn_backward(const GnnModel& model, const SceneGraph& graph,
                         const GnnTrace& trace,
                         const std::vector<std::array<double, 2>>& d_controls,
                         std::vector<double>& grad) {
  const int n_nodes = graph.n_nodes();
  const int n_veh = graph.n_vehicles;
  const std::size_t d = static_cast<std::size_t>(model.config.hidden);
  if (grad.size() != model.parameter_count()) {
    grad.assign(model.parameter_count(), 0.0);
  }
  const auto w = detail::weight_views(model);
  const auto g = detail::weight_views(model, grad.data());
  // weight_views returns const pointers; gradients are written through the
  // same offsets
  auto mut = [](const double* p) { return const_cast<double*>(p); };

  const double in_degree =
      n_nodes > 1 ? static_cast<double>(n_nodes - 1) : 1.0;

  // through the output squash and head
  std::vector<double> gh(n_nodes * d, 0.0);
  std::vector<double> g_logits(2);
  for (int i = 0; i < n_veh; ++i) {
    const double t0 = std::tanh(trace.head_out[i * 2]);
    const double t1 = std::tanh(trace.head_out[i * 2 + 1]);
    g_logits[0] =
        d_controls[i][1] * model.config.steer_limit * (1.0 - t0 * t0);
    g_logits[1] =
        d_controls[i][0] * model.config.pedal_limit * (1.0 - t1 * t1);
    detail::affine_backward(w.head_w,
                            trace.h[model.config.layers].data() + i * d,
                            g_logits.data(), mut(g.head_w), mut(g.head_b),
                            gh.data() + i * d, 2, d);
  }

  std::vector<double> gh_prev(n_nodes * d);
  std::vector<double> concat(2 * d);
  std::vector<double> g_concat(2 * d);
  std::vector<double> g_pre(d);
  std::vector<double> g_mean(n_veh * d);
  std::vector<double> g_msg(d);
  std::vector<double> g_hid(d);

  for (int l = model.config.layers - 1; l >= 0; --l) {
    const auto& lw = w.layers[l];
    const auto& lg = g.layers[l];
    std::fill(gh_prev.begin(), gh_prev.end(), 0.0);
    std::fill(g_mean.begin(), g_mean.end(), 0.0);

    // obstacles: identity carry
    for (int i = n_veh; i < n_nodes; ++i) {
      for (std::size_t k = 0; k < d; ++k) {
        gh_prev[i * d + k] += gh[i * d + k];
      }
    }

    // vehicles: through the update transform
    for (int i = 0; i < n_veh; ++i) {
      const double* h_next = trace.h[l + 1].data() + i * d;
      for (std::size_t k = 0; k < d; ++k) {
        g_pre[k] = gh[i * d + k] * (1.0 - h_next[k] * h_next[k]);
      }
      std::copy_n(trace.h[l].data() + i * d, d, concat.data());
      std::copy_n(trace.msg_mean[l].data() + i * d, d, concat.data() + d);
      std::fill(g_concat.begin(), g_concat.end(), 0.0);
      detail::affine_backward(lw.upd_w, concat.data(), g_pre.data(),
                              mut(lg.upd_w), mut(lg.upd_b), g_concat.data(), d,
                              2 * d);
      for (std::size_t k = 0; k < d; ++k) {
        gh_prev[i * d + k] += g_concat[k];
        g_mean[i * d + k] += g_concat[d + k];
      }
    }

    // through every message
    for (std::size_t e = 0; e < graph.edges.size(); ++e) {
      const int src = graph.edges[e].first;
      const int dst = graph.edges[e].second;
      for (std::size_t k = 0; k < d; ++k) {
        g_msg[k] = g_mean[dst * d + k] / in_degree;
      }
      const double* hid = trace.msg_hidden[l].data() + e * d;
      std::fill(g_hid.begin(), g_hid.end(), 0.0);
      detail::affine_backward(lw.msg_w2, hid, g_msg.data(), mut(lg.msg_w2),
                              mut(lg.msg_b2), g_hid.data(), d, d);
      for (std::size_t k = 0; k < d; ++k) {
        g_hid[k] *= (1.0 - hid[k] * hid[k]);
      }
      std::copy_n(trace.h[l].data() + dst * d, d, concat.data());
      std::copy_n(trace.h[l].data() + src * d, d, concat.data() + d);
      std::fill(g_concat.begin(), g_concat.end(), 0.0);
      detail::affine_backward(lw.msg_w1, concat.data(), g_hid.data(),
                              mut(lg.msg_w1), mut(lg.msg_b1), g_concat.data(),
                              d, 2 * d);
      for (std::size_t k = 0; k < d; ++k) {
        gh_prev[dst * d + k] += g_concat[k];
        gh_prev[src * d + k] += g_concat[d + k];
      }
    }
    gh.swap(gh_prev);
  }

  // encoder
  for (int i = 0; i < n_nodes; ++i) {
    const double* h0 = trace.h[0].data() + i * d;
    for (std::size_t k = 0; k < d; ++k) {
      g_pre[k] = gh[i * d + k] * (1.0 - h0[k] * h0[k]);
    }
    detail::affine_backward(w.enc_w, trace.inputs[i].data(), g_pre.data(),
                            mut(g.enc_w), mut(g.enc_b), nullptr, d,
                            kNodeFeatureDim);
  }
}

// Loss + parameter gradient for one labeled sample.
inline double gnn_sample_gradient(const GnnModel& model, const SceneGraph& graph,
                                  const ControlRow& labels,
                                  std::vector<double>& grad) {
  GnnTrace trace;
  const ControlRow pred = gnn_forward(model, graph, &trace);
  const double loss = gnn_mse_loss(pred, labels);
  const double n = static_cast<double>(pred.size());
  std::vector<std::array<double, 2>> d_controls(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    d_controls[i][0] = (pred[i].pedal - labels[i].pedal) / n;
    d_controls[i][1] = (pred[i].steering - labels[i].steering) / n;
  }
  gnn_backward(model, graph, trace, d_controls, grad);
  return loss;
}

struct TrainConfig {
  double lr = 1e-3;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double val_split = 0.1;
  int patience = 20;  // epochs without validation improvement before stopping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // exploit the planar symmetries of the task: train on randomly rotated and
  // mirrored copies of each sample (labels transform accordingly)
  bool augment_symmetry = true;
};

// Rigid rotation plus optional mirror across the x axis. The dynamics and
// every cost term are equivariant under both, so the relabeled sample is
// exact, not approximate: rotations leave controls unchanged, mirroring flips
// the steering sign.
inline LabeledSample transform_sample(const LabeledSample& s, double angle,
                                      bool mirror) {
  LabeledSample out = s;
  const double c = std::cos(angle);
  const double sn = std::sin(angle);
  auto rot = [&](double& x, double& y) {
    const double nx = c * x - sn * y;
    const double ny = sn * x + c * y;
    x = nx;
    y = ny;
  };
  for (std::size_t i = 0; i < out.snapshot.states.size(); ++i) {
    VehicleState& st = out.snapshot.states[i];
    TargetPose& tg = out.snapshot.targets[i];
    if (mirror) {
      st.y = -st.y;
      st.theta = wrap_angle(-st.theta);
      tg.y = -tg.y;
      tg.theta = wrap_angle(-tg.theta);
      out.labels[i].steering = -out.labels[i].steering;
    }
    rot(st.x, st.y);
    st.theta = wrap_angle(st.theta + angle);
    rot(tg.x, tg.y);
    tg.theta = wrap_angle(tg.theta + angle);
  }
  for (Obstacle& o : out.snapshot.obstacles) {
    if (mirror) o.y = -o.y;
    rot(o.x, o.y);
  }
  return out;
}

struct TrainReport {
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch (train loss echoed when no split)
  double initial_val_loss = 0.0;
  int best_epoch = -1;
  double best_val_loss = 0.0;
};

// Mini-batch Adam on the MSE imitation loss. The model is trained in place
// and left at the best-validation-epoch weights.
inline TrainReport train(GnnModel& model, const std::vector<LabeledSample>& data,
                         const TrainConfig& cfg) {
  if (data.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }
  Rng rng(cfg.seed);

  std::vector<SceneGraph> graphs;
  graphs.reserve(data.size());
  for (const LabeledSample& s : data) graphs.push_back(build_graph(s.snapshot));

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates with the seeded stream
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = rng.uniform_int(0, i - 1);
    std::swap(order[i - 1], order[j]);
  }
  std::size_t n_val = static_cast<std::size_t>(
      std::floor(cfg.val_split * static_cast<double>(data.size())));
  if (n_val >= data.size()) n_val = data.size() - 1;
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());

  auto eval_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i : idx) {
      s += gnn_mse_loss(gnn_forward(model, graphs[i]), data[i].labels);
    }
    return s / static_cast<double>(idx.size());
  };

  TrainReport report;
  report.initial_val_loss = n_val > 0 ? eval_loss(val_idx) : eval_loss(train_idx);
  report.best_val_loss = report.initial_val_loss;

  const std::size_t np = model.parameter_count();
  std::vector<double> grad(np, 0.0);
  std::vector<double> adam_m(np, 0.0);
  std::vector<double> adam_v(np, 0.0);
  std::vector<double> best_params = model.params;
  long long step = 0;
  int stale_epochs = 0;

  const std::size_t batch =
      std::min<std::size_t>(std::max(1, cfg.batch_size), train_idx.size());

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = train_idx.size(); i > 1; --i) {
      const std::size_t j = rng.uniform_int(0, i - 1);
      std::swap(train_idx[i - 1], train_idx[j]);
    }

    double epoch_loss = 0.0;
    double vloss = 0.0;
    try {
      std::size_t n_batches = 0;
      for (std::size_t b = 0; b < train_idx.size(); b += batch) {
        const std::size_t e = std::min(b + batch, train_idx.size());
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_loss = 0.0;
        for (std::size_t k = b; k < e; ++k) {
          const std::size_t i = train_idx[k];
          if (cfg.augment_symmetry) {
            const LabeledSample aug = transform_sample(
                data[i], rng.uniform(-kPi, kPi), rng.uniform() < 0.5);
            batch_loss += gnn_sample_gradient(model, build_graph(aug.snapshot),
                                              aug.labels, grad);
          } else {
            batch_loss +=
                gnn_sample_gradient(model, graphs[i], data[i].labels, grad);
          }
        }
        const double inv = 1.0 / static_cast<double>(e - b);
        batch_loss *= inv;
        epoch_loss += batch_loss;
        ++n_batches;

        ++step;
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        for (std::size_t p = 0; p < np; ++p) {
          const double gp = grad[p] * inv;
          adam_m[p] = cfg.adam_beta1 * adam_m[p] + (1.0 - cfg.adam_beta1) * gp;
          adam_v[p] = cfg.adam_beta2 * adam_v[p] + (1.0 - cfg.adam_beta2) * gp * gp;
          model.params[p] -= cfg.lr * (adam_m[p] / bc1) /
                             (std::sqrt(adam_v[p] / bc2) + cfg.adam_eps);
        }
      }
      epoch_loss /= static_cast<double>(std::max<std::size_t>(1, n_batches));
      if (!std::isfinite(epoch_loss)) {
        throw std::runtime_error("loss is non-finite");
      }
      vloss = n_val > 0 ? eval_loss(val_idx) : epoch_loss;
    } catch (const std::exception& e) {
      throw std::runtime_error("train: diverged at epoch " +
                               std::to_string(epoch) + ": " + e.what());
    }
    report.train_loss.push_back(epoch_loss);
    report.val_loss.push_back(vloss);

    if (vloss <= report.best_val_loss) {
      report.best_val_loss = vloss;
      report.best_epoch = epoch;
      best_params = model.params;
      stale_epochs = 0;
    } else if (++stale_epochs >= cfg.patience) {
      break;
    }
  }

  if (report.best_epoch >= 0) model.params = best_params;
  return report;
}

// Roll the policy forward H steps through the kinematics, collecting the
// controls; used as the optimizer's policy warm start.
inline ControlSeq predict_plan(const GnnModel& model, const Scenario& sc,
                               const StateRow& states, int horizon,
                               const KinematicParams& kin) {
  ControlSeq plan;
  plan.reserve(static_cast<std::size_t>(horizon));
  StateRow cur = states;
  for (int t = 0; t < horizon; ++t) {
    SceneSnapshot snap = make_snapshot(sc, cur);
    ControlRow u = gnn_forward(model, build_graph(snap));
    for (std::size_t i = 0; i < cur.size(); ++i) {
      cur[i] = step(cur[i], u[i], kin);
    }
    plan.push_back(std::move(u));
  }
  return plan;
}

}  // namespace navlab
