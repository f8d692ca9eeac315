#ifndef RQL_NETWORK_HPP
#define RQL_NETWORK_HPP

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rql/nn.hpp"
#include "rql/rng.hpp"
#include "rql/tensor.hpp"

namespace rql {

// Post-convolutional head. kFc is the DQN head (affine hidden layer), kLstm
// replaces that layer with a recurrent LSTM of the same size, kLstmOverFc
// inserts the LSTM after the hidden layer instead.
enum class HeadKind { kFc, kLstm, kLstmOverFc };

struct ConvLayerSpec {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvLayerSpec&) const = default;
};

struct NetworkSpec {
  int input_channels = 1;
  int input_size = 84;
  std::vector<ConvLayerSpec> conv_layers;
  HeadKind head = HeadKind::kLstm;
  int head_units = 512;
  // The DQN hidden layer is rectified; the LSTM output is not unless asked
  // for (the "ReLU-LSTM" variants).
  bool relu_after_fc = true;
  bool relu_after_recurrent = false;
  int num_actions = 18;

  bool operator==(const NetworkSpec&) const = default;

  bool recurrent() const { return head != HeadKind::kFc; }

  // Single-channel 84x84 trunk: conv(32,8,4), conv(64,4,2), conv(64,3,1),
  // LSTM(512).
  static NetworkSpec paper_drqn(int num_actions = 18) {
    NetworkSpec s;
    s.input_channels = 1;
    s.input_size = 84;
    s.conv_layers = {{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
    s.head = HeadKind::kLstm;
    s.head_units = 512;
    s.num_actions = num_actions;
    return s;
  }

  // Desk-scale trunk that trains in CPU minutes: conv(8,5,2), conv(16,3,2).
  static NetworkSpec desk_drqn(int num_actions, int frame_size = 32,
                               int units = 64) {
    NetworkSpec s;
    s.input_channels = 1;
    s.input_size = frame_size;
    s.conv_layers = {{8, 5, 2}, {16, 3, 2}};
    s.head = HeadKind::kLstm;
    s.head_units = units;
    s.num_actions = num_actions;
    return s;
  }

  static NetworkSpec desk_dqn(int num_actions, int stacked_frames,
                              int frame_size = 32, int units = 64) {
    NetworkSpec s = desk_drqn(num_actions, frame_size, units);
    s.input_channels = stacked_frames;
    s.head = HeadKind::kFc;
    return s;
  }

  void validate() const {
    if (input_channels < 1) throw ShapeError("input_channels must be >= 1");
    if (input_size < 1) throw ShapeError("input_size must be >= 1");
    if (head_units < 1) throw ShapeError("head_units must be >= 1");
    if (num_actions < 1) throw ShapeError("num_actions must be >= 1");
    int size = input_size;
    for (size_t i = 0; i < conv_layers.size(); ++i) {
      const auto& c = conv_layers[i];
      if (c.filters < 1 || c.kernel < 1 || c.stride < 1) {
        throw ShapeError("conv layer " + std::to_string(i) +
                         " has non-positive filters/kernel/stride");
      }
      if (size < c.kernel) {
        throw ShapeError("conv layer " + std::to_string(i) + " kernel " +
                         std::to_string(c.kernel) + " exceeds input extent " +
                         std::to_string(size));
      }
      size = nn::conv_output_extent(size, c.kernel, c.stride);
      if (size < 1) {
        throw ShapeError("conv layer " + std::to_string(i) +
                         " produces empty output");
      }
    }
  }

  int conv_output_size() const {
    int size = input_size;
    for (const auto& c : conv_layers) {
      size = nn::conv_output_extent(size, c.kernel, c.stride);
    }
    return size;
  }

  int conv_output_channels() const {
    return conv_layers.empty() ? input_channels : conv_layers.back().filters;
  }

  int flatten_width() const {
    const int s = conv_output_size();
    return conv_output_channels() * s * s;
  }

  int lstm_input_width() const {
    return head == HeadKind::kLstmOverFc ? head_units : flatten_width();
  }
};

// Closed-form parameter count from layer shapes alone.
inline size_t param_count(const NetworkSpec& spec) {
  spec.validate();
  size_t count = 0;
  int ch = spec.input_channels;
  for (const auto& c : spec.conv_layers) {
    count += static_cast<size_t>(c.filters) * ch * c.kernel * c.kernel + c.filters;
    ch = c.filters;
  }
  const size_t flat = static_cast<size_t>(spec.flatten_width());
  const size_t u = static_cast<size_t>(spec.head_units);
  if (spec.head != HeadKind::kLstm) {
    count += u * flat + u;  // the fully connected hidden layer
  }
  if (spec.recurrent()) {
    const size_t lin = static_cast<size_t>(spec.lstm_input_width());
    count += 4 * (u * (lin + u) + u);
  }
  count += static_cast<size_t>(spec.num_actions) * u + spec.num_actions;
  return count;
}

// Named learned tensors in a fixed order, plus a version counter bumped on
// every optimizer step.
template <typename T>
struct ParameterSet {
  struct Entry {
    std::string name;
    Tensor<T> tensor;
  };
  std::vector<Entry> entries;
  uint64_t version = 0;

  Tensor<T>& operator[](size_t i) { return entries[i].tensor; }
  const Tensor<T>& operator[](size_t i) const { return entries[i].tensor; }

  Tensor<T>* find(const std::string& name) {
    for (auto& e : entries) {
      if (e.name == name) return &e.tensor;
    }
    return nullptr;
  }
  const Tensor<T>* find(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->find(name);
  }

  size_t total_params() const {
    size_t n = 0;
    for (const auto& e : entries) n += e.tensor.size();
    return n;
  }

  ParameterSet clone() const { return *this; }

  void zero_all() {
    for (auto& e : entries) e.tensor.zero();
  }

  bool bitwise_equal(const ParameterSet& other) const {
    if (entries.size() != other.entries.size() || version != other.version) {
      return false;
    }
    for (size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].name != other.entries[i].name ||
          !entries[i].tensor.bitwise_equal(other.entries[i].tensor)) {
        return false;
      }
    }
    return true;
  }
};

// A Q-network assembled from a NetworkSpec. Forward runs over a sequence of
// per-step inputs (length 1 for the non-recurrent head) and keeps the
// activations needed for the backward pass; backward implements BPTT with
// gradients summed across timesteps and no gradient into the initial state.
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    layout();
  }

  const NetworkSpec& spec() const { return spec_; }
  int flatten_width() const { return spec_.flatten_width(); }
  int lstm_input_width() const { return spec_.lstm_input_width(); }
  size_t param_count() const { return rql::param_count(spec_); }

  // Deterministic for a fixed seed: weights uniform in +-1/sqrt(fan_in),
  // forget-gate bias +1, all other biases 0.
  ParameterSet<T> init_params(uint64_t seed) const {
    ParameterSet<T> p = zero_params();
    Rng rng(derive_seed(seed, 0x6e6574));
    for (auto& e : p.entries) {
      if (e.name.ends_with(".b") || e.name.starts_with("lstm.b_")) {
        if (e.name == "lstm.b_forget") e.tensor.fill(T(1));
        continue;
      }
      const int fan_in = e.tensor.dim(e.tensor.rank() - 1) *
                         (e.tensor.rank() == 4
                              ? e.tensor.dim(1) * e.tensor.dim(2)
                              : 1);
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      fill_uniform(e.tensor, rng, -bound, bound);
    }
    return p;
  }

  // Same names and shapes as the parameters, all zero. Used for gradients
  // and optimizer accumulators.
  ParameterSet<T> zero_params() const {
    ParameterSet<T> p;
    for (const auto& d : entry_defs_) {
      p.entries.push_back({d.name, Tensor<T>(d.shape)});
    }
    return p;
  }

  struct StepTrace {
    Tensor<T> frame;
    std::vector<Tensor<T>> conv_pre;
    std::vector<Tensor<T>> conv_post;
    Tensor<T> flat;
    Tensor<T> fc_pre;
    Tensor<T> fc_post;
    nn::LstmCellTrace<T> lstm;
    Tensor<T> head_out;  // input to the Q-value layer
    Tensor<T> q;
  };

  struct ForwardResult {
    std::vector<StepTrace> steps;
    nn::LstmState<T> final_state;

    int length() const { return static_cast<int>(steps.size()); }
    const Tensor<T>& q(int step) const { return steps[static_cast<size_t>(step)].q; }
  };

  ForwardResult forward(const ParameterSet<T>& params,
                        std::span<const Tensor<T>> frames,
                        const nn::LstmState<T>* initial_state) const {
    if (frames.empty()) {
      throw ShapeError("forward requires a sequence of at least one frame");
    }
    if (!spec_.recurrent() && frames.size() != 1) {
      throw ShapeError("non-recurrent head takes exactly one stacked "
                       "observation, got a sequence of " +
                       std::to_string(frames.size()));
    }
    check_params(params);

    nn::LstmState<T> state = spec_.recurrent()
                                 ? (initial_state != nullptr
                                        ? *initial_state
                                        : nn::LstmState<T>::zeros(spec_.head_units))
                                 : nn::LstmState<T>::zeros(1);
    if (spec_.recurrent() && state.hidden.dim(0) != spec_.head_units) {
      throw ShapeError("initial state has " +
                       std::to_string(state.hidden.dim(0)) +
                       " units, spec has " + std::to_string(spec_.head_units));
    }

    ForwardResult out;
    out.steps.reserve(frames.size());
    for (const Tensor<T>& frame : frames) {
      validate_frame(frame);
      StepTrace t;
      t.frame = frame;

      const Tensor<T>* cur = &t.frame;
      t.conv_pre.reserve(spec_.conv_layers.size());
      t.conv_post.reserve(spec_.conv_layers.size());
      for (size_t i = 0; i < spec_.conv_layers.size(); ++i) {
        t.conv_pre.push_back(nn::conv2d(*cur, params[conv_w_[i]],
                                        params[conv_b_[i]],
                                        spec_.conv_layers[i].stride));
        t.conv_post.push_back(nn::relu(t.conv_pre.back()));
        cur = &t.conv_post.back();
      }
      t.flat = cur->reshaped({spec_.flatten_width()});

      const Tensor<T>* head_in = &t.flat;
      if (spec_.head != HeadKind::kLstm) {
        t.fc_pre = nn::linear(*head_in, params[fc_w_], params[fc_b_]);
        t.fc_post = spec_.relu_after_fc ? nn::relu(t.fc_pre) : t.fc_pre;
        head_in = &t.fc_post;
      }
      if (spec_.recurrent()) {
        t.lstm = nn::lstm_cell(*head_in, state, lstm_weights(params));
        state = t.lstm.state();
        t.head_out = spec_.relu_after_recurrent ? nn::relu(t.lstm.hidden)
                                                : t.lstm.hidden;
      } else {
        t.head_out = t.fc_post;
      }
      t.q = nn::linear(t.head_out, params[out_w_], params[out_b_]);
      out.steps.push_back(std::move(t));
    }
    out.final_state = spec_.recurrent() ? state
                                        : nn::LstmState<T>::zeros(spec_.head_units);
    return out;
  }

  // grad_q holds dL/dQ per step. Parameter gradients accumulate into `grads`
  // (zero it first for a fresh gradient). Recurrent state gradients flow back
  // through every step and stop at step 0.
  void backward(const ParameterSet<T>& params, const ForwardResult& fwd,
                std::span<const Tensor<T>> grad_q, ParameterSet<T>& grads) const {
    if (grad_q.size() != fwd.steps.size()) {
      throw ShapeError("backward needs one grad per step: got " +
                       std::to_string(grad_q.size()) + " for " +
                       std::to_string(fwd.steps.size()) + " steps");
    }
    check_params(grads);

    nn::LstmState<T> carry = nn::LstmState<T>::zeros(spec_.head_units);
    for (int step = fwd.length() - 1; step >= 0; --step) {
      const StepTrace& t = fwd.steps[static_cast<size_t>(step)];
      auto out_g = nn::linear_backward(grad_q[static_cast<size_t>(step)],
                                       t.head_out, params[out_w_]);
      add_into(grads[out_w_], out_g.weight);
      add_into(grads[out_b_], out_g.bias);
      Tensor<T> dhead = std::move(out_g.input);

      Tensor<T> dflat;
      if (spec_.recurrent()) {
        if (spec_.relu_after_recurrent) {
          dhead = nn::relu_backward(dhead, t.lstm.hidden);
        }
        add_into(dhead, carry.hidden);
        auto lg = lstm_grads(grads);
        auto cell_g = nn::lstm_cell_backward(dhead, carry.cell, t.lstm,
                                             lstm_weights(params), lg);
        carry = std::move(cell_g.prev);
        dflat = unwind_fc(params, grads, t, std::move(cell_g.x));
      } else {
        dflat = unwind_fc(params, grads, t, std::move(dhead));
      }

      // conv trunk, in reverse
      Tensor<T> dcur = dflat.reshaped(conv_out_shape_);
      for (int i = static_cast<int>(spec_.conv_layers.size()) - 1; i >= 0; --i) {
        const auto ui = static_cast<size_t>(i);
        Tensor<T> dpre = nn::relu_backward(dcur, t.conv_pre[ui]);
        const Tensor<T>& layer_in = i == 0 ? t.frame : t.conv_post[ui - 1];
        auto cg = nn::conv2d_backward(dpre, layer_in, params[conv_w_[ui]],
                                      spec_.conv_layers[ui].stride);
        add_into(grads[conv_w_[ui]], cg.filters);
        add_into(grads[conv_b_[ui]], cg.bias);
        dcur = std::move(cg.input);
      }
    }
  }

 private:
  struct EntryDef {
    std::string name;
    std::vector<int> shape;
  };

  void layout() {
    int ch = spec_.input_channels;
    int size = spec_.input_size;
    for (size_t i = 0; i < spec_.conv_layers.size(); ++i) {
      const auto& c = spec_.conv_layers[i];
      conv_w_.push_back(add_entry("conv" + std::to_string(i) + ".w",
                                  {c.filters, ch, c.kernel, c.kernel}));
      conv_b_.push_back(add_entry("conv" + std::to_string(i) + ".b", {c.filters}));
      ch = c.filters;
      size = nn::conv_output_extent(size, c.kernel, c.stride);
    }
    conv_out_shape_ = {ch, size, size};

    const int flat = spec_.flatten_width();
    const int u = spec_.head_units;
    if (spec_.head != HeadKind::kLstm) {
      fc_w_ = add_entry("fc.w", {u, flat});
      fc_b_ = add_entry("fc.b", {u});
    }
    if (spec_.recurrent()) {
      const int lin = spec_.lstm_input_width();
      for (const char* gate : {"in", "forget", "cell", "out"}) {
        lstm_w_.push_back(add_entry(std::string("lstm.w_") + gate, {u, lin + u}));
      }
      for (const char* gate : {"in", "forget", "cell", "out"}) {
        lstm_b_.push_back(add_entry(std::string("lstm.b_") + gate, {u}));
      }
    }
    out_w_ = add_entry("out.w", {spec_.num_actions, u});
    out_b_ = add_entry("out.b", {spec_.num_actions});
  }

  size_t add_entry(std::string name, std::vector<int> shape) {
    entry_defs_.push_back({std::move(name), std::move(shape)});
    return entry_defs_.size() - 1;
  }

  void check_params(const ParameterSet<T>& p) const {
    if (p.entries.size() != entry_defs_.size()) {
      throw ShapeError("parameter set has " + std::to_string(p.entries.size()) +
                       " entries, network needs " +
                       std::to_string(entry_defs_.size()));
    }
  }

  void validate_frame(const Tensor<T>& frame) const {
    if (frame.rank() != 3 || frame.dim(0) != spec_.input_channels) {
      throw ShapeError("observation must be [" +
                       std::to_string(spec_.input_channels) + "," +
                       std::to_string(spec_.input_size) + "," +
                       std::to_string(spec_.input_size) +
                       "] (channel axis first), got " + frame.shape_string());
    }
    if (frame.dim(1) != spec_.input_size || frame.dim(2) != spec_.input_size) {
      throw ShapeError("observation spatial extent " + frame.shape_string() +
                       " does not match spec input size " +
                       std::to_string(spec_.input_size));
    }
  }

  nn::LstmWeightsRef<T> lstm_weights(const ParameterSet<T>& p) const {
    return {p[lstm_w_[0]], p[lstm_w_[1]], p[lstm_w_[2]], p[lstm_w_[3]],
            p[lstm_b_[0]], p[lstm_b_[1]], p[lstm_b_[2]], p[lstm_b_[3]]};
  }

  nn::LstmGradsRef<T> lstm_grads(ParameterSet<T>& g) const {
    return {g[lstm_w_[0]], g[lstm_w_[1]], g[lstm_w_[2]], g[lstm_w_[3]],
            g[lstm_b_[0]], g[lstm_b_[1]], g[lstm_b_[2]], g[lstm_b_[3]]};
  }

  // Backward through the fully connected stage (when present). Takes the
  // gradient at its output, returns the gradient at the flattened trunk.
  Tensor<T> unwind_fc(const ParameterSet<T>& params, ParameterSet<T>& grads,
                      const StepTrace& t, Tensor<T> d_out) const {
    if (spec_.head == HeadKind::kLstm) return d_out;
    Tensor<T> d = std::move(d_out);
    if (spec_.relu_after_fc) d = nn::relu_backward(d, t.fc_pre);
    auto fg = nn::linear_backward(d, t.flat, params[fc_w_]);
    add_into(grads[fc_w_], fg.weight);
    add_into(grads[fc_b_], fg.bias);
    return std::move(fg.input);
  }

  NetworkSpec spec_;
  std::vector<EntryDef> entry_defs_;
  std::vector<size_t> conv_w_, conv_b_;
  std::vector<size_t> lstm_w_, lstm_b_;
  size_t fc_w_ = 0, fc_b_ = 0;
  size_t out_w_ = 0, out_b_ = 0;
  std::vector<int> conv_out_shape_;
};

using NetworkF = Network<float>;
using ParamsF = ParameterSet<float>;

}  // namespace rql

#endif  // RQL_NETWORK_HPP
