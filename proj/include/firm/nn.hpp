// Copyright 2026 The firm-planar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FIRM_NN_HPP_
#define FIRM_NN_HPP_

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "firm/autodiff.hpp"

namespace firm {

enum class Activation { kRelu, kSilu, kTanh, kIdentity };

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "silu") return Activation::kSilu;
  if (s == "tanh") return Activation::kTanh;
  if (s == "identity") return Activation::kIdentity;
  throw ConfigError("unknown activation: " + s);
}

inline Tape::Id apply_activation(Tape& t, Tape::Id x, Activation act) {
  switch (act) {
    case Activation::kRelu: return t.relu(x);
    case Activation::kSilu: return t.silu(x);
    case Activation::kTanh: return t.tanh_act(x);
    case Activation::kIdentity: return x;
  }
  return x;
}

// A module owns named parameters and exposes them for the optimizer and
// checkpointing. Inference is const; training mutates only gradients.
class Module {
 public:
  virtual ~Module() = default;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    collect(out);
    return out;
  }

  void zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
  }

  virtual void collect(std::vector<Parameter*>& out) = 0;
};

class Linear : public Module {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng)
      : name_(name),
        weight_(name + ".w", glorot_uniform({in, out}, in, out, rng)),
        bias_(name + ".b", Tensor({out})) {}

  Tape::Id forward(Tape& t, Tape::Id x) const {
    if (t.val(x).dim(-1) != weight_.value.shape[0])
      throw DimensionError("layer '" + name_ + "': input dim " +
                           std::to_string(t.val(x).dim(-1)) + " != expected " +
                           std::to_string(weight_.value.shape[0]));
    auto& self = const_cast<Linear&>(*this);
    return t.add(t.matmul(x, t.param(self.weight_)), t.param(self.bias_));
  }

  void collect(std::vector<Parameter*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  int in_dim() const { return weight_.value.shape[0]; }
  int out_dim() const { return weight_.value.shape[1]; }

 private:
  std::string name_;
  Parameter weight_, bias_;
};

// ---------------------------------------------------------------------------
// MLP
// ---------------------------------------------------------------------------

struct MlpSpec {
  std::vector<int> layer_widths;  // input, hidden..., output
  Activation activation = Activation::kRelu;
  // The final layer is linear; hidden layers use `activation`.

  void validate() const {
    if (layer_widths.size() < 2)
      throw ConfigError("MlpSpec needs at least input and output widths");
    for (int w : layer_widths)
      if (w <= 0) throw ConfigError("MlpSpec widths must be positive");
  }
};

class Mlp : public Module {
 public:
  Mlp() = default;
  Mlp(const std::string& name, MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    for (size_t i = 0; i + 1 < spec_.layer_widths.size(); ++i)
      layers_.emplace_back(name + ".fc" + std::to_string(i), spec_.layer_widths[i],
                           spec_.layer_widths[i + 1], rng);
  }

  Tape::Id forward(Tape& t, Tape::Id x) const {
    for (size_t i = 0; i < layers_.size(); ++i) {
      x = layers_[i].forward(t, x);
      if (i + 1 < layers_.size()) x = apply_activation(t, x, spec_.activation);
    }
    return x;
  }

  // Convenience inference entry point for a single vector or batch.
  Tensor infer(const Tensor& in) const {
    Tape t;
    return t.val(forward(t, t.input(in)));
  }

  void collect(std::vector<Parameter*>& out) override {
    for (auto& l : layers_) l.collect(out);
  }

  const MlpSpec& spec() const { return spec_; }
  std::vector<Linear>& layers() { return layers_; }

 private:
  MlpSpec spec_;
  std::vector<Linear> layers_;
};

// ---------------------------------------------------------------------------
// Temporal convolution
// ---------------------------------------------------------------------------

class Conv1d : public Module {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, int in_ch, int out_ch, int kernel, int stride,
         Rng& rng)
      : stride_(stride),
        weight_(name + ".w", glorot_uniform({kernel, in_ch, out_ch},
                                            kernel * in_ch, out_ch, rng)),
        bias_(name + ".b", Tensor({out_ch})) {}

  static int output_length(int T, int kernel, int stride) {
    if (T < kernel)
      throw DimensionError("conv input length " + std::to_string(T) +
                           " shorter than kernel " + std::to_string(kernel));
    return (T - kernel) / stride + 1;
  }

  Tape::Id forward(Tape& t, Tape::Id x) const {
    auto& self = const_cast<Conv1d&>(*this);
    return t.conv1d(x, t.param(self.weight_), t.param(self.bias_), stride_);
  }

  void collect(std::vector<Parameter*>& out) override {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  int stride() const { return stride_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  int stride_ = 1;
  Parameter weight_, bias_;
};

// ---------------------------------------------------------------------------
// Attention
// ---------------------------------------------------------------------------

// Additive causal mask: 0 where j <= i, -inf above the diagonal.
inline Tensor causal_mask(int T) {
  Tensor m({T, T});
  for (int i = 0; i < T; ++i)
    for (int j = 0; j < T; ++j)
      m.data[static_cast<int64_t>(i) * T + j] = j <= i ? 0.0 : -1e30;
  return m;
}

class CausalSelfAttention : public Module {
 public:
  CausalSelfAttention() = default;
  CausalSelfAttention(const std::string& name, int dim, int heads, Rng& rng)
      : dim_(dim), heads_(heads) {
    if (heads <= 0 || dim % heads != 0)
      throw ConfigError("attention dim " + std::to_string(dim) +
                        " not divisible by heads " + std::to_string(heads));
    wq_ = Linear(name + ".q", dim, dim, rng);
    wk_ = Linear(name + ".k", dim, dim, rng);
    wv_ = Linear(name + ".v", dim, dim, rng);
    wo_ = Linear(name + ".o", dim, dim, rng);
  }

  // x [B,T,dim] -> [B,T,dim]; mask position t attends to positions <= t.
  Tape::Id forward(Tape& t, Tape::Id x) const {
    const Tensor& tx = t.val(x);
    if (tx.ndim() != 3 || tx.shape[2] != dim_)
      throw DimensionError("attention: expect [B,T," + std::to_string(dim_) +
                           "], got " + shape_str(tx.shape));
    int T = tx.shape[1];
    int dh = dim_ / heads_;
    auto q = t.split_heads(wq_.forward(t, x), heads_);
    auto k = t.split_heads(wk_.forward(t, x), heads_);
    auto v = t.split_heads(wv_.forward(t, x), heads_);
    auto scores = t.scale(t.bmm_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
    Tensor mask = causal_mask(T);
    auto att = t.softmax_lastdim(scores, &mask);
    auto ctx = t.merge_heads(t.bmm(att, v), heads_);
    return wo_.forward(t, ctx);
  }

  void collect(std::vector<Parameter*>& out) override {
    wq_.collect(out);
    wk_.collect(out);
    wv_.collect(out);
    wo_.collect(out);
  }

  int dim() const { return dim_; }
  int heads() const { return heads_; }

 private:
  int dim_ = 0, heads_ = 0;
  Linear wq_, wk_, wv_, wo_;
};

// Pre-LN transformer block with a silu MLP.
class TransformerBlock : public Module {
 public:
  TransformerBlock() = default;
  TransformerBlock(const std::string& name, int dim, int heads, int mlp_mult,
                   Rng& rng)
      : attn_(name + ".attn", dim, heads, rng),
        ln1_g_(name + ".ln1.g", Tensor::full({dim}, 1.0)),
        ln1_b_(name + ".ln1.b", Tensor({dim})),
        ln2_g_(name + ".ln2.g", Tensor::full({dim}, 1.0)),
        ln2_b_(name + ".ln2.b", Tensor({dim})),
        fc1_(name + ".fc1", dim, dim * mlp_mult, rng),
        fc2_(name + ".fc2", dim * mlp_mult, dim, rng) {}

  Tape::Id forward(Tape& t, Tape::Id x) const {
    auto& self = const_cast<TransformerBlock&>(*this);
    auto h = t.layer_norm(x, t.param(self.ln1_g_), t.param(self.ln1_b_));
    x = t.add(x, attn_.forward(t, h));
    auto m = t.layer_norm(x, t.param(self.ln2_g_), t.param(self.ln2_b_));
    m = fc2_.forward(t, t.silu(fc1_.forward(t, m)));
    return t.add(x, m);
  }

  void collect(std::vector<Parameter*>& out) override {
    attn_.collect(out);
    out.push_back(&ln1_g_);
    out.push_back(&ln1_b_);
    out.push_back(&ln2_g_);
    out.push_back(&ln2_b_);
    fc1_.collect(out);
    fc2_.collect(out);
  }

 private:
  CausalSelfAttention attn_;
  Parameter ln1_g_, ln1_b_, ln2_g_, ln2_b_;
  Linear fc1_, fc2_;
};

// Sinusoidal embedding for a scalar position/timestep.
inline Tensor sinusoidal_embedding(double pos, int dim) {
  Tensor out({dim});
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::exp(-std::log(10000.0) * i / std::max(1, half - 1));
    out.data[i] = std::sin(pos * freq);
    out.data[half + i] = std::cos(pos * freq);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer: bias-corrected adaptive moments
// ---------------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i] = Tensor(params_[i]->value.shape);
      v_[i] = Tensor(params_[i]->value.shape);
    }
  }

  // One update from the currently accumulated gradients. Parameters with a
  // non-finite gradient are skipped and counted, not updated.
  void step() {
    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Parameter& p = *params_[i];
      if (!p.grad.finite()) {
        ++skipped_updates_;
        continue;
      }
      for (int64_t j = 0; j < p.value.numel(); ++j) {
        double g = p.grad.data[j];
        m_[i].data[j] = cfg_.beta1 * m_[i].data[j] + (1.0 - cfg_.beta1) * g;
        v_[i].data[j] = cfg_.beta2 * v_[i].data[j] + (1.0 - cfg_.beta2) * g * g;
        double mhat = m_[i].data[j] / bc1;
        double vhat = v_[i].data[j] / bc2;
        p.value.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  int64_t skipped_updates() const { return skipped_updates_; }
  int64_t steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int64_t t_ = 0;
  int64_t skipped_updates_ = 0;
};

// Global L2 gradient-norm clip across a parameter set.
inline double clip_grad_norm(const std::vector<Parameter*>& params, double max_norm) {
  double total = 0.0;
  for (Parameter* p : params)
    for (double g : p->grad.data) total += g * g;
  total = std::sqrt(total);
  if (total > max_norm && total > 0.0) {
    double s = max_norm / total;
    for (Parameter* p : params)
      for (double& g : p->grad.data) g *= s;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Checkpoint container
//
// Layout (little-endian):
//   magic  "FIRMCKP1" (8 bytes)
//   u32    version (1)
//   meta   string (u32 length + bytes), free-form JSON
//   u32    tensor count
//   per tensor: name string, u8 ndim, u32 dims[ndim], f64 payload
// ---------------------------------------------------------------------------

struct Checkpoint {
  std::string meta;
  std::vector<std::pair<std::string, Tensor>> tensors;

  void add(const std::string& name, const Tensor& t) { tensors.emplace_back(name, t); }

  const Tensor& get(const std::string& name) const {
    for (auto& [n, t] : tensors)
      if (n == name) return t;
    throw IoError("checkpoint tensor not found: " + name);
  }

  bool has(const std::string& name) const {
    for (auto& [n, t] : tensors)
      if (n == name) return true;
    return false;
  }

  void save(const std::string& path) const {
    BinaryWriter w;
    w.raw("FIRMCKP1");
    w.u32(1);
    w.str(meta);
    w.u32(static_cast<uint32_t>(tensors.size()));
    for (auto& [name, t] : tensors) {
      w.str(name);
      w.u8(static_cast<uint8_t>(t.ndim()));
      for (int d : t.shape) w.u32(static_cast<uint32_t>(d));
      w.f64s(t.data);
    }
    w.save(path);
  }

  static Checkpoint load(const std::string& path) {
    BinaryReader r = BinaryReader::load(path);
    char magic[8];
    r.get(magic, 8);
    if (std::string(magic, 8) != "FIRMCKP1")
      throw IoError("not a checkpoint file: " + path);
    uint32_t version = r.u32();
    if (version != 1) throw IoError("unsupported checkpoint version");
    Checkpoint c;
    c.meta = r.str();
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
      std::string name = r.str();
      int ndim = r.u8();
      std::vector<int> shape(static_cast<size_t>(ndim));
      for (int d = 0; d < ndim; ++d) shape[static_cast<size_t>(d)] = static_cast<int>(r.u32());
      Tensor t(shape);
      r.f64s(t.data, static_cast<size_t>(t.numel()));
      c.tensors.emplace_back(std::move(name), std::move(t));
    }
    return c;
  }
};

// Snapshot / restore a module's parameters by name.
inline void save_module(Checkpoint& c, Module& m) {
  for (Parameter* p : m.parameters()) c.add(p->name, p->value);
}

inline void load_module(const Checkpoint& c, Module& m) {
  for (Parameter* p : m.parameters()) {
    const Tensor& t = c.get(p->name);
    if (t.shape != p->value.shape)
      throw IoError("checkpoint shape mismatch for " + p->name + ": file " +
                    shape_str(t.shape) + " vs model " + shape_str(p->value.shape));
    p->value = t;
  }
}

}  // namespace firm

#endif  // FIRM_NN_HPP_
