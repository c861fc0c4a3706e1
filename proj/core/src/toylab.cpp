// SPDX-License-Identifier: Apache-2.0
#include "ftlab/toylab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ftlab/error.hpp"
#include "ftlab/kvtext.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::toy {

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "gelu"; }

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::Relu;
  if (text == "gelu") return Activation::Gelu;
  throw Error("unknown activation '" + std::string(text) + "'");
}

int ToyArchitecture::window() const {
  if (auto* p = std::get_if<PatchifyStem>(&stem)) return p->patch;
  return std::get<OverlapStem>(stem).window;
}

int ToyArchitecture::stride() const {
  if (auto* p = std::get_if<PatchifyStem>(&stem)) return p->patch;
  return std::get<OverlapStem>(stem).stride;
}

int ToyArchitecture::num_tokens() const {
  return (input_length - window()) / stride() + 1;
}

std::string ToyArchitecture::stem_name() const {
  return std::holds_alternative<PatchifyStem>(stem) ? "patchify" : "overlap";
}

void validate(const ToyArchitecture& arch) {
  if (auto* p = std::get_if<PatchifyStem>(&arch.stem)) {
    if (p->patch < 1 || arch.input_length % p->patch != 0) {
      throw Error("arch: input length must be divisible by the patch size");
    }
  } else {
    const auto& o = std::get<OverlapStem>(arch.stem);
    if (o.stride < 1 || o.window <= o.stride) {
      throw Error("arch: overlap stem needs 1 <= stride < window");
    }
    if (arch.input_length < o.window || (arch.input_length - o.window) % o.stride) {
      throw Error("arch: (input_length - window) must be a multiple of stride");
    }
  }
  if (arch.embed_dim < 1 || arch.num_classes < 2) {
    throw Error("arch: need embed_dim >= 1 and num_classes >= 2");
  }
  for (int h : arch.hidden) {
    if (h < 1) throw Error("arch: hidden widths must be >= 1");
  }
}

std::map<std::string, std::string> arch_to_metadata(const ToyArchitecture& arch) {
  std::map<std::string, std::string> m;
  m["arch.stem"] = arch.stem_name();
  if (auto* p = std::get_if<PatchifyStem>(&arch.stem)) {
    m["arch.patch"] = std::to_string(p->patch);
  } else {
    const auto& o = std::get<OverlapStem>(arch.stem);
    m["arch.window"] = std::to_string(o.window);
    m["arch.stride"] = std::to_string(o.stride);
  }
  m["arch.input_length"] = std::to_string(arch.input_length);
  m["arch.embed_dim"] = std::to_string(arch.embed_dim);
  std::string hidden;
  for (std::size_t i = 0; i < arch.hidden.size(); ++i) {
    if (i) hidden += ',';
    hidden += std::to_string(arch.hidden[i]);
  }
  m["arch.hidden"] = hidden.empty() ? "none" : hidden;
  m["arch.activation"] = to_string(arch.activation);
  m["arch.num_classes"] = std::to_string(arch.num_classes);
  return m;
}

ToyArchitecture arch_from_metadata(const std::map<std::string, std::string>& meta) {
  auto get = [&](const char* key) -> const std::string& {
    auto it = meta.find(key);
    if (it == meta.end()) {
      throw Error(std::string("model metadata lacks '") + key + "'");
    }
    return it->second;
  };
  auto get_int = [&](const char* key) { return int(kv::to_int(get(key))); };
  ToyArchitecture a;
  const auto& stem = get("arch.stem");
  if (stem == "patchify") {
    a.stem = PatchifyStem{get_int("arch.patch")};
  } else if (stem == "overlap") {
    a.stem = OverlapStem{get_int("arch.window"), get_int("arch.stride")};
  } else {
    throw Error("unknown stem '" + stem + "'");
  }
  a.input_length = get_int("arch.input_length");
  a.embed_dim = get_int("arch.embed_dim");
  a.hidden.clear();
  if (get("arch.hidden") != "none") {
    for (auto h : kv::to_int_list(get("arch.hidden"))) a.hidden.push_back(int(h));
  }
  a.activation = parse_activation(get("arch.activation"));
  a.num_classes = get_int("arch.num_classes");
  validate(a);
  return a;
}

namespace {

struct LayerShape {
  int in;
  int out;
};

// Stem first (in = window), then hidden layers, then the head.
std::vector<LayerShape> layer_shapes(const ToyArchitecture& arch) {
  std::vector<LayerShape> shapes;
  shapes.push_back({arch.window(), arch.embed_dim});
  int width = arch.feature_dim();
  for (int h : arch.hidden) {
    shapes.push_back({width, h});
    width = h;
  }
  shapes.push_back({width, arch.num_classes});
  return shapes;
}

void draw_uniform(std::vector<double>& values, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : values) v = dist(rng);
}

inline double act(Activation a, double x) {
  if (a == Activation::Relu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

inline double act_grad(Activation a, double x) {
  if (a == Activation::Relu) return x > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

void check_model(const ToyArchitecture& arch, const ModelState& model) {
  const auto shapes = layer_shapes(arch);
  if (model.groups.size() != shapes.size()) {
    throw Error("model has " + std::to_string(model.groups.size()) +
                " groups, architecture needs " + std::to_string(shapes.size()));
  }
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto want = std::size_t(shapes[l].out) * (shapes[l].in + 1);
    if (model.groups[l].numel() != want) {
      throw Error("group " + model.groups[l].name + " has " +
                  std::to_string(model.groups[l].numel()) + " values, expected " +
                  std::to_string(want));
    }
  }
}

int batch_size_of(const ToyArchitecture& arch, std::span<const double> inputs) {
  const auto n = std::size_t(arch.input_length);
  if (inputs.size() % n != 0) {
    throw Error("input of " + std::to_string(inputs.size()) +
                " values is not a whole number of length-" + std::to_string(n) +
                " signals");
  }
  return static_cast<int>(inputs.size() / n);
}

// out[b][o] = bias[o] + sum_i W[o][i] * in[b][i]
void dense(const std::vector<double>& params, LayerShape s, const double* in,
           int batch, double* out) {
  const double* w = params.data();
  const double* bias = w + std::size_t(s.out) * s.in;
  for (int b = 0; b < batch; ++b) {
    const double* x = in + std::size_t(b) * s.in;
    double* y = out + std::size_t(b) * s.out;
    for (int o = 0; o < s.out; ++o) {
      const double* row = w + std::size_t(o) * s.in;
      double acc = bias[o];
      for (int i = 0; i < s.in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
  }
}

// Accumulates dW, db into grad and writes d_in (if non-null).
void dense_backward(const std::vector<double>& params, LayerShape s,
                    const double* in, const double* d_out, int batch,
                    std::vector<double>& grad, double* d_in) {
  const double* w = params.data();
  double* gw = grad.data();
  double* gb = gw + std::size_t(s.out) * s.in;
  for (int b = 0; b < batch; ++b) {
    const double* x = in + std::size_t(b) * s.in;
    const double* dy = d_out + std::size_t(b) * s.out;
    for (int o = 0; o < s.out; ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      double* grow = gw + std::size_t(o) * s.in;
      for (int i = 0; i < s.in; ++i) grow[i] += g * x[i];
      gb[o] += g;
    }
  }
  if (!d_in) return;
  std::fill(d_in, d_in + std::size_t(batch) * s.in, 0.0);
  for (int b = 0; b < batch; ++b) {
    const double* dy = d_out + std::size_t(b) * s.out;
    double* dx = d_in + std::size_t(b) * s.in;
    for (int o = 0; o < s.out; ++o) {
      const double g = dy[o];
      if (g == 0.0) continue;
      const double* row = w + std::size_t(o) * s.in;
      for (int i = 0; i < s.in; ++i) dx[i] += g * row[i];
    }
  }
}

}  // namespace

ModelState init_model(const ToyArchitecture& arch, std::uint64_t seed) {
  validate(arch);
  const auto shapes = layer_shapes(arch);
  Rng rng(derive_seed(seed, "init"));
  ModelState m;
  m.metadata = arch_to_metadata(arch);
  m.metadata["init_seed"] = std::to_string(seed);
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    ParameterGroup g;
    g.id = static_cast<GroupId>(l);
    g.depth_index = static_cast<int>(l);
    if (l == 0) {
      g.name = "stem";
      g.role = LayerRole::Embed;
    } else if (l + 1 == shapes.size()) {
      g.name = "head";
      g.role = LayerRole::Head;
    } else {
      g.name = "hidden." + std::to_string(l - 1);
      g.role = LayerRole::Middle;
    }
    g.values.resize(std::size_t(shapes[l].out) * (shapes[l].in + 1));
    draw_uniform(g.values, shapes[l].in, rng);
    m.groups.push_back(std::move(g));
  }
  return m;
}

ForwardCache forward(const ToyArchitecture& arch, const ModelState& model,
                     std::span<const double> inputs) {
  check_model(arch, model);
  const int B = batch_size_of(arch, inputs);
  const auto shapes = layer_shapes(arch);
  const int T = arch.num_tokens();
  const int stride = arch.stride();
  const int n = arch.input_length;

  ForwardCache c;
  c.batch = B;
  const std::size_t hidden_layers = shapes.size() - 1;  // stem + hidden
  c.pre.resize(hidden_layers);
  c.post.resize(hidden_layers);

  // Stem: the same (embed_dim x window) map on every token.
  {
    const LayerShape s = shapes[0];
    const auto& p = model.groups[0].values;
    const double* w = p.data();
    const double* bias = w + std::size_t(s.out) * s.in;
    auto& pre = c.pre[0];
    pre.resize(std::size_t(B) * T * s.out);
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        const double* x = inputs.data() + std::size_t(b) * n + std::size_t(t) * stride;
        double* y = pre.data() + (std::size_t(b) * T + t) * s.out;
        for (int j = 0; j < s.out; ++j) {
          const double* row = w + std::size_t(j) * s.in;
          double acc = bias[j];
          for (int k = 0; k < s.in; ++k) acc += row[k] * x[k];
          y[j] = acc;
        }
      }
    }
  }
  for (std::size_t l = 0; l < hidden_layers; ++l) {
    if (l > 0) {
      c.pre[l].resize(std::size_t(B) * shapes[l].out);
      dense(model.groups[l].values, shapes[l], c.post[l - 1].data(), B,
            c.pre[l].data());
    }
    c.post[l].resize(c.pre[l].size());
    for (std::size_t i = 0; i < c.pre[l].size(); ++i) {
      c.post[l][i] = act(arch.activation, c.pre[l][i]);
    }
  }
  c.logits.resize(std::size_t(B) * arch.num_classes);
  dense(model.groups.back().values, shapes.back(), c.post.back().data(), B,
        c.logits.data());
  return c;
}

double cross_entropy(const ForwardCache& cache, std::span<const int> labels,
                     int num_classes) {
  if (labels.size() != std::size_t(cache.batch)) throw Error("label count mismatch");
  double total = 0.0;
  for (int b = 0; b < cache.batch; ++b) {
    const double* z = cache.logits.data() + std::size_t(b) * num_classes;
    const double mx = *std::max_element(z, z + num_classes);
    double sum = 0.0;
    for (int k = 0; k < num_classes; ++k) sum += std::exp(z[k] - mx);
    const int y = labels[b];
    if (y < 0 || y >= num_classes) throw Error("label out of range");
    total += (std::log(sum) + mx) - z[y];
  }
  return total / double(cache.batch);
}

GradientVector backward(const ToyArchitecture& arch, const ModelState& model,
                        std::span<const double> inputs,
                        std::span<const int> labels, const ForwardCache& cache,
                        double loss_scale) {
  check_model(arch, model);
  const int B = cache.batch;
  if (batch_size_of(arch, inputs) != B || labels.size() != std::size_t(B)) {
    throw Error("backward: batch does not match the forward cache");
  }
  const auto shapes = layer_shapes(arch);
  const int C = arch.num_classes;
  GradientVector grads = GradientVector::zeros_like(model);

  // d loss / d logits for mean cross-entropy.
  std::vector<double> d_out(std::size_t(B) * C);
  for (int b = 0; b < B; ++b) {
    const double* z = cache.logits.data() + std::size_t(b) * C;
    double* d = d_out.data() + std::size_t(b) * C;
    const double mx = *std::max_element(z, z + C);
    double sum = 0.0;
    for (int k = 0; k < C; ++k) {
      d[k] = std::exp(z[k] - mx);
      sum += d[k];
    }
    for (int k = 0; k < C; ++k) d[k] = loss_scale * (d[k] / sum) / double(B);
    d[labels[b]] -= loss_scale / double(B);
  }

  // Head and hidden layers, top down.
  std::vector<double> d_in;
  for (std::size_t l = shapes.size() - 1; l >= 1; --l) {
    const auto& in = cache.post[l - 1];
    d_in.assign(in.size(), 0.0);
    dense_backward(model.groups[l].values, shapes[l], in.data(), d_out.data(), B,
                   grads.groups[l].values, d_in.data());
    // Through the activation of layer l-1.
    const auto& pre = cache.pre[l - 1];
    for (std::size_t i = 0; i < d_in.size(); ++i) {
      d_in[i] *= act_grad(arch.activation, pre[i]);
    }
    d_out.swap(d_in);
  }

  // Stem: accumulate over every token of every example.
  {
    const LayerShape s = shapes[0];
    const int T = arch.num_tokens();
    const int stride = arch.stride();
    const int n = arch.input_length;
    double* gw = grads.groups[0].values.data();
    double* gb = gw + std::size_t(s.out) * s.in;
    for (int b = 0; b < B; ++b) {
      for (int t = 0; t < T; ++t) {
        const double* x = inputs.data() + std::size_t(b) * n + std::size_t(t) * stride;
        const double* dz = d_out.data() + (std::size_t(b) * T + t) * s.out;
        for (int j = 0; j < s.out; ++j) {
          const double g = dz[j];
          if (g == 0.0) continue;
          double* grow = gw + std::size_t(j) * s.in;
          for (int k = 0; k < s.in; ++k) grow[k] += g * x[k];
          gb[j] += g;
        }
      }
    }
  }
  return grads;
}

BatchEval loss_and_gradient(const ToyArchitecture& arch, const ModelState& model,
                            std::span<const double> inputs,
                            std::span<const int> labels, double loss_scale) {
  auto cache = forward(arch, model, inputs);
  BatchEval ev;
  ev.loss = loss_scale * cross_entropy(cache, labels, arch.num_classes);
  ev.grad = backward(arch, model, inputs, labels, cache, loss_scale);
  return ev;
}

BatchObjective make_objective(const ToyArchitecture& arch, const Dataset& data,
                              double loss_scale) {
  return [arch, &data, loss_scale](const ModelState& model,
                                   std::span<const std::size_t> idx) {
    std::vector<double> inputs;
    std::vector<int> labels;
    data.gather(idx, inputs, labels);
    return loss_and_gradient(arch, model, inputs, labels, loss_scale);
  };
}

std::vector<int> predict(const ToyArchitecture& arch, const ModelState& model,
                         std::span<const double> inputs) {
  auto cache = forward(arch, model, inputs);
  const int C = arch.num_classes;
  std::vector<int> out(cache.batch);
  for (int b = 0; b < cache.batch; ++b) {
    const double* z = cache.logits.data() + std::size_t(b) * C;
    out[b] = static_cast<int>(std::max_element(z, z + C) - z);
  }
  return out;
}

double accuracy(const ToyArchitecture& arch, const ModelState& model,
                const Dataset& data) {
  if (data.size() == 0) throw Error("accuracy of an empty dataset");
  constexpr std::size_t kChunk = 256;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, data.size() - start);
    auto rows = std::span<const double>(data.x).subspan(
        start * std::size_t(data.input_length), count * std::size_t(data.input_length));
    auto pred = predict(arch, model, rows);
    for (std::size_t i = 0; i < count; ++i) correct += pred[i] == data.y[start + i];
  }
  return double(correct) / double(data.size());
}

ModelState reinit_head(const ModelState& model, std::uint64_t seed) {
  const auto arch = arch_from_metadata(model.metadata);
  check_model(arch, model);
  ModelState out = model;
  auto& head = out.groups.back();
  const int fan_in = layer_shapes(arch).back().in;
  Rng rng(derive_seed(seed, "head"));
  draw_uniform(head.values, fan_in, rng);
  out.metadata["head_seed"] = std::to_string(seed);
  return out;
}

ModelState pretrain(const ToyArchitecture& arch, const OptimizerKind& kind,
                    const ToyTask& task, const PretrainOptions& options,
                    std::uint64_t seed) {
  if (options.steps < 0 || options.batch_size < 1) {
    throw Error("pretrain: need steps >= 0 and batch_size >= 1");
  }
  if (task.pretrain.input_length != arch.input_length ||
      task.pretrain.num_classes != arch.num_classes) {
    throw Error("pretrain: task and architecture disagree on shapes");
  }
  ModelState model = init_model(arch, seed);
  model.metadata["pretrain_optimizer"] = kind_name(kind);
  model.metadata["pretrain_steps"] = std::to_string(options.steps);
  model.metadata["pretrain_lr"] = kv::format_double(options.lr);
  if (options.steps == 0) return model;

  const auto& data = task.pretrain;
  if (data.size() < std::size_t(options.batch_size)) {
    throw Error("pretrain: fewer examples than one batch");
  }
  auto state = init_state(kind, model, {});
  Rng rng(derive_seed(seed, "pretrain-order"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  std::vector<double> inputs;
  std::vector<int> labels;
  for (int s = 0; s < options.steps; ++s) {
    if (cursor + std::size_t(options.batch_size) > order.size()) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    std::span<const std::size_t> idx(order.data() + cursor, std::size_t(options.batch_size));
    cursor += std::size_t(options.batch_size);
    data.gather(idx, inputs, labels);
    auto ev = loss_and_gradient(arch, model, inputs, labels);
    if (!std::isfinite(ev.loss)) {
      throw DivergenceError("pretrain diverged at step " + std::to_string(s) +
                            " (" + kind_name(kind) + ", lr " +
                            kv::format_double(options.lr) + ")");
    }
    try {
      step(state, model, ev.grad, options.lr, {});
    } catch (const NonFiniteGradient& err) {
      throw DivergenceError("pretrain diverged at step " + std::to_string(s) + ": " + err.what());
    }
  }
  return model;
}

}  // namespace ftlab::toy
