// SPDX-License-Identifier: Apache-2.0
#include "ftlab/toytask.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ftlab/error.hpp"
#include "ftlab/rng.hpp"

namespace ftlab::toy {

std::span<const double> Dataset::row(std::size_t i) const {
  return std::span<const double>(x).subspan(i * std::size_t(input_length),
                                            std::size_t(input_length));
}

void Dataset::gather(std::span<const std::size_t> indices,
                     std::vector<double>& inputs, std::vector<int>& labels) const {
  inputs.resize(indices.size() * std::size_t(input_length));
  labels.resize(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = row(indices[r]);
    std::copy(src.begin(), src.end(), inputs.begin() + r * std::size_t(input_length));
    labels[r] = y[indices[r]];
  }
}

void PatchAffine::apply(std::span<const double> in, std::span<double> out) const {
  for (int i = 0; i < dim; ++i) {
    double s = offset[i];
    for (int j = 0; j < dim; ++j) s += matrix[std::size_t(i) * dim + j] * in[j];
    out[i] = s;
  }
}

namespace {

using Frame = std::vector<std::vector<double>>;  // list of unit column vectors

// 2k orthonormal vectors in R^p by Gram-Schmidt on Gaussian draws.
Frame orthonormal_frame(int p, int count, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Frame out;
  while (static_cast<int>(out.size()) < count) {
    std::vector<double> v(p);
    for (auto& e : v) e = normal(rng);
    for (const auto& q : out) {
      double dot = 0.0;
      for (int i = 0; i < p; ++i) dot += v[i] * q[i];
      for (int i = 0; i < p; ++i) v[i] -= dot * q[i];
    }
    double norm = 0.0;
    for (double e : v) norm += e * e;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (auto& e : v) e /= norm;
    out.push_back(std::move(v));
  }
  return out;
}

struct Generator {
  const ToyTaskConfig& cfg;
  Frame u;  // k vectors
  Frame w;  // k vectors
  std::vector<double> rule_pretrain;  // C x (P k)
  std::vector<double> rule_finetune;
  int patches;

  int label(const std::vector<double>& z, const std::vector<double>& rule) const {
    const int dim = patches * cfg.latent_dim;
    int best = 0;
    double best_score = -INFINITY;
    for (int c = 0; c < cfg.num_classes; ++c) {
      double s = 0.0;
      for (int i = 0; i < dim; ++i) s += rule[std::size_t(c) * dim + i] * z[i];
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    return best;
  }

  // angle(p) gives the rotation of patch p from span(U) towards span(W).
  template <class AngleFn>
  Dataset sample(int n, std::uint64_t seed, const std::vector<double>& rule,
                 AngleFn angle, const PatchAffine* post) const {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset d;
    d.input_length = cfg.input_length;
    d.num_classes = cfg.num_classes;
    d.x.assign(std::size_t(n) * cfg.input_length, 0.0);
    d.y.resize(n);
    const int k = cfg.latent_dim;
    const int p = cfg.patch;
    std::vector<double> z(std::size_t(patches) * k);
    std::vector<double> patch(p), mapped(p);
    for (int r = 0; r < n; ++r) {
      for (auto& e : z) e = normal(rng);
      double* out = d.x.data() + std::size_t(r) * cfg.input_length;
      for (int t = 0; t < patches; ++t) {
        const double a = angle(rng);
        const double ca = std::cos(a), sa = std::sin(a);
        for (int i = 0; i < p; ++i) patch[i] = cfg.noise * normal(rng);
        for (int j = 0; j < k; ++j) {
          const double zj = z[std::size_t(t) * k + j];
          for (int i = 0; i < p; ++i) {
            patch[i] += zj * (ca * u[j][i] + sa * w[j][i]);
          }
        }
        if (post) {
          post->apply(patch, mapped);
          std::copy(mapped.begin(), mapped.end(), out + std::size_t(t) * p);
        } else {
          std::copy(patch.begin(), patch.end(), out + std::size_t(t) * p);
        }
      }
      d.y[r] = label(z, rule);
    }
    return d;
  }
};

PatchAffine rotation_map(const Frame& u, const Frame& w, int p, double angle,
                         std::span<const double> offset) {
  PatchAffine a;
  a.dim = p;
  a.matrix.assign(std::size_t(p) * p, 0.0);
  for (int i = 0; i < p; ++i) a.matrix[std::size_t(i) * p + i] = 1.0;
  const double c = std::cos(angle), s = std::sin(angle);
  for (std::size_t j = 0; j < u.size(); ++j) {
    for (int r = 0; r < p; ++r) {
      for (int col = 0; col < p; ++col) {
        const double uu = u[j][r] * u[j][col] + w[j][r] * w[j][col];
        const double rot = w[j][r] * u[j][col] - u[j][r] * w[j][col];
        a.matrix[std::size_t(r) * p + col] += (c - 1.0) * uu + s * rot;
      }
    }
  }
  a.offset.assign(offset.begin(), offset.end());
  return a;
}

}  // namespace

ToyTask make_task(const ToyTaskConfig& cfg) {
  if (cfg.patch < 1 || cfg.input_length < cfg.patch ||
      cfg.input_length % cfg.patch != 0) {
    throw Error("task: input_length must be a positive multiple of patch");
  }
  if (cfg.latent_dim < 1 || 2 * cfg.latent_dim > cfg.patch) {
    throw Error("task: need 1 <= latent_dim <= patch/2");
  }
  if (cfg.num_classes < 2) throw Error("task: need at least 2 classes");
  if (cfg.noise < 0.0 || cfg.ood_offset_scale < 0.0) {
    throw Error("task: noise and offset scale must be >= 0");
  }
  if (cfg.n_pretrain < 0 || cfg.n_train < 1 || cfg.n_val < 1 || cfg.n_test < 1 ||
      cfg.n_ood < 1) {
    throw Error("task: sample counts must be positive");
  }

  Rng frame_rng(derive_seed(cfg.seed, "task-frame"));
  Frame frame = orthonormal_frame(cfg.patch, 2 * cfg.latent_dim, frame_rng);
  Generator gen{cfg, {}, {}, {}, {}, cfg.input_length / cfg.patch};
  gen.u.assign(frame.begin(), frame.begin() + cfg.latent_dim);
  gen.w.assign(frame.begin() + cfg.latent_dim, frame.end());

  const int rule_size = cfg.num_classes * gen.patches * cfg.latent_dim;
  auto draw_rule = [&](std::string_view tag) {
    Rng rng(derive_seed(cfg.seed, tag));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> r(rule_size);
    for (auto& e : r) e = normal(rng);
    return r;
  };
  gen.rule_pretrain = draw_rule("task-rule-pretrain");
  gen.rule_finetune = draw_rule("task-rule-finetune");

  std::vector<double> offset(cfg.patch);
  {
    Rng rng(derive_seed(cfg.seed, "task-offset"));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& e : offset) e = cfg.ood_offset_scale * normal(rng);
  }
  const double ood_angle = cfg.ood_angle_deg * std::numbers::pi / 180.0;

  ToyTask task;
  task.config = cfg;
  task.ood_map = rotation_map(gen.u, gen.w, cfg.patch, ood_angle, offset);
  task.frame_u = gen.u;
  task.frame_w = gen.w;
  task.rule_pretrain = gen.rule_pretrain;
  task.rule_finetune = gen.rule_finetune;

  auto id_angle = [](Rng&) { return 0.0; };
  auto pretrain_angle = [ood_angle](Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, ood_angle)(rng);
  };
  task.pretrain = gen.sample(cfg.n_pretrain, derive_seed(cfg.seed, "task-pretrain"),
                             gen.rule_pretrain, pretrain_angle, nullptr);
  task.train = gen.sample(cfg.n_train, derive_seed(cfg.seed, "task-train"),
                          gen.rule_finetune, id_angle, nullptr);
  task.val = gen.sample(cfg.n_val, derive_seed(cfg.seed, "task-val"),
                        gen.rule_finetune, id_angle, nullptr);
  task.test = gen.sample(cfg.n_test, derive_seed(cfg.seed, "task-test"),
                         gen.rule_finetune, id_angle, nullptr);
  task.ood = gen.sample(cfg.n_ood, derive_seed(cfg.seed, "task-ood"),
                        gen.rule_finetune, id_angle, &task.ood_map);
  return task;
}

}  // namespace ftlab::toy
