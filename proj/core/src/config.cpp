// SPDX-License-Identifier: Apache-2.0
#include "ftlab/config.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include "ftlab/error.hpp"
#include "ftlab/rng.hpp"

namespace ftlab {
namespace {

std::vector<std::string> split_names(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    auto part = text.substr(start, pos == std::string_view::npos ? pos : pos - start);
    while (!part.empty() && (part.front() == ' ' || part.front() == '\t')) part.remove_prefix(1);
    while (!part.empty() && (part.back() == ' ' || part.back() == '\t')) part.remove_suffix(1);
    if (!part.empty()) out.emplace_back(part);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::string join_doubles(const std::vector<double>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += kv::format_double(items[i]);
  }
  return out;
}

std::string normalization_name(Normalization n) {
  switch (n) {
    case Normalization::Raw:
      return "raw";
    case Normalization::OverParamNorm:
      return "param-norm";
    case Normalization::OverSqrtN:
      return "sqrt-numel";
  }
  return "raw";
}

}  // namespace

RunConfig parse_run_config(const kv::Document& doc) {
  if (!doc.sections.empty()) {
    throw ParseError(doc.sections.front().line, "run config takes no sections");
  }
  const auto& schema = doc.top.require("schema");
  if (schema != kRunConfigSchema) {
    throw ParseError(doc.top.find("schema")->line,
                     "unsupported config schema '" + schema + "' (expected " +
                         kRunConfigSchema + ")");
  }

  RunConfig c;
  std::string stem = "patchify";
  using Handler = std::function<void(const std::string&, std::size_t)>;
  auto as_int = [](const std::string& v, std::size_t line) {
    return static_cast<int>(kv::to_int(v, line));
  };
  const std::map<std::string, Handler> handlers = {
      {"schema", [](const std::string&, std::size_t) {}},
      {"model.source",
       [&](const std::string& v, std::size_t line) {
         if (v == "toy") {
           c.model_source = RunConfig::ModelSource::Toy;
         } else if (v == "file") {
           c.model_source = RunConfig::ModelSource::File;
         } else {
           throw ParseError(line, "model.source must be toy or file");
         }
       }},
      {"model.path", [&](const std::string& v, std::size_t) { c.model_path = v; }},
      {"arch.stem", [&](const std::string& v, std::size_t) { stem = v; }},
      {"arch.patch", [&](const std::string& v, std::size_t l) { c.patch_size = as_int(v, l); }},
      {"arch.window",
       [&](const std::string& v, std::size_t l) { c.overlap_geometry.window = as_int(v, l); }},
      {"arch.stride",
       [&](const std::string& v, std::size_t l) { c.overlap_geometry.stride = as_int(v, l); }},
      {"arch.input_length",
       [&](const std::string& v, std::size_t l) { c.arch.input_length = as_int(v, l); }},
      {"arch.embed_dim",
       [&](const std::string& v, std::size_t l) { c.arch.embed_dim = as_int(v, l); }},
      {"arch.hidden",
       [&](const std::string& v, std::size_t l) {
         c.arch.hidden.clear();
         if (v == "none") return;
         for (auto h : kv::to_int_list(v, l)) c.arch.hidden.push_back(int(h));
       }},
      {"arch.activation",
       [&](const std::string& v, std::size_t l) {
         try {
           c.arch.activation = toy::parse_activation(v);
         } catch (const Error& e) {
           throw ParseError(l, e.what());
         }
       }},
      {"arch.num_classes",
       [&](const std::string& v, std::size_t l) { c.arch.num_classes = as_int(v, l); }},
      {"pretrain.optimizer", [&](const std::string& v, std::size_t) { c.pretrain_optimizer = v; }},
      {"pretrain.steps",
       [&](const std::string& v, std::size_t l) { c.pretrain_steps = as_int(v, l); }},
      {"pretrain.batch_size",
       [&](const std::string& v, std::size_t l) { c.pretrain_batch_size = as_int(v, l); }},
      {"pretrain.lr",
       [&](const std::string& v, std::size_t l) { c.pretrain_lr = kv::to_double(v, l); }},
      {"task.name", [&](const std::string& v, std::size_t) { c.task_name = v; }},
      {"task.latent_dim",
       [&](const std::string& v, std::size_t l) { c.task.latent_dim = as_int(v, l); }},
      {"task.noise", [&](const std::string& v, std::size_t l) { c.task.noise = kv::to_double(v, l); }},
      {"task.ood_angle_deg",
       [&](const std::string& v, std::size_t l) { c.task.ood_angle_deg = kv::to_double(v, l); }},
      {"task.ood_offset_scale",
       [&](const std::string& v, std::size_t l) { c.task.ood_offset_scale = kv::to_double(v, l); }},
      {"task.n_pretrain",
       [&](const std::string& v, std::size_t l) { c.task.n_pretrain = as_int(v, l); }},
      {"task.n_train", [&](const std::string& v, std::size_t l) { c.task.n_train = as_int(v, l); }},
      {"task.n_val", [&](const std::string& v, std::size_t l) { c.task.n_val = as_int(v, l); }},
      {"task.n_test", [&](const std::string& v, std::size_t l) { c.task.n_test = as_int(v, l); }},
      {"task.n_ood", [&](const std::string& v, std::size_t l) { c.task.n_ood = as_int(v, l); }},
      {"method", [&](const std::string& v, std::size_t) { c.method = v; }},
      {"epochs", [&](const std::string& v, std::size_t l) { c.epochs = as_int(v, l); }},
      {"batch_size", [&](const std::string& v, std::size_t l) { c.batch_size = as_int(v, l); }},
      {"seeds",
       [&](const std::string& v, std::size_t l) {
         c.seeds.clear();
         for (auto s : kv::to_int_list(v, l)) {
           if (s < 0) throw ParseError(l, "seeds must be >= 0");
           c.seeds.push_back(static_cast<std::uint64_t>(s));
         }
       }},
      {"lr_grid.sgd",
       [&](const std::string& v, std::size_t l) { c.grid_sgd = kv::to_double_list(v, l); }},
      {"lr_grid.adamw",
       [&](const std::string& v, std::size_t l) { c.grid_adamw = kv::to_double_list(v, l); }},
      {"eval.last_checkpoint",
       [&](const std::string& v, std::size_t l) { c.last_checkpoint = kv::to_bool(v, l); }},
      {"record_wall_clock",
       [&](const std::string& v, std::size_t l) { c.record_wall_clock = kv::to_bool(v, l); }},
      {"threads", [&](const std::string& v, std::size_t l) { c.threads = as_int(v, l); }},
      {"profile.batches",
       [&](const std::string& v, std::size_t l) { c.profile_batches = as_int(v, l); }},
      {"profile.normalization",
       [&](const std::string& v, std::size_t l) {
         try {
           c.profile_normalization = parse_normalization(v);
         } catch (const Error& e) {
           throw ParseError(l, e.what());
         }
       }},
      {"experiment.methods",
       [&](const std::string& v, std::size_t) { c.experiment_methods = split_names(v); }},
      {"experiment.pretrain_optimizers",
       [&](const std::string& v, std::size_t) { c.experiment_pretrain = split_names(v); }},
      {"experiment.stems",
       [&](const std::string& v, std::size_t) { c.experiment_stems = split_names(v); }},
  };

  for (const auto& e : doc.top.entries) {
    auto it = handlers.find(e.key);
    if (it == handlers.end()) throw ParseError(e.line, "unknown config key '" + e.key + "'");
    it->second(e.value, e.line);
  }
  if (stem != "patchify" && stem != "overlap") {
    throw ParseError(doc.top.find("arch.stem")->line, "arch.stem must be patchify or overlap");
  }
  c.arch = arch_with_stem(c, stem);
  validate(c);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(kv::parse_file(path));
}

kv::Document to_document(const RunConfig& c) {
  kv::Document d;
  auto& t = d.top;
  t.set("schema", kRunConfigSchema);
  t.set("model.source", c.model_source == RunConfig::ModelSource::Toy ? "toy" : "file");
  if (!c.model_path.empty()) t.set("model.path", c.model_path);
  t.set("arch.stem", c.arch.stem_name());
  t.set("arch.patch", std::to_string(c.patch_size));
  t.set("arch.window", std::to_string(c.overlap_geometry.window));
  t.set("arch.stride", std::to_string(c.overlap_geometry.stride));
  const auto meta = toy::arch_to_metadata(c.arch);
  t.set("arch.input_length", meta.at("arch.input_length"));
  t.set("arch.embed_dim", meta.at("arch.embed_dim"));
  t.set("arch.hidden", meta.at("arch.hidden"));
  t.set("arch.activation", meta.at("arch.activation"));
  t.set("arch.num_classes", meta.at("arch.num_classes"));
  t.set("pretrain.optimizer", c.pretrain_optimizer);
  t.set("pretrain.steps", std::to_string(c.pretrain_steps));
  t.set("pretrain.batch_size", std::to_string(c.pretrain_batch_size));
  if (c.pretrain_lr) t.set("pretrain.lr", kv::format_double(*c.pretrain_lr));
  t.set("task.name", c.task_name);
  t.set("task.latent_dim", std::to_string(c.task.latent_dim));
  t.set("task.noise", kv::format_double(c.task.noise));
  t.set("task.ood_angle_deg", kv::format_double(c.task.ood_angle_deg));
  t.set("task.ood_offset_scale", kv::format_double(c.task.ood_offset_scale));
  t.set("task.n_pretrain", std::to_string(c.task.n_pretrain));
  t.set("task.n_train", std::to_string(c.task.n_train));
  t.set("task.n_val", std::to_string(c.task.n_val));
  t.set("task.n_test", std::to_string(c.task.n_test));
  t.set("task.n_ood", std::to_string(c.task.n_ood));
  t.set("method", c.method);
  t.set("epochs", std::to_string(c.epochs));
  t.set("batch_size", std::to_string(c.batch_size));
  std::string seeds;
  for (std::size_t i = 0; i < c.seeds.size(); ++i) {
    if (i) seeds += ',';
    seeds += std::to_string(c.seeds[i]);
  }
  t.set("seeds", seeds);
  if (c.grid_sgd) t.set("lr_grid.sgd", join_doubles(*c.grid_sgd));
  if (c.grid_adamw) t.set("lr_grid.adamw", join_doubles(*c.grid_adamw));
  t.set("eval.last_checkpoint", c.last_checkpoint ? "true" : "false");
  t.set("record_wall_clock", c.record_wall_clock ? "true" : "false");
  t.set("threads", std::to_string(c.threads));
  t.set("profile.batches", std::to_string(c.profile_batches));
  t.set("profile.normalization", normalization_name(c.profile_normalization));
  t.set("experiment.methods", join(c.experiment_methods));
  t.set("experiment.pretrain_optimizers", join(c.experiment_pretrain));
  t.set("experiment.stems", join(c.experiment_stems));
  return d;
}

void validate(const RunConfig& c) {
  toy::validate(c.arch);
  if (c.epochs < 0) throw Error("config: epochs must be >= 0");
  if (c.batch_size < 1 || c.pretrain_batch_size < 1) {
    throw Error("config: batch sizes must be >= 1");
  }
  if (c.pretrain_steps < 0) throw Error("config: pretrain.steps must be >= 0");
  if (c.pretrain_lr && !(*c.pretrain_lr > 0.0)) throw Error("config: pretrain.lr must be > 0");
  if (c.seeds.empty()) throw Error("config: need at least one seed");
  if (c.threads < 1) throw Error("config: threads must be >= 1");
  if (c.profile_batches < 0) throw Error("config: profile.batches must be >= 0");
  for (const auto* grid : {&c.grid_sgd, &c.grid_adamw}) {
    if (!*grid) continue;
    if ((*grid)->empty()) throw Error("config: learning-rate grid is empty");
    for (double v : **grid) {
      if (!(v > 0.0)) throw Error("config: learning rates must be > 0");
    }
  }
  if (!is_preset(c.method)) throw Error("config: unknown method '" + c.method + "'");
  for (const auto& m : c.experiment_methods) {
    if (!is_preset(m)) throw Error("config: unknown method '" + m + "'");
  }
  for (const auto& p : c.experiment_pretrain) pretrain_kind(p);
  for (const auto& s : c.experiment_stems) arch_with_stem(c, s);
  if (c.model_source == RunConfig::ModelSource::File && c.model_path.empty()) {
    throw Error("config: model.source = file needs model.path");
  }
  if (c.arch.input_length % c.patch_size != 0) {
    throw Error("config: input length must be divisible by arch.patch");
  }
  if (c.task.n_train < c.batch_size) {
    throw Error("config: task.n_train must hold at least one batch");
  }
}

GridProvider grid_provider(const RunConfig& c) {
  auto sgd = c.grid_sgd;
  auto adamw = c.grid_adamw;
  return [sgd, adamw](const OptimizerKind& kind) {
    if (family(kind) == OptimizerFamily::Sgd && sgd) return *sgd;
    if (family(kind) == OptimizerFamily::AdamW && adamw) return *adamw;
    return default_grid(kind);
  };
}

OptimizerKind pretrain_kind(const std::string& name) {
  if (name == "sgd") return SgdConfig{0.9, 0.0};
  if (name == "adamw") return AdamWConfig{};
  if (name == "lars") return LarsConfig{};
  if (name == "lamb") return LambConfig{};
  throw Error("unknown pretraining optimizer '" + name + "'");
}

double pretrain_lr(const RunConfig& c, const OptimizerKind& kind) {
  if (c.pretrain_lr) return *c.pretrain_lr;
  const auto grid = grid_provider(c)(kind);
  return grid[grid.size() / 2];
}

toy::ToyArchitecture arch_with_stem(const RunConfig& c, const std::string& stem) {
  toy::ToyArchitecture a = c.arch;
  if (stem == "patchify") {
    a.stem = toy::PatchifyStem{c.patch_size};
  } else if (stem == "overlap") {
    a.stem = c.overlap_geometry;
  } else {
    throw Error("unknown stem '" + stem + "' (patchify | overlap)");
  }
  toy::validate(a);
  return a;
}

toy::ToyTaskConfig task_for_seed(const RunConfig& c, std::uint64_t seed) {
  toy::ToyTaskConfig t = c.task;
  t.seed = seed;
  t.input_length = c.arch.input_length;
  t.patch = c.patch_size;
  t.num_classes = c.arch.num_classes;
  return t;
}

std::string config_digest(const RunConfig& c, const std::string& method,
                          std::uint64_t seed) {
  RunConfig canon = c;
  canon.seeds = {seed};
  canon.method = method;
  canon.threads = 1;
  const auto h = fnv1a(kv::to_string(to_document(canon)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ftlab
