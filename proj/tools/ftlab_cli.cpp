// SPDX-License-Identifier: Apache-2.0
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ftlab/config.hpp"
#include "ftlab/error.hpp"
#include "ftlab/gradprof.hpp"
#include "ftlab/harness.hpp"
#include "ftlab/memory.hpp"
#include "ftlab/model_io.hpp"
#include "ftlab/policy.hpp"
#include "ftlab/records.hpp"
#include "ftlab/report.hpp"

namespace {

using namespace ftlab;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string method;
  std::string format = "text";
};

void add_common(CLI::App* cmd, Common& c, bool with_method) {
  cmd->add_option("--config", c.config_path, "run config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run a single seed");
  cmd->add_option("--out", c.out, "output path");
  if (with_method) cmd->add_option("--method", c.method, "method preset");
  cmd->add_option("--format", c.format, "text | machine")
      ->check(CLI::IsMember({"text", "machine"}));
}

RunConfig load(const Common& c) {
  RunConfig config = c.config_path.empty() ? RunConfig{} : load_run_config(c.config_path);
  if (c.seed) config.seeds = {*c.seed};
  if (!c.method.empty()) config.method = c.method;
  validate(config);
  return config;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error("cannot write '" + path + "'");
}

void print_record(const TrialRecord& r, Format f) {
  if (f == Format::Machine) {
    std::cout << to_jsonl({r});
    return;
  }
  std::printf("%s seed %llu lr %s: val %.4f (epoch %d)  id %.4f  ood %.4f  [%s]\n",
              r.method.c_str(), static_cast<unsigned long long>(r.seed),
              kv::format_double(r.lr).c_str(), r.best_val, r.early_stop_epoch, r.id_test,
              r.ood_test, r.status == TrialStatus::Ok ? "ok" : r.error.c_str());
}

int run(int argc, char** argv) {
  CLI::App app{"ftlab: fine-tuning optimizer laboratory"};
  app.require_subcommand(1);

  Common pc, pt, ft, sw, ex, mc, rp;

  auto* prof = app.add_subcommand("profile", "layer-wise gradient profile at fine-tuning start");
  add_common(prof, pc, false);

  auto* pre = app.add_subcommand("pretrain", "pretrain a toy model and save it");
  add_common(pre, pt, false);

  auto* fin = app.add_subcommand("finetune", "one fine-tuning trial");
  add_common(fin, ft, true);
  std::optional<double> lr;
  fin->add_option("--lr", lr, "base learning rate (default: middle of the grid)");

  auto* swp = app.add_subcommand("sweep", "learning-rate sweep with early stopping");
  add_common(swp, sw, true);

  auto* exp = app.add_subcommand("experiment", "pretrain optimizer x stem x method matrix");
  add_common(exp, ex, false);
  int seed_count = 0;
  exp->add_option("--seeds", seed_count, "use seeds 0..N-1")->check(CLI::PositiveNumber);
  bool quiet = false;
  exp->add_flag("--quiet", quiet, "no progress on stderr");

  auto* mem = app.add_subcommand("memory", "optimizer-state memory report");
  add_common(mem, mc, true);
  std::optional<std::int64_t> params, frozen;
  std::string model_path;
  mem->add_option("--params", params, "total parameter count");
  mem->add_option("--frozen", frozen, "frozen parameter count (with --params)");
  mem->add_option("--model", model_path, "serialized model or model description")->check(CLI::ExistingFile);

  auto* rep = app.add_subcommand("report", "tables and plot data from persisted records");
  add_common(rep, rp, false);
  std::string in_path, metric = "both", baseline = "sgd";
  bool curves = false;
  rep->add_option("--in", in_path, "records file")->required()->check(CLI::ExistingFile);
  rep->add_option("--metric", metric, "id | ood | both")
      ->check(CLI::IsMember({"id", "ood", "both"}));
  rep->add_option("--baseline", baseline, "baseline method");
  rep->add_flag("--curves", curves, "emit validation curves instead of tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ftlab: " << e.what() << "\n";
    return e.get_exit_code() ? e.get_exit_code() : 2;
  }

  if (*prof) {
    const auto config = load(pc);
    const auto bench = prepare(config, config.seeds.front());
    const auto gp = finetune_profile(bench);
    const auto csv = profile_to_csv(gp);
    if (!pc.out.empty()) write_text(pc.out, csv);
    if (parse_format(pc.format) == Format::Machine) {
      std::cout << csv;
    } else {
      for (const auto& g : gp.groups) {
        std::printf("%-10s %-6s depth %d  numel %6lld  G %.6g\n", g.name.c_str(),
                    std::string(to_string(g.role)).c_str(), g.depth_index,
                    static_cast<long long>(g.numel), g.g_raw);
      }
      const auto ratio = embed_outlier_ratio(gp, config.profile_normalization);
      std::printf("embed outlier ratio: %s\n", ratio ? kv::format_double(*ratio).c_str() : "n/a");
    }
    return 0;
  }

  if (*pre) {
    const auto config = load(pt);
    if (pt.out.empty()) throw Error("pretrain: --out is required");
    if (config.model_source != RunConfig::ModelSource::Toy) {
      throw Error("pretrain: needs the toy model source");
    }
    const auto bench = prepare(config, config.seeds.front());
    save_model(bench.pretrained, pt.out);
    if (parse_format(pt.format) == Format::Text) {
      std::printf("pretrained %s/%s seed %llu -> %s\n", config.pretrain_optimizer.c_str(),
                  bench.arch.stem_name().c_str(),
                  static_cast<unsigned long long>(bench.seed), pt.out.c_str());
    }
    return 0;
  }

  if (*fin) {
    const auto config = load(ft);
    double rate = 0.0;
    if (lr) {
      rate = *lr;
    } else {
      const auto plan = make_preset(config.method, config.epochs, grid_provider(config));
      const auto& grid = plan.phases.back().lr_grid;
      rate = grid[grid.size() / 2];
    }
    const auto rec = fine_tune(config, rate);
    if (!ft.out.empty()) persist({rec}, ft.out);
    print_record(rec, parse_format(ft.format));
    return 0;
  }

  if (*swp) {
    const auto config = load(sw);
    std::vector<TrialRecord> all;
    for (auto seed : config.seeds) {
      const auto bench = prepare(config, seed);
      auto res = sweep(bench, config.method);
      if (parse_format(sw.format) == Format::Text) {
        for (std::size_t i = 0; i < res.trials.size(); ++i) {
          std::printf("%c ", i == res.best ? '*' : ' ');
          print_record(res.trials[i], Format::Text);
        }
      }
      all.insert(all.end(), res.trials.begin(), res.trials.end());
    }
    if (parse_format(sw.format) == Format::Machine) std::cout << to_jsonl(all);
    if (!sw.out.empty()) persist(all, sw.out);
    return 0;
  }

  if (*exp) {
    auto config = load(ex);
    if (seed_count > 0) {
      config.seeds.clear();
      for (int s = 0; s < seed_count; ++s) config.seeds.push_back(std::uint64_t(s));
    }
    ProgressFn progress;
    if (!quiet) progress = [](const std::string& line) { std::cerr << line << "\n"; };
    const auto matrix = controlled_experiment(config, progress);
    std::cout << render_matrix(matrix, parse_format(ex.format));
    if (!ex.out.empty()) persist(matrix_records(matrix), ex.out);
    return 0;
  }

  if (*mem) {
    const auto config = load(mc);
    const auto plan = make_preset(config.method, std::max(config.epochs, 1));
    const auto& last = plan.phases.back();
    MemoryReport report;
    if (params) {
      report = state_bytes(last.optimizer, *params, frozen.value_or(0));
    } else {
      ModelState model;
      if (model_path.empty()) {
        model = toy::init_model(config.arch, 0);
      } else {
        const auto doc = kv::parse_file(model_path);
        model = doc.top.get("schema") == std::optional<std::string>("ftlab.model-desc/1")
                    ? instantiate(parse_model_description(doc))
                    : model_from_document(doc);
      }
      report = state_bytes(last.optimizer, model,
                           phase_freeze_mask(last, model, std::max(last.epochs - 1, 0)));
    }
    if (parse_format(mc.format) == Format::Machine) {
      std::cout << to_record(report) << "\n";
    } else {
      std::printf("method %s (%s)\n", config.method.c_str(), kind_name(last.optimizer).c_str());
      std::printf("  parameters  %lld bytes\n", static_cast<long long>(report.bytes_params));
      std::printf("  gradients   %lld bytes\n", static_cast<long long>(report.bytes_grads));
      std::printf("  moment 1    %lld bytes\n", static_cast<long long>(report.bytes_moment1));
      std::printf("  moment 2    %lld bytes\n", static_cast<long long>(report.bytes_moment2));
      std::printf("  total       %lld bytes (%s bytes/parameter)\n",
                  static_cast<long long>(report.bytes_total),
                  kv::format_double(report.bytes_per_param.value()).c_str());
    }
    return 0;
  }

  if (*rep) {
    const auto records = load_records(in_path);
    const auto fmt = parse_format(rp.format);
    std::string text;
    if (curves) {
      text = render_curves(records);
    } else {
      if (metric != "ood") text += render_table(records, Metric::IdTest, baseline, fmt);
      if (metric == "both" && fmt == Format::Text) text += "\n";
      if (metric != "id") {
        auto ood = render_table(records, Metric::OodTest, baseline, fmt);
        if (metric == "both" && fmt == Format::Machine) ood = ood.substr(ood.find('\n') + 1);
        text += ood;
      }
    }
    if (!rp.out.empty()) {
      write_text(rp.out, text);
    } else {
      std::cout << text;
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "ftlab: " << e.what() << "\n";
    return 1;
  }
}
