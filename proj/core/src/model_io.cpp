// SPDX-License-Identifier: Apache-2.0
#include "ftlab/model_io.hpp"

#include <cmath>
#include <random>

#include "ftlab/error.hpp"
#include "ftlab/rng.hpp"

namespace ftlab {
namespace {

constexpr const char* kDescSchema = "ftlab.model-desc/1";
constexpr const char* kModelSchema = "ftlab.model/1";

void check_schema(const kv::Document& doc, const char* expected) {
  const auto& schema = doc.top.require("schema");
  if (schema != expected) {
    throw ParseError(doc.top.find("schema")->line,
                     "expected schema " + std::string(expected) + ", got " +
                         schema);
  }
}

std::map<std::string, std::string> read_metadata(const kv::Section& top) {
  std::map<std::string, std::string> meta;
  for (const auto& e : top.entries) {
    if (e.key.rfind("meta.", 0) == 0) meta[e.key.substr(5)] = e.value;
  }
  return meta;
}

void write_metadata(kv::Section& top,
                    const std::map<std::string, std::string>& meta) {
  for (const auto& [k, v] : meta) {
    if (v.find('\n') != std::string::npos || v != kv::parse_string("x = " + v)
                                                      .top.entries.front()
                                                      .value) {
      throw Error("metadata value for '" + k + "' does not round-trip");
    }
    top.set("meta." + k, v);
  }
}

struct GroupHeader {
  GroupId id;
  std::string name;
  LayerRole role;
  int depth_index;
  std::int64_t numel;
};

GroupHeader read_header(const kv::Section& s) {
  auto line_of = [&](const char* key) { return s.find(key)->line; };
  GroupHeader h;
  h.id = static_cast<GroupId>(kv::to_int(s.require("id"), line_of("id")));
  h.name = s.require("name");
  try {
    h.role = parse_role(s.require("role"));
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(line_of("role"), e.what());
  }
  h.depth_index = static_cast<int>(
      kv::to_int(s.require("depth_index"), line_of("depth_index")));
  h.numel = kv::to_int(s.require("numel"), line_of("numel"));
  if (h.numel < 1) throw ParseError(line_of("numel"), "numel must be >= 1");
  return h;
}

void write_header(kv::Section& s, GroupId id, const std::string& name,
                  LayerRole role, int depth, std::int64_t numel) {
  s.set("id", std::to_string(id));
  s.set("name", name);
  s.set("role", std::string(to_string(role)));
  s.set("depth_index", std::to_string(depth));
  s.set("numel", std::to_string(numel));
}

}  // namespace

ModelDescription parse_model_description(const kv::Document& doc) {
  check_schema(doc, kDescSchema);
  ModelDescription desc;
  desc.metadata = read_metadata(doc.top);
  for (const auto& s : doc.sections) {
    if (s.name != "group") {
      throw ParseError(s.line, "unexpected section [" + s.name + "]");
    }
    auto h = read_header(s);
    GroupDescription g{h.id, h.name, h.role, h.depth_index, h.numel, 0, {}};
    const auto& seed = s.require("init_seed");
    g.init_seed = static_cast<std::uint64_t>(
        kv::to_int(seed, s.find("init_seed")->line));
    if (auto b = s.get("init_bound")) {
      g.init_bound = kv::to_double(*b, s.find("init_bound")->line);
    }
    desc.groups.push_back(std::move(g));
  }
  return desc;
}

kv::Document to_document(const ModelDescription& desc) {
  kv::Document doc;
  doc.top.set("schema", kDescSchema);
  write_metadata(doc.top, desc.metadata);
  for (const auto& g : desc.groups) {
    kv::Section s{"group", {}, 0};
    write_header(s, g.id, g.name, g.role, g.depth_index, g.numel);
    s.set("init_seed", std::to_string(g.init_seed));
    if (g.init_bound) s.set("init_bound", kv::format_double(*g.init_bound));
    doc.sections.push_back(std::move(s));
  }
  return doc;
}

ModelDescription load_model_description(const std::string& path) {
  return parse_model_description(kv::parse_file(path));
}

void save_model_description(const ModelDescription& desc,
                            const std::string& path) {
  kv::write_file(path, to_document(desc));
}

ModelState instantiate(const ModelDescription& desc) {
  ModelState m;
  m.metadata = desc.metadata;
  for (const auto& g : desc.groups) {
    double bound = g.init_bound.value_or(1.0 / std::sqrt(double(g.numel)));
    Rng rng(g.init_seed);
    std::uniform_real_distribution<double> dist(-bound, bound);
    ParameterGroup pg{g.id, g.name, g.role, g.depth_index, {}};
    pg.values.resize(static_cast<std::size_t>(g.numel));
    for (auto& v : pg.values) v = dist(rng);
    m.groups.push_back(std::move(pg));
  }
  require_valid(m);
  return m;
}

kv::Document model_to_document(const ModelState& model) {
  kv::Document doc;
  doc.top.set("schema", kModelSchema);
  write_metadata(doc.top, model.metadata);
  for (const auto& g : model.groups) {
    kv::Section s{"group", {}, 0};
    write_header(s, g.id, g.name, g.role, g.depth_index,
                 static_cast<std::int64_t>(g.numel()));
    std::string values;
    values.reserve(g.numel() * 24);
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (i) values += ',';
      values += kv::format_hex(g.values[i]);
    }
    s.set("values", std::move(values));
    doc.sections.push_back(std::move(s));
  }
  return doc;
}

ModelState model_from_document(const kv::Document& doc) {
  check_schema(doc, kModelSchema);
  ModelState m;
  m.metadata = read_metadata(doc.top);
  for (const auto& s : doc.sections) {
    if (s.name != "group") {
      throw ParseError(s.line, "unexpected section [" + s.name + "]");
    }
    auto h = read_header(s);
    const auto& text = s.require("values");
    auto values = kv::to_double_list(text, s.find("values")->line);
    if (static_cast<std::int64_t>(values.size()) != h.numel) {
      throw ParseError(s.find("values")->line,
                       "expected " + std::to_string(h.numel) + " values, got " +
                           std::to_string(values.size()));
    }
    m.groups.push_back({h.id, h.name, h.role, h.depth_index, std::move(values)});
  }
  require_valid(m);
  return m;
}

void save_model(const ModelState& model, const std::string& path) {
  kv::write_file(path, model_to_document(model));
}

ModelState load_model(const std::string& path) {
  return model_from_document(kv::parse_file(path));
}

}  // namespace ftlab
