// SPDX-License-Identifier: Apache-2.0
#include "ftlab/records.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ftlab/error.hpp"

namespace ftlab {
namespace {

using nlohmann::json;

json to_json(const TrialRecord& r) {
  json j;
  j["digest"] = r.digest;
  j["method"] = r.method;
  j["task"] = r.task;
  j["seed"] = r.seed;
  j["pretrain_optimizer"] = r.pretrain_optimizer;
  j["stem"] = r.stem;
  j["lr"] = r.lr;
  j["status"] = to_string(r.status);
  if (!r.error.empty()) j["error"] = r.error;
  j["selected"] = r.selected;
  j["curve"] = r.curve;
  j["early_stop_epoch"] = r.early_stop_epoch;
  j["best_val"] = r.best_val;
  j["id_test"] = r.id_test;
  j["ood_test"] = r.ood_test;
  j["wall_seconds"] = r.wall_seconds;
  j["memory"] = to_record(r.memory);
  return j;
}

TrialRecord from_json(const json& j) {
  TrialRecord r;
  r.digest = j.at("digest").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.task = j.at("task").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.pretrain_optimizer = j.at("pretrain_optimizer").get<std::string>();
  r.stem = j.at("stem").get<std::string>();
  r.lr = j.at("lr").get<double>();
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    r.status = TrialStatus::Ok;
  } else if (status == "diverged") {
    r.status = TrialStatus::Diverged;
  } else {
    throw Error("unknown status '" + status + "'");
  }
  r.error = j.value("error", std::string());
  r.selected = j.at("selected").get<bool>();
  r.curve = j.at("curve").get<std::vector<double>>();
  r.early_stop_epoch = j.at("early_stop_epoch").get<int>();
  r.best_val = j.at("best_val").get<double>();
  r.id_test = j.at("id_test").get<double>();
  r.ood_test = j.at("ood_test").get<double>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.memory = parse_memory_record(j.at("memory").get<std::string>());
  return r;
}

}  // namespace

std::string to_string(TrialStatus status) {
  return status == TrialStatus::Ok ? "ok" : "diverged";
}

std::string to_jsonl(const std::vector<TrialRecord>& records) {
  std::string out = json{{"schema", kTrialsSchema}}.dump() + "\n";
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

std::vector<TrialRecord> parse_jsonl(std::istream& in) {
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!header) {
        if (!j.is_object() || j.value("schema", std::string()) != kTrialsSchema) {
          throw Error(std::string("expected header {\"schema\":\"") + kTrialsSchema + "\"}");
        }
        header = true;
        continue;
      }
      out.push_back(from_json(j));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(number, e.what());
    }
  }
  if (!header) throw ParseError(0, "missing trials header line");
  return out;
}

void persist(const std::vector<TrialRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_jsonl(records);
  if (!out) throw Error("write failed for '" + path + "'");
}

std::vector<TrialRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read '" + path + "'");
  return parse_jsonl(in);
}

}  // namespace ftlab
