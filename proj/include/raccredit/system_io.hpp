#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "raccredit/system.hpp"

namespace raccredit {

namespace detail {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* key : allowed) ok = ok || item.key() == key;
    if (!ok) throw SpecError(path + (path.empty() ? "" : ".") + item.key(), "unknown key");
  }
}

inline const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw SpecError(path + (path.empty() ? "" : ".") + key, "missing required key");
  return *it;
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw SpecError(path, "expected a number");
  return v.get<double>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) throw SpecError(path, "expected a string");
  return v.get<std::string>();
}

inline std::size_t as_count(const json& v, const std::string& path) {
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw SpecError(path, "expected a nonnegative integer");
  return v.get<std::size_t>();
}

inline std::vector<double> as_numbers(const json& v, const std::string& path) {
  if (!v.is_array()) throw SpecError(path, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], indexed(path.c_str(), i)));
  return out;
}

inline GeneratorKind parse_kind(const json& v, const std::string& path) {
  const auto s = as_string(v, path);
  if (s == "thermal") return GeneratorKind::thermal;
  if (s == "profile") return GeneratorKind::profile;
  if (s == "perfect") return GeneratorKind::perfect;
  throw SpecError(path, "unknown generator kind '" + s + "'");
}

}  // namespace detail

/// Parses a system document (already decoded JSON) and validates it.
inline SystemSpec parse_system_spec(const nlohmann::json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw SpecError("", "system spec must be a JSON object");
  reject_unknown_keys(doc, "", {"generators", "storages", "profiles", "load", "horizon_hours", "hours_per_day"});

  SystemSpec sys;
  sys.horizon_hours = as_count(require(doc, "horizon_hours", ""), "horizon_hours");
  if (doc.contains("hours_per_day")) sys.hours_per_day = as_count(doc["hours_per_day"], "hours_per_day");

  const auto& load = require(doc, "load", "");
  if (load.is_object()) {
    // {"flat_mw": x} shorthand for a constant trajectory
    reject_unknown_keys(load, "load", {"flat_mw"});
    const double flat = as_number(require(load, "flat_mw", "load"), "load.flat_mw");
    sys.load.values.assign(sys.horizon_hours, flat);
  } else {
    sys.load.values = as_numbers(load, "load");
  }

  if (doc.contains("profiles")) {
    const auto& arr = doc["profiles"];
    if (!arr.is_array()) throw SpecError("profiles", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto path = indexed("profiles", i);
      if (!arr[i].is_object()) throw SpecError(path, "expected an object");
      reject_unknown_keys(arr[i], path, {"id", "values"});
      AvailabilityProfile p;
      p.id = as_string(require(arr[i], "id", path), path + ".id");
      p.values = as_numbers(require(arr[i], "values", path), path + ".values");
      sys.profiles.push_back(std::move(p));
    }
  }

  if (doc.contains("generators")) {
    const auto& arr = doc["generators"];
    if (!arr.is_array()) throw SpecError("generators", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto path = indexed("generators", i);
      if (!arr[i].is_object()) throw SpecError(path, "expected an object");
      reject_unknown_keys(arr[i], path, {"id", "nameplate_mw", "kind", "for_rate", "profile_id"});
      GeneratorSpec g;
      g.id = as_string(require(arr[i], "id", path), path + ".id");
      g.nameplate_mw = as_number(require(arr[i], "nameplate_mw", path), path + ".nameplate_mw");
      g.kind = parse_kind(require(arr[i], "kind", path), path + ".kind");
      if (arr[i].contains("for_rate")) g.for_rate = as_number(arr[i]["for_rate"], path + ".for_rate");
      if (arr[i].contains("profile_id"))
        g.profile_id = as_string(arr[i]["profile_id"], path + ".profile_id");
      sys.generators.push_back(std::move(g));
    }
  }

  if (doc.contains("storages")) {
    const auto& arr = doc["storages"];
    if (!arr.is_array()) throw SpecError("storages", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto path = indexed("storages", i);
      const auto& o = arr[i];
      if (!o.is_object()) throw SpecError(path, "expected an object");
      reject_unknown_keys(o, path, {"id", "power_mw", "energy_mwh", "efficiency_charge", "efficiency_discharge",
                                    "initial_soc_fraction", "duration_hours"});
      StorageSpec s;
      s.id = as_string(require(o, "id", path), path + ".id");
      s.power_mw = as_number(require(o, "power_mw", path), path + ".power_mw");
      s.energy_mwh = as_number(require(o, "energy_mwh", path), path + ".energy_mwh");
      if (o.contains("efficiency_charge"))
        s.efficiency_charge = as_number(o["efficiency_charge"], path + ".efficiency_charge");
      if (o.contains("efficiency_discharge"))
        s.efficiency_discharge = as_number(o["efficiency_discharge"], path + ".efficiency_discharge");
      if (o.contains("initial_soc_fraction"))
        s.initial_soc_fraction = as_number(o["initial_soc_fraction"], path + ".initial_soc_fraction");
      if (o.contains("duration_hours")) s.duration_hours = as_number(o["duration_hours"], path + ".duration_hours");
      sys.storages.push_back(std::move(s));
    }
  }

  sys.validate();
  return sys;
}

inline SystemSpec parse_system_spec(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError("", std::string("parse failure: ") + e.what());
  }
  return parse_system_spec(doc);
}

inline SystemSpec load_system_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("system", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_system_spec(buf.str());
}

inline nlohmann::json to_json(const SystemSpec& sys) {
  nlohmann::json doc;
  doc["horizon_hours"] = sys.horizon_hours;
  doc["hours_per_day"] = sys.hours_per_day;
  doc["load"] = sys.load.values;
  doc["profiles"] = nlohmann::json::array();
  for (const auto& p : sys.profiles) doc["profiles"].push_back({{"id", p.id}, {"values", p.values}});
  doc["generators"] = nlohmann::json::array();
  for (const auto& g : sys.generators) {
    nlohmann::json o{{"id", g.id}, {"nameplate_mw", g.nameplate_mw}, {"kind", to_string(g.kind)}};
    if (g.for_rate) o["for_rate"] = *g.for_rate;
    if (g.profile_id) o["profile_id"] = *g.profile_id;
    doc["generators"].push_back(std::move(o));
  }
  doc["storages"] = nlohmann::json::array();
  for (const auto& s : sys.storages) {
    nlohmann::json o{{"id", s.id},
                     {"power_mw", s.power_mw},
                     {"energy_mwh", s.energy_mwh},
                     {"efficiency_charge", s.efficiency_charge},
                     {"efficiency_discharge", s.efficiency_discharge},
                     {"initial_soc_fraction", s.initial_soc_fraction}};
    if (s.duration_hours) o["duration_hours"] = *s.duration_hours;
    doc["storages"].push_back(std::move(o));
  }
  return doc;
}

inline void write_system_spec(const SystemSpec& sys, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  out << to_json(sys).dump(2) << '\n';
}

}  // namespace raccredit
