#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perseus/baselines.hpp"
#include "perseus/costmodel.hpp"
#include "perseus/dag.hpp"
#include "perseus/frontier.hpp"
#include "perseus/units.hpp"

namespace perseus {

namespace detail {

inline std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline double round3(double v) { return std::round(v * 1000.0) / 1000.0; }

inline std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text(const std::filesystem::path& file, const std::string& text) {
  std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

inline nlohmann::json parse_json(const std::string& text, const std::string& what) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw std::invalid_argument("malformed JSON in " + what);
  return j;
}

}  // namespace detail

// ---- profiles ----

inline ProfileSet profile_set_from_json(const nlohmann::json& j,
                                        std::int64_t quantum_us = kDefaultQuantumUs,
                                        double default_blocking_watts = kDefaultBlockingWatts) {
  try {
    ProfileSet set;
    set.p_blocking_watts = j.value("p_blocking_watts", default_blocking_watts);
    if (set.p_blocking_watts <= 0) throw std::invalid_argument("p_blocking_watts must be positive");
    for (const auto& pj : j.at("profiles")) {
      FrequencyProfile prof;
      prof.key.stage = pj.at("stage").get<int>();
      prof.key.kind = kind_from_string(pj.at("kind").get<std::string>());
      for (const auto& ptj : pj.at("points")) {
        ProfilePoint p;
        p.freq_mhz = ptj.at("freq_mhz").get<int>();
        p.time = seconds_to_quanta(ptj.at("time_s").get<double>(), quantum_us);
        p.energy = joules_to_mj(ptj.at("energy_j").get<double>());
        prof.points.push_back(p);
      }
      validate_profile(prof);
      set.profiles.push_back(std::move(prof));
    }
    if (set.profiles.empty()) throw std::invalid_argument("profile set is empty");
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid profile set: ") + e.what());
  }
}

inline nlohmann::ordered_json profile_set_json(const ProfileSet& set,
                                               std::int64_t quantum_us = kDefaultQuantumUs) {
  nlohmann::ordered_json j;
  j["p_blocking_watts"] = set.p_blocking_watts;
  j["profiles"] = nlohmann::ordered_json::array();
  for (const auto& prof : set.profiles) {
    nlohmann::ordered_json pj;
    pj["stage"] = prof.key.stage;
    pj["kind"] = to_string(prof.key.kind);
    pj["points"] = nlohmann::ordered_json::array();
    for (const auto& p : prof.points) {
      nlohmann::ordered_json ptj;
      ptj["freq_mhz"] = p.freq_mhz;
      ptj["time_s"] = quanta_to_seconds(p.time, quantum_us);
      ptj["energy_j"] = mj_to_joules(p.energy);
      pj["points"].push_back(std::move(ptj));
    }
    j["profiles"].push_back(std::move(pj));
  }
  return j;
}

inline ProfileSet load_profile_set(const std::filesystem::path& file,
                                   std::int64_t quantum_us = kDefaultQuantumUs,
                                   double default_blocking_watts = kDefaultBlockingWatts) {
  return profile_set_from_json(detail::parse_json(detail::read_text(file), file.string()),
                               quantum_us, default_blocking_watts);
}

// ---- DAGs ----

inline NodeDag custom_dag_from_json(const nlohmann::json& j) {
  try {
    std::vector<Computation> comps;
    for (const auto& cj : j.at("computations")) {
      Computation c;
      c.id = cj.at("id").get<int>();
      c.stage = cj.at("stage").get<int>();
      c.kind = kind_from_string(cj.at("kind").get<std::string>());
      if (cj.contains("microbatch") && !cj.at("microbatch").is_null())
        c.microbatch = cj.at("microbatch").get<int>();
      comps.push_back(c);
    }
    std::vector<std::pair<int, int>> edges;
    for (const auto& ej : j.at("edges")) {
      if (!ej.is_array() || ej.size() != 2) throw std::invalid_argument("edges must be pairs");
      edges.emplace_back(ej.at(0).get<int>(), ej.at(1).get<int>());
    }
    return finalize_custom_dag(std::move(comps), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid dag: ") + e.what());
  }
}

inline NodeDag load_custom_dag(const std::filesystem::path& file) {
  return custom_dag_from_json(detail::parse_json(detail::read_text(file), file.string()));
}

// `1f1b:<N>x<M>`, `gpipe:<N>x<M>`, or `file:<path>` (relative to base_dir).
inline NodeDag parse_dag_spec(const std::string& spec,
                              const std::filesystem::path& base_dir = ".") {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("dag spec needs a kind prefix");
  const std::string kind = spec.substr(0, colon), rest = spec.substr(colon + 1);
  if (kind == "file") {
    std::filesystem::path p(rest);
    if (p.is_relative()) p = base_dir / p;
    return load_custom_dag(p);
  }
  if (kind == "1f1b" || kind == "gpipe") {
    const auto x = rest.find('x');
    if (x == std::string::npos) throw std::invalid_argument("expected <stages>x<microbatches>");
    int stages = 0, micro = 0;
    try {
      size_t used = 0;
      stages = std::stoi(rest.substr(0, x), &used);
      if (used != x) throw std::invalid_argument("");
      micro = std::stoi(rest.substr(x + 1), &used);
      if (used != rest.size() - x - 1) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed dag spec: " + spec);
    }
    return kind == "1f1b" ? build_1f1b(stages, micro) : build_gpipe(stages, micro);
  }
  throw std::invalid_argument("unknown dag kind: " + kind);
}

inline std::vector<Quanta> load_layer_latencies(const std::filesystem::path& file) {
  const nlohmann::json j = detail::parse_json(detail::read_text(file), file.string());
  if (!j.is_array() || j.empty())
    throw std::invalid_argument("layer file must be a non-empty JSON array");
  std::vector<Quanta> out;
  for (const auto& v : j) {
    if (!v.is_number_integer() || v.get<std::int64_t>() <= 0)
      throw std::invalid_argument("layer latencies must be positive integers");
    out.push_back(v.get<Quanta>());
  }
  return out;
}

// ---- results ----

inline nlohmann::ordered_json partition_json(const PartitionResult& r) {
  nlohmann::ordered_json j;
  j["boundaries"] = r.boundaries;
  j["ratio"] = detail::round3(r.ratio);
  return j;
}

inline nlohmann::ordered_json schedule_json(const EnergySchedule& s,
                                            std::int64_t quantum_us = kDefaultQuantumUs) {
  nlohmann::ordered_json j;
  j["schedule_id"] = s.schedule_id;
  j["t_planned_us"] = s.t_planned * quantum_us;
  j["eff_planned_mj"] = detail::round3(s.eff_planned_mj);
  if (s.discretized()) {
    j["t_realized_us"] = s.t_realized * quantum_us;
    j["eff_realized_mj"] = detail::round3(s.eff_realized_mj);
  }
  j["computations"] = nlohmann::ordered_json::array();
  for (size_t i = 0; i < s.planned_t.size(); ++i) {
    nlohmann::ordered_json cj;
    cj["id"] = static_cast<int>(i);
    if (s.discretized()) cj["freq_mhz"] = s.freq_mhz[i];
    cj["t_planned_us"] = s.planned_t[i] * quantum_us;
    cj["e_planned_mj"] = s.planned_e[i];
    if (s.discretized()) {
      cj["t_realized_us"] = s.realized_t[i] * quantum_us;
      cj["e_realized_mj"] = s.realized_e[i];
    }
    j["computations"].push_back(std::move(cj));
  }
  return j;
}

inline EnergySchedule schedule_from_json(const nlohmann::json& j,
                                         std::int64_t quantum_us = kDefaultQuantumUs) {
  try {
    EnergySchedule s;
    s.schedule_id = j.at("schedule_id").get<int>();
    s.t_planned = j.at("t_planned_us").get<Quanta>() / quantum_us;
    s.eff_planned_mj = j.at("eff_planned_mj").get<double>();
    const bool realized = j.contains("t_realized_us");
    if (realized) {
      s.t_realized = j.at("t_realized_us").get<Quanta>() / quantum_us;
      s.eff_realized_mj = j.at("eff_realized_mj").get<double>();
    }
    for (const auto& cj : j.at("computations")) {
      s.planned_t.push_back(cj.at("t_planned_us").get<Quanta>() / quantum_us);
      s.planned_e.push_back(cj.at("e_planned_mj").get<Millijoules>());
      if (realized) {
        s.freq_mhz.push_back(cj.at("freq_mhz").get<int>());
        s.realized_t.push_back(cj.at("t_realized_us").get<Quanta>() / quantum_us);
        s.realized_e.push_back(cj.at("e_realized_mj").get<Millijoules>());
      }
    }
    if (s.planned_t.empty()) throw std::invalid_argument("schedule has no computations");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid schedule: ") + e.what());
  }
}

inline std::string frontier_csv(const Frontier& frontier,
                                std::int64_t quantum_us = kDefaultQuantumUs) {
  std::ostringstream out;
  out << "t_planned_us,t_realized_us,energy_planned_mj,energy_realized_mj,schedule_id\n";
  for (const auto& s : frontier.schedules)
    out << s.t_planned * quantum_us << ',' << s.t_realized * quantum_us << ','
        << detail::fixed3(s.eff_planned_mj) << ',' << detail::fixed3(s.eff_realized_mj) << ','
        << s.schedule_id << '\n';
  return out.str();
}

// ---- optimizer artifact directory ----
// manifest.json + frontier.csv + schedules/schedule_<k>.json; enough to
// reload the frontier without recomputing it.

struct OptimizeManifest {
  std::string dag_spec;
  std::int64_t tau_us = kDefaultTauUs;
  std::int64_t quantum_us = kDefaultQuantumUs;
  double p_blocking_watts = kDefaultBlockingWatts;
  Quanta t_min = 0;
  Quanta t_star = 0;
  int steps = 0;
  int num_schedules = 0;
};

inline nlohmann::ordered_json manifest_json(const OptimizeManifest& m) {
  nlohmann::ordered_json j;
  j["dag"] = m.dag_spec;
  j["tau_us"] = m.tau_us;
  j["quantum_us"] = m.quantum_us;
  j["p_blocking_watts"] = m.p_blocking_watts;
  j["t_min_us"] = m.t_min * m.quantum_us;
  j["t_star_us"] = m.t_star * m.quantum_us;
  j["steps"] = m.steps;
  j["num_schedules"] = m.num_schedules;
  return j;
}

inline OptimizeManifest manifest_from_json(const nlohmann::json& j) {
  try {
    OptimizeManifest m;
    m.dag_spec = j.at("dag").get<std::string>();
    m.tau_us = j.at("tau_us").get<std::int64_t>();
    m.quantum_us = j.at("quantum_us").get<std::int64_t>();
    m.p_blocking_watts = j.at("p_blocking_watts").get<double>();
    m.t_min = j.at("t_min_us").get<Quanta>() / m.quantum_us;
    m.t_star = j.at("t_star_us").get<Quanta>() / m.quantum_us;
    m.steps = j.at("steps").get<int>();
    m.num_schedules = j.at("num_schedules").get<int>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid manifest: ") + e.what());
  }
}

inline void write_frontier_artifacts(const std::filesystem::path& dir, const Frontier& frontier,
                                     const OptimizeManifest& manifest) {
  OptimizeManifest m = manifest;
  m.t_min = frontier.t_min;
  m.t_star = frontier.t_star;
  m.steps = frontier.steps;
  m.num_schedules = static_cast<int>(frontier.schedules.size());
  detail::write_text(dir / "manifest.json", manifest_json(m).dump(2) + "\n");
  detail::write_text(dir / "frontier.csv", frontier_csv(frontier, m.quantum_us));
  for (const auto& s : frontier.schedules)
    detail::write_text(dir / "schedules" / ("schedule_" + std::to_string(s.schedule_id) + ".json"),
                       schedule_json(s, m.quantum_us).dump(2) + "\n");
}

inline Frontier load_frontier_artifacts(const std::filesystem::path& dir,
                                        const OptimizeManifest& m) {
  Frontier frontier;
  frontier.t_min = m.t_min;
  frontier.t_star = m.t_star;
  frontier.steps = m.steps;
  for (int k = 0; k < m.num_schedules; ++k) {
    const auto file = dir / "schedules" / ("schedule_" + std::to_string(k) + ".json");
    frontier.schedules.push_back(
        schedule_from_json(detail::parse_json(detail::read_text(file), file.string()),
                           m.quantum_us));
  }
  return frontier;
}

inline OptimizeManifest load_manifest(const std::filesystem::path& dir) {
  const auto file = dir / "manifest.json";
  return manifest_from_json(detail::parse_json(detail::read_text(file), file.string()));
}

}  // namespace perseus
