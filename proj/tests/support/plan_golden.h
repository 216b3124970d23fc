#pragma once

// Compares a sweep plan against a hand-written golden table. Returns one
// message per mismatch; empty means the plan matches.

#include <string>
#include <vector>

#include "json.hpp"
#include "zerosweep/sweep.h"

namespace zs::testing {

inline std::vector<std::string> compare_plan(const SweepPlan& plan, const nlohmann::json& golden) {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) bad.push_back(what);
  };
  const bool one_factor = golden.at("mode") == "one_factor";
  check(plan.mode == (one_factor ? SweepMode::kOneFactor : SweepMode::kFullGrid), "mode");
  const auto& rows = golden.at("rows");
  check(plan.axes.size() == rows.size(), "axis count " + std::to_string(plan.axes.size()));
  for (std::size_t k = 0; k < rows.size() && k < plan.axes.size(); ++k) {
    const auto& row = rows[k];
    const SweepAxis& axis = plan.axes[k];
    const std::string name = row.at("parameter");
    check(axis.name == name, "axis " + std::to_string(k) + " is " + axis.name + ", expected " + name);
    const char* mid = one_factor ? "default" : "middle";
    const std::vector<double> want{row.at("min").get<double>(), row.at(mid).get<double>(),
                                   row.at("max").get<double>()};
    check(axis.values.size() == 3, name + " has " + std::to_string(axis.values.size()) + " values");
    for (std::size_t v = 0; v < 3 && v < axis.values.size(); ++v) {
      check(axis.values[v].get<double>() == want[v], name + " value " + std::to_string(v));
    }
    if (one_factor) {
      HyperParams expected = plan.base;
      expected.set_value(name, row.at("default"));
      check(expected == plan.base, name + " default");
    }
  }
  if (golden.contains("defaults")) {
    for (const auto& [key, value] : golden.at("defaults").items()) {
      HyperParams expected = plan.base;
      expected.set_value(key, value);
      check(expected == plan.base, key + " default");
    }
  }
  const bool arena = golden.at("arena_enabled").get<bool>();
  const auto settings = plan.settings();
  check(static_cast<int>(settings.size()) == golden.at("settings").get<int>(),
        "settings " + std::to_string(settings.size()));
  for (const auto& s : settings) check(s.params.arena_enabled == arena, s.id + " arena flag");
  return bad;
}

}  // namespace zs::testing
