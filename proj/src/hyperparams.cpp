#include "zerosweep/hyperparams.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "zerosweep/errors.h"
#include "zerosweep/util.h"

namespace zs {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

int parse_int(std::string_view key, std::string_view text) {
  int v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "on" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "off" || text == "no") return false;
  throw ConfigError(std::string(key) + ": expected true or false, got '" + std::string(text) + "'");
}

std::uint64_t parse_seed(std::string_view text) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw ConfigError("seed: expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

// JSON scalars arrive as numbers, booleans or strings; set() takes text.
std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number_float()) return format_double(v.get<double>());
  throw ConfigError("expected a scalar value, got " + v.dump());
}

}  // namespace

const std::vector<std::string>& table1_parameters() {
  static const std::vector<std::string> keys = {"I",  "E",  "T_prime", "m", "c", "rs",
                                                "ep", "bs", "lr",      "d", "n", "u"};
  return keys;
}

const std::vector<std::string>& hyperparam_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k = table1_parameters();
    for (const char* extra : {"loss_target", "lambda", "arena_enabled", "augment_symmetries",
                              "channels", "fc1", "fc2", "elo_k"}) {
      k.emplace_back(extra);
    }
    return k;
  }();
  return keys;
}

void HyperParams::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "I") I = parse_int(key, value);
  else if (key == "E") E = parse_int(key, value);
  else if (key == "T_prime") T_prime = parse_int(key, value);
  else if (key == "m") m = parse_int(key, value);
  else if (key == "c") c = parse_real(key, value);
  else if (key == "rs") rs = parse_int(key, value);
  else if (key == "ep") ep = parse_int(key, value);
  else if (key == "bs") bs = parse_int(key, value);
  else if (key == "lr") lr = parse_real(key, value);
  else if (key == "d") d = parse_real(key, value);
  else if (key == "n") n = parse_int(key, value);
  else if (key == "u") u = parse_real(key, value);
  else if (key == "loss_target") {
    const double keep = loss_target.lambda;
    loss_target = parse_loss_target(value);
    if (value == "weighted") loss_target.lambda = keep;
  } else if (key == "lambda") {
    loss_target.lambda = parse_real(key, value);
  } else if (key == "arena_enabled") arena_enabled = parse_bool(key, value);
  else if (key == "augment_symmetries") augment_symmetries = parse_bool(key, value);
  else if (key == "channels") arch.channels = parse_int(key, value);
  else if (key == "fc1") arch.fc1 = parse_int(key, value);
  else if (key == "fc2") arch.fc2 = parse_int(key, value);
  else if (key == "elo_k") elo_k = parse_real(key, value);
  else throw ConfigError("unknown hyper-parameter '" + std::string(key) + "'");
}

void HyperParams::set_value(std::string_view key, const nlohmann::json& value) {
  set(key, scalar_text(value));
}

std::string HyperParams::get(std::string_view key) const {
  if (key == "I") return std::to_string(I);
  if (key == "E") return std::to_string(E);
  if (key == "T_prime") return std::to_string(T_prime);
  if (key == "m") return std::to_string(m);
  if (key == "c") return format_double(c);
  if (key == "rs") return std::to_string(rs);
  if (key == "ep") return std::to_string(ep);
  if (key == "bs") return std::to_string(bs);
  if (key == "lr") return format_double(lr);
  if (key == "d") return format_double(d);
  if (key == "n") return std::to_string(n);
  if (key == "u") return format_double(u);
  if (key == "loss_target") return to_string(loss_target);
  if (key == "lambda") return format_double(loss_target.lambda);
  if (key == "arena_enabled") return arena_enabled ? "true" : "false";
  if (key == "augment_symmetries") return augment_symmetries ? "true" : "false";
  if (key == "channels") return std::to_string(arch.channels);
  if (key == "fc1") return std::to_string(arch.fc1);
  if (key == "fc2") return std::to_string(arch.fc2);
  if (key == "elo_k") return format_double(elo_k);
  throw ConfigError("unknown hyper-parameter '" + std::string(key) + "'");
}

void HyperParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(I >= 1, "I must be >= 1");
  require(E >= 1, "E must be >= 1");
  require(T_prime >= 0, "T_prime must be >= 0");
  require(m >= 1, "m must be >= 1");
  require(c >= 0.0, "c must be >= 0");
  require(rs >= 1, "rs must be >= 1");
  require(n >= 1, "n must be >= 1");
  require(u >= 0.0 && u <= 1.0, "u must lie in [0, 1]");
  require(loss_target.lambda >= 0.0 && loss_target.lambda <= 1.0, "lambda must lie in [0, 1]");
  require(arch.channels >= 1 && arch.fc1 >= 1 && arch.fc2 >= 1, "network sizes must be >= 1");
  require(elo_k > 0.0, "elo_k must be > 0");
  train_config().validate();
}

nlohmann::json HyperParams::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  j["I"] = I;
  j["E"] = E;
  j["T_prime"] = T_prime;
  j["m"] = m;
  j["c"] = c;
  j["rs"] = rs;
  j["ep"] = ep;
  j["bs"] = bs;
  j["lr"] = lr;
  j["d"] = d;
  j["n"] = n;
  j["u"] = u;
  j["loss_target"] = to_string(loss_target);
  j["lambda"] = loss_target.lambda;
  j["arena_enabled"] = arena_enabled;
  j["augment_symmetries"] = augment_symmetries;
  j["channels"] = arch.channels;
  j["fc1"] = arch.fc1;
  j["fc2"] = arch.fc2;
  j["elo_k"] = elo_k;
  return j;
}

HyperParams HyperParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("hyper-parameters must be a JSON object");
  HyperParams p;
  // loss_target first so an explicit lambda wins.
  if (j.contains("loss_target")) p.set_value("loss_target", j.at("loss_target"));
  for (const auto& [key, value] : j.items()) {
    if (key != "loss_target") p.set_value(key, value);
  }
  return p;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  if (key == "game") game = parse_game_kind(value);
  else if (key == "size") size = parse_int(key, value);
  else if (key == "seed") seed = parse_seed(value);
  else if (key == "output") output_dir = std::string(value);
  else if (key == "parallelism") parallelism = parse_int(key, value);
  else params.set(key, value);
}

void RunConfig::apply_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

RunConfig RunConfig::parse(std::string_view text, const std::string& source) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = trim(body);
    if (body.empty()) continue;
    try {
      config.apply_override(body);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  std::stringstream buf;
  buf << f.rdbuf();
  return parse(buf.str(), path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "game = " << to_string(game) << "\nsize = " << size << "\nseed = " << seed
      << "\nparallelism = " << parallelism << '\n';
  if (!output_dir.empty()) out << "output = " << output_dir << '\n';
  for (const std::string& key : hyperparam_keys()) out << key << " = " << params.get(key) << '\n';
  return out.str();
}

nlohmann::json RunConfig::to_json() const {
  return {{"game", std::string(to_string(game))},
          {"size", size},
          {"seed", seed},
          {"output", output_dir},
          {"parallelism", parallelism},
          {"params", params.to_json()}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig config;
  try {
    config.game = parse_game_kind(j.at("game").get<std::string>());
    config.size = j.at("size").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.output_dir = j.value("output", std::string());
    config.parallelism = j.value("parallelism", 1);
    config.params = HyperParams::from_json(j.at("params"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad run configuration: ") + e.what());
  }
  return config;
}

}  // namespace zs
