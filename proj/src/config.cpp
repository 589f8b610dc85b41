#include "clinrl/config.hpp"

#include <cstdlib>
#include <string>

namespace clinrl {

namespace {

using io::Json;

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw Error(Errc::ConfigInvalid, field, why);
}

bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

template <class T>
void read(const Json& obj, const char* key, T& out, const char* section) {
  out = io::get_or<T>(obj, key, out, section);
}

}  // namespace

void EngineConfig::validate() const {
  const auto& t = thresholds;
  require(in_unit(t.tau), "thresholds.tau", "must lie in [0, 1]");
  for (const auto& [stage, tau] : t.stage_tau) {
    require(in_unit(tau), "thresholds.stage_tau", std::string(to_string(stage)) + " must lie in [0, 1]");
  }
  require(t.theta_sem > 0.0 && t.theta_sem <= 1.0, "thresholds.theta_sem", "must lie in (0, 1]");
  require(t.theta_cluster > 0.0 && t.theta_cluster <= 1.0, "thresholds.theta_cluster", "must lie in (0, 1]");
  require(t.theta_match > 0.0 && t.theta_match <= 1.0, "thresholds.theta_match", "must lie in (0, 1]");
  require(in_unit(t.tau_min) && in_unit(t.tau_max) && t.tau_min < t.tau_max, "thresholds.tau_min",
          "need 0 <= tau_min < tau_max <= 1");
  require(t.kappa > 0.0, "thresholds.kappa", "must be positive");
  require(t.eps_fact > 0.0 && t.eps_fact < 1e-2, "thresholds.eps_fact", "must lie in (0, 0.01)");
  require(t.eps_adv > 0.0 && t.eps_adv < 1e-2, "thresholds.eps_adv", "must lie in (0, 0.01)");
  for (const auto& [name, v] : violations.types()) {
    require(v.lambda > 0.0 && v.lambda < 1.0, "violations", name + " must lie in (0, 1)");
  }
  for (const auto stage : kStages) {
    require(instructions.contains(stage), "instructions", "missing " + std::string(to_string(stage)));
  }
  require(parallelism.judge >= 1 && parallelism.cache >= 1 && parallelism.pipeline >= 1 && parallelism.slots >= 1,
          "parallelism", "limits must be at least 1");
  require(backends.timeout_seconds > 0, "backends.timeout_seconds", "must be positive");
  require(server.port > 0 && server.port < 65536, "server.port", "must lie in [1, 65535]");
  require(server.threads >= 1, "server.threads", "must be at least 1");
  try {
    lifecycle.validate();
  } catch (const Error& e) {
    throw Error(Errc::ConfigInvalid, "lifecycle", e.detail());
  }
}

EngineConfig config_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, "$", "expected an object");
  try {
    io::check_schema(j);
    EngineConfig c;
    c.seed = io::get_or<std::uint64_t>(j, "seed", c.seed);

    if (j.contains("thresholds")) {
      const Json& t = j.at("thresholds");
      auto& th = c.thresholds;
      read(t, "tau", th.tau, "thresholds");
      read(t, "theta_sem", th.theta_sem, "thresholds");
      read(t, "theta_cluster", th.theta_cluster, "thresholds");
      read(t, "theta_match", th.theta_match, "thresholds");
      read(t, "tau_min", th.tau_min, "thresholds");
      read(t, "tau_max", th.tau_max, "thresholds");
      read(t, "kappa", th.kappa, "thresholds");
      read(t, "eps_fact", th.eps_fact, "thresholds");
      read(t, "eps_adv", th.eps_adv, "thresholds");
      if (t.contains("stage_tau")) {
        for (const auto& [k, v] : io::get<std::map<std::string, double>>(t, "stage_tau", "thresholds")) {
          th.stage_tau[stage_from_string(k)] = v;
        }
      }
    }
    if (j.contains("violations")) {
      for (const auto& [name, lambda] : io::get<std::map<std::string, double>>(j, "violations")) {
        c.violations.set(name, lambda);
      }
    }
    if (j.contains("instructions")) {
      for (const auto& [k, v] : io::get<std::map<std::string, std::string>>(j, "instructions")) {
        c.instructions.set(stage_from_string(k), v);
      }
    }
    if (j.contains("backends")) {
      const Json& b = j.at("backends");
      auto& be = c.backends;
      read(b, "judge", be.judge, "backends");
      read(b, "verifier", be.verifier, "backends");
      read(b, "embedder", be.embedder, "backends");
      read(b, "extractor", be.extractor, "backends");
      read(b, "policy", be.policy, "backends");
      read(b, "allow_test_doubles", be.allow_test_doubles, "backends");
      read(b, "timeout_seconds", be.timeout_seconds, "backends");
    }
    if (j.contains("parallelism")) {
      const Json& p = j.at("parallelism");
      read(p, "judge", c.parallelism.judge, "parallelism");
      read(p, "cache", c.parallelism.cache, "parallelism");
      read(p, "pipeline", c.parallelism.pipeline, "parallelism");
      read(p, "slots", c.parallelism.slots, "parallelism");
    }
    if (j.contains("cache")) {
      const Json& k = j.at("cache");
      c.cache.directory = io::get_or<std::string>(k, "directory", c.cache.directory.string(), "cache");
      read(k, "enabled", c.cache.enabled, "cache");
      read(k, "numeric_guard", c.cache.numeric_guard, "cache");
    }
    if (j.contains("lifecycle")) {
      const Json& l = j.at("lifecycle");
      read(l, "admission_threshold", c.lifecycle.admission_threshold, "lifecycle");
      read(l, "exit_threshold", c.lifecycle.exit_threshold, "lifecycle");
      read(l, "clean_epochs", c.lifecycle.clean_epochs, "lifecycle");
      read(l, "window", c.lifecycle.window, "lifecycle");
    }
    if (j.contains("server")) {
      const Json& s = j.at("server");
      read(s, "host", c.server.host, "server");
      read(s, "port", c.server.port, "server");
      read(s, "threads", c.server.threads, "server");
    }
    return c;
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigInvalid) throw;
    throw Error(Errc::ConfigInvalid, e.subject(), e.detail());
  }
}

Json to_json(const EngineConfig& c) {
  Json stage_tau = Json::object();
  for (const auto& [s, v] : c.thresholds.stage_tau) stage_tau[std::string(to_string(s))] = v;
  Json violations = Json::object();
  for (const auto& [name, v] : c.violations.types()) violations[name] = v.lambda;
  Json instructions = Json::object();
  for (const auto s : kStages) instructions[std::string(to_string(s))] = c.instructions.at(s);
  const auto& t = c.thresholds;
  return {{"schema_version", io::kSchemaVersion},
          {"seed", c.seed},
          {"thresholds",
           {{"tau", t.tau},
            {"stage_tau", stage_tau},
            {"theta_sem", t.theta_sem},
            {"theta_cluster", t.theta_cluster},
            {"theta_match", t.theta_match},
            {"tau_min", t.tau_min},
            {"tau_max", t.tau_max},
            {"kappa", t.kappa},
            {"eps_fact", t.eps_fact},
            {"eps_adv", t.eps_adv}}},
          {"violations", violations},
          {"instructions", instructions},
          {"backends",
           {{"judge", c.backends.judge},
            {"verifier", c.backends.verifier},
            {"embedder", c.backends.embedder},
            {"extractor", c.backends.extractor},
            {"policy", c.backends.policy},
            {"allow_test_doubles", c.backends.allow_test_doubles},
            {"timeout_seconds", c.backends.timeout_seconds}}},
          {"parallelism",
           {{"judge", c.parallelism.judge},
            {"cache", c.parallelism.cache},
            {"pipeline", c.parallelism.pipeline},
            {"slots", c.parallelism.slots}}},
          {"cache",
           {{"directory", c.cache.directory.string()},
            {"enabled", c.cache.enabled},
            {"numeric_guard", c.cache.numeric_guard}}},
          {"lifecycle",
           {{"admission_threshold", c.lifecycle.admission_threshold},
            {"exit_threshold", c.lifecycle.exit_threshold},
            {"clean_epochs", c.lifecycle.clean_epochs},
            {"window", c.lifecycle.window}}},
          {"server", {{"host", c.server.host}, {"port", c.server.port}, {"threads", c.server.threads}}}};
}

EngineConfig load_config(const std::optional<std::filesystem::path>& path) {
  std::optional<std::filesystem::path> source = path;
  if (!source) {
    if (const char* env = std::getenv("CLINRL_CONFIG"); env && *env) source = env;
  }
  EngineConfig c;
  if (source) {
    std::string body;
    try {
      body = io::read_file(*source);
    } catch (const Error& e) {
      throw Error(Errc::ConfigInvalid, source->string(), "cannot read config file");
    }
    Json j;
    try {
      j = io::parse(body, source->string());
    } catch (const Error& e) {
      throw Error(Errc::ConfigInvalid, source->string(), e.detail());
    }
    c = config_from_json(j);
  }
  if (const char* env = std::getenv("CLINRL_SEED"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw Error(Errc::ConfigInvalid, "CLINRL_SEED", "not an unsigned integer");
    c.seed = v;
  }
  c.validate();
  return c;
}

}  // namespace clinrl
