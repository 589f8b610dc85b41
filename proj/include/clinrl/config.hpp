#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "clinrl/fact_reward.hpp"
#include "clinrl/io.hpp"
#include "clinrl/pipeline.hpp"
#include "clinrl/rubric.hpp"
#include "clinrl/spar.hpp"

namespace clinrl {

struct Thresholds {
  double tau = 0.7;
  std::map<StageType, double> stage_tau;
  double theta_sem = 0.95;
  double theta_cluster = 0.90;
  double theta_match = 0.90;
  double tau_min = 0.75;
  double tau_max = 0.95;
  double kappa = 10.0;
  double eps_fact = kFactEpsilon;
  double eps_adv = kAdvantageEpsilon;
};

struct BackendEndpoints {
  std::string judge;
  std::string verifier;
  std::string embedder;
  std::string extractor;
  std::string policy;
  /// Empty endpoints fall back to the offline test doubles only when set.
  bool allow_test_doubles = false;
  int timeout_seconds = 30;
};

struct ParallelismLimits {
  std::size_t judge = 8;
  std::size_t cache = 1;
  std::size_t pipeline = 1;
  std::size_t slots = 4;
};

struct CacheConfig {
  std::filesystem::path directory;
  bool enabled = true;
  bool numeric_guard = true;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t threads = 8;
};

struct EngineConfig {
  Thresholds thresholds;
  ViolationTaxonomy violations = ViolationTaxonomy::defaults();
  StageInstructions instructions = StageInstructions::defaults();
  BackendEndpoints backends;
  ParallelismLimits parallelism;
  CacheConfig cache;
  LifecyclePolicy lifecycle;
  ServerConfig server;
  std::uint64_t seed = 7;

  GateParams gate() const { return {thresholds.tau_min, thresholds.tau_max, thresholds.kappa}; }
  GateThresholds stage_thresholds() const { return {thresholds.tau, thresholds.stage_tau}; }

  /// Throws ConfigInvalid naming the first out-of-range field.
  void validate() const;
};

EngineConfig config_from_json(const io::Json& j);
io::Json to_json(const EngineConfig& c);

/// Loads `path` when given, else the file named by CLINRL_CONFIG, else
/// defaults; then applies CLINRL_SEED and validates.
EngineConfig load_config(const std::optional<std::filesystem::path>& path);

}  // namespace clinrl
