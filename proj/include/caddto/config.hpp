// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "caddto/rng.hpp"

namespace caddto {

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PpoConfig {
  double learning_rate = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int minibatch = 128;
  int n_steps = 2048;
  int epochs_per_update = 10;
  std::vector<int> hidden_dims{128, 128};
  double max_grad_norm = 0.0;  // 0 disables clipping
  bool normalize_advantages = true;
  double init_log_std = 0.0;
  int num_envs = 1;

  friend bool operator==(const PpoConfig&, const PpoConfig&) = default;
};

/// Physical, traffic and learning parameters of one simulated cell.
///
/// Energy is booked in "slot units": a device running at 1 W for one slot
/// spends one unit, and harvest/battery quantities use the same unit.
struct SystemConfig {
  // network and channel
  int num_users = 5;
  int num_antennas = 4;
  double cell_radius_m = 100.0;
  double guard_radius_m = 1.0;
  double slot_duration_s = 0.01;
  double bandwidth_hz = 1e6;
  double noise_power_w = 1e-12;
  double path_loss_exp = 2.0;
  double ref_distance_m = 1.0;
  double path_loss_at_ref_db = -30.0;
  double temporal_corr = 0.95;
  std::optional<double> doppler_hz;  // overrides temporal_corr via J0 when set
  double mobility_step_std_m = 1.0;

  // hardware
  double max_tx_power_w = 2.0;
  double max_local_power_w = 2.0;
  double cycles_per_bit = 300.0;
  double switching_cap = 1e-27;
  double carbon_factor_g_per_kwh = 700.0;
  double mec_energy_per_cycle_j = 1e-9;

  // traffic and energy
  double arrival_rate_mean = 4.0;
  double arrival_unit_bits = 1e4;
  double harvest_rate_mean = 3.0;
  double battery_capacity = 10.0;
  double initial_battery_fraction = 0.5;
  double buffer_capacity_bits = 2e5;

  // observation / reward shaping
  double sinr_target = 100.0;
  double harvest_norm = 5.0;
  std::array<double, 3> reward_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

  PpoConfig ppo;

  int episode_len = 100;
  int episodes = 13000;
  double lyapunov_v = 10.0;
  int grid_levels = 10;
  std::uint64_t seed = 42;

  // evaluation harness
  int eval_runs = 20;
  int eval_episodes_per_run = 10;
  bool stochastic_eval = false;

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;

  [[nodiscard]] double max_energy_demand() const { return max_local_power_w + max_tx_power_w; }
  [[nodiscard]] Rng rng_stream(std::uint64_t stream) const { return Rng(seed, stream); }
};

namespace detail {

// Calls f(name, field) for every serializable field. The key names are
// the on-disk config keys; keep them stable.
template <typename Config, typename F>
void visit_fields(Config& c, F&& f) {
  f("num_users", c.num_users);
  f("num_antennas", c.num_antennas);
  f("cell_radius_m", c.cell_radius_m);
  f("guard_radius_m", c.guard_radius_m);
  f("slot_duration_s", c.slot_duration_s);
  f("bandwidth_hz", c.bandwidth_hz);
  f("noise_power_w", c.noise_power_w);
  f("path_loss_exp", c.path_loss_exp);
  f("ref_distance_m", c.ref_distance_m);
  f("path_loss_at_ref_db", c.path_loss_at_ref_db);
  f("temporal_corr", c.temporal_corr);
  f("doppler_hz", c.doppler_hz);
  f("mobility_step_std_m", c.mobility_step_std_m);
  f("max_tx_power_w", c.max_tx_power_w);
  f("max_local_power_w", c.max_local_power_w);
  f("cycles_per_bit", c.cycles_per_bit);
  f("switching_cap", c.switching_cap);
  f("carbon_factor_g_per_kwh", c.carbon_factor_g_per_kwh);
  f("mec_energy_per_cycle_j", c.mec_energy_per_cycle_j);
  f("arrival_rate_mean", c.arrival_rate_mean);
  f("arrival_unit_bits", c.arrival_unit_bits);
  f("harvest_rate_mean", c.harvest_rate_mean);
  f("battery_capacity", c.battery_capacity);
  f("initial_battery_fraction", c.initial_battery_fraction);
  f("buffer_capacity_bits", c.buffer_capacity_bits);
  f("sinr_target", c.sinr_target);
  f("harvest_norm", c.harvest_norm);
  f("reward_weights", c.reward_weights);
  f("learning_rate", c.ppo.learning_rate);
  f("gamma", c.ppo.gamma);
  f("gae_lambda", c.ppo.gae_lambda);
  f("clip", c.ppo.clip);
  f("entropy_coef", c.ppo.entropy_coef);
  f("value_coef", c.ppo.value_coef);
  f("minibatch", c.ppo.minibatch);
  f("n_steps", c.ppo.n_steps);
  f("epochs_per_update", c.ppo.epochs_per_update);
  f("hidden_dims", c.ppo.hidden_dims);
  f("max_grad_norm", c.ppo.max_grad_norm);
  f("normalize_advantages", c.ppo.normalize_advantages);
  f("init_log_std", c.ppo.init_log_std);
  f("num_envs", c.ppo.num_envs);
  f("episode_len", c.episode_len);
  f("episodes", c.episodes);
  f("lyapunov_v", c.lyapunov_v);
  f("grid_levels", c.grid_levels);
  f("seed", c.seed);
  f("eval_runs", c.eval_runs);
  f("eval_episodes_per_run", c.eval_episodes_per_run);
  f("stochastic_eval", c.stochastic_eval);
}

template <typename T>
void assign_json(const nlohmann::json& j, T& field) {
  field = j.get<T>();
}

inline void assign_json(const nlohmann::json& j, std::optional<double>& field) {
  if (j.is_null()) {
    field.reset();
  } else {
    field = j.get<double>();
  }
}

template <typename T>
nlohmann::json to_json_value(const T& field) {
  return nlohmann::json(field);
}

inline nlohmann::json to_json_value(const std::optional<double>& field) {
  return field ? nlohmann::json(*field) : nlohmann::json(nullptr);
}

inline void set_field(SystemConfig& c, const std::string& key, const nlohmann::json& value) {
  bool found = false;
  visit_fields(c, [&](std::string_view name, auto& field) {
    if (name != key) return;
    found = true;
    try {
      assign_json(value, field);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': wrong type (" + e.what() + ")");
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

inline std::string line_context(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

inline SystemConfig default_config() { return SystemConfig{}; }

/// Throws ConfigError naming the first offending field.
inline void validate(const SystemConfig& c) {
  using detail::require;
  require(c.num_users >= 1, "num_users must be positive");
  require(c.num_antennas >= 1, "num_antennas must be positive");
  require(c.cell_radius_m > 0, "cell_radius_m must be positive");
  require(c.guard_radius_m >= 0 && c.guard_radius_m < c.cell_radius_m, "guard_radius_m out of range");
  require(c.slot_duration_s > 0, "slot_duration_s must be positive");
  require(c.bandwidth_hz > 0, "bandwidth_hz must be positive");
  require(c.noise_power_w > 0, "noise_power_w must be positive");
  require(c.path_loss_exp > 0, "path_loss_exp must be positive");
  require(c.ref_distance_m > 0, "ref_distance_m must be positive");
  require(c.temporal_corr >= 0 && c.temporal_corr <= 1, "temporal_corr out of range");
  require(!c.doppler_hz || *c.doppler_hz >= 0, "doppler_hz must be non-negative");
  require(c.mobility_step_std_m >= 0, "mobility_step_std_m must be non-negative");
  require(c.max_tx_power_w > 0, "max_tx_power_w must be positive");
  require(c.max_local_power_w > 0, "max_local_power_w must be positive");
  require(c.cycles_per_bit > 0, "cycles_per_bit must be positive");
  require(c.switching_cap > 0, "switching_cap must be positive");
  require(c.carbon_factor_g_per_kwh > 0, "carbon_factor_g_per_kwh must be positive");
  require(c.mec_energy_per_cycle_j > 0, "mec_energy_per_cycle_j must be positive");
  require(c.arrival_rate_mean >= 0, "arrival_rate_mean must be non-negative");
  require(c.arrival_unit_bits > 0, "arrival_unit_bits must be positive");
  require(c.harvest_rate_mean >= 0, "harvest_rate_mean must be non-negative");
  require(c.battery_capacity > 0, "battery_capacity must be positive");
  require(c.initial_battery_fraction >= 0 && c.initial_battery_fraction <= 1,
          "initial_battery_fraction out of range");
  require(c.buffer_capacity_bits > 0, "buffer_capacity_bits must be positive");
  require(c.buffer_capacity_bits > c.arrival_rate_mean * c.arrival_unit_bits,
          "buffer_capacity_bits must exceed one mean arrival");
  require(c.sinr_target > 0, "sinr_target must be positive");
  require(c.harvest_norm > 0, "harvest_norm must be positive");
  for (double w : c.reward_weights) require(w >= 0 && w <= 1, "reward_weights out of range");

  const auto& p = c.ppo;
  require(p.learning_rate > 0, "learning_rate must be positive");
  require(p.gamma >= 0 && p.gamma <= 1, "gamma out of range");
  require(p.gae_lambda >= 0 && p.gae_lambda <= 1, "gae_lambda out of range");
  require(p.clip > 0 && p.clip < 1, "clip out of range");
  require(p.entropy_coef >= 0, "entropy_coef must be non-negative");
  require(p.value_coef > 0, "value_coef must be positive");
  require(p.minibatch >= 1, "minibatch must be positive");
  require(p.n_steps >= 1, "n_steps must be positive");
  require(p.epochs_per_update >= 1, "epochs_per_update must be positive");
  require(!p.hidden_dims.empty(), "hidden_dims must be nonempty");
  for (int h : p.hidden_dims) require(h >= 1, "hidden_dims entries must be positive");
  require(p.max_grad_norm >= 0, "max_grad_norm must be non-negative");
  require(p.init_log_std >= -20 && p.init_log_std <= 2, "init_log_std out of range");
  require(p.num_envs >= 1 && p.n_steps % p.num_envs == 0, "num_envs must divide n_steps");

  require(c.episode_len >= 1, "episode_len must be positive");
  require(c.episodes >= 0, "episodes must be non-negative");
  require(c.lyapunov_v >= 0, "lyapunov_v must be non-negative");
  require(c.grid_levels >= 2, "grid_levels must be at least 2");
  require(c.eval_runs >= 1, "eval_runs must be positive");
  require(c.eval_episodes_per_run >= 1, "eval_episodes_per_run must be positive");
}

inline nlohmann::json to_json(const SystemConfig& c) {
  nlohmann::json j = nlohmann::json::object();
  detail::visit_fields(c, [&](std::string_view name, const auto& field) {
    j[std::string(name)] = detail::to_json_value(field);
  });
  return j;
}

inline std::string write_config(const SystemConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Applies the keys of a flat JSON object on top of `base`, then validates.
inline SystemConfig apply_json(SystemConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  for (const auto& [key, value] : j.items()) detail::set_field(base, key, value);
  validate(base);
  return base;
}

inline SystemConfig parse_config(std::string_view text, SystemConfig base = default_config()) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    validate(base);
    return base;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config parse error at " + detail::line_context(text, e.byte > 0 ? e.byte - 1 : 0) +
                      ": " + e.what());
  }
  return apply_json(std::move(base), j);
}

inline SystemConfig load_config(const std::string& path, SystemConfig base = default_config()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

/// Applies one "key=value" override. The value is read as JSON when it
/// parses as JSON and as a bare string otherwise.
inline SystemConfig apply_override(SystemConfig base, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value: '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  nlohmann::json obj = nlohmann::json::object();
  obj[key] = value;
  return apply_json(std::move(base), obj);
}

}  // namespace caddto
