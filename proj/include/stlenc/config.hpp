#pragma once

// Flat key=value configuration: files, typed bindings onto the module config
// structs, and a resolved dump for logging.

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "stlenc/augment.hpp"
#include "stlenc/bench.hpp"
#include "stlenc/encoder.hpp"
#include "stlenc/probe.hpp"
#include "stlenc/trainer.hpp"

namespace stlenc {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Reads `key = value` lines; '#' starts a comment, blank lines are skipped.
inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file: " + path);
  KeyValues kv;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw Error(ErrorKind::config, where + ": expected key = value");
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw Error(ErrorKind::config, where + ": empty key");
    if (seen.count(key)) throw Error(ErrorKind::config, where + ": duplicate key '" + key + "'");
    seen[key] = lineno;
    kv.emplace_back(std::move(key), std::move(value));
  }
  return kv;
}

namespace detail {

template <class T>
T parse_scalar(const std::string& key, const std::string& text) {
  auto fail = [&] { return Error(ErrorKind::config, "bad value '" + text + "' for key '" + key + "'"); };
  if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1") return true;
    if (text == "false" || text == "0") return false;
    throw fail();
  } else if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw fail();
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(v)) throw fail();
    }
    return v;
  }
}

template <class T>
std::string format_scalar(const T& v) {
  if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_floating_point_v<T>) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  } else {
    return std::to_string(v);
  }
}

}  // namespace detail

/// Named setters and getters over one or more config structs. Keys keep their
/// registration order for the resolved dump.
class ConfigBinding {
 public:
  template <class T>
  ConfigBinding& bind(const std::string& key, T& field) {
    add(key, [&field, key](const std::string& v) { field = detail::parse_scalar<T>(key, v); },
        [&field] { return detail::format_scalar(field); });
    return *this;
  }

  ConfigBinding& bind_custom(const std::string& key, std::function<void(const std::string&)> set,
                             std::function<std::string()> get) {
    add(key, std::move(set), std::move(get));
    return *this;
  }

  bool has(const std::string& key) const { return setters_.count(key) > 0; }
  const std::vector<std::string>& keys() const { return order_; }

  void set(const std::string& key, const std::string& value, const std::string& origin = "config") {
    const auto it = setters_.find(key);
    if (it == setters_.end()) throw Error(ErrorKind::config, "unknown key '" + key + "' in " + origin);
    it->second(value);
  }

  void apply(const KeyValues& kv, const std::string& origin) {
    for (const auto& [k, v] : kv) set(k, v, origin);
  }

  std::string get(const std::string& key) const { return getters_.at(key)(); }

  /// "key=value" lines in registration order.
  std::string dump() const {
    std::string out;
    for (const auto& k : order_) out += k + "=" + get(k) + "\n";
    return out;
  }

  /// Single-line form for logs.
  std::string dump_line() const {
    std::string out;
    for (const auto& k : order_) out += (out.empty() ? "" : " ") + k + "=" + get(k);
    return out;
  }

 private:
  void add(const std::string& key, std::function<void(const std::string&)> set, std::function<std::string()> get) {
    if (setters_.count(key)) throw Error(ErrorKind::config, "duplicate config key binding: " + key);
    setters_[key] = std::move(set);
    getters_[key] = std::move(get);
    order_.push_back(key);
  }

  std::map<std::string, std::function<void(const std::string&)>> setters_;
  std::map<std::string, std::function<std::string()>> getters_;
  std::vector<std::string> order_;
};

inline void bind_encoder(ConfigBinding& b, EncoderConfig& c) {
  b.bind("d_model", c.d_model)
      .bind("layers", c.layers)
      .bind("heads", c.heads)
      .bind("ff_dim", c.ff_dim)
      .bind("max_len", c.max_len)
      .bind("out_dim", c.out_dim)
      .bind("init_seed", c.seed)
      .bind_custom(
          "pooling", [&c](const std::string& v) { c.pooling = parse_pooling(v); },
          [&c] { return std::string(pooling_name(c.pooling)); });
}

inline void bind_train(ConfigBinding& b, TrainConfig& c) {
  b.bind("epochs", c.epochs)
      .bind("micro_batch", c.micro_batch)
      .bind("accumulation", c.accumulation)
      .bind("max_steps", c.max_steps)
      .bind("lr", c.optimizer.lr)
      .bind("beta1", c.optimizer.beta1)
      .bind("beta2", c.optimizer.beta2)
      .bind("eps", c.optimizer.eps)
      .bind("weight_decay", c.optimizer.weight_decay)
      .bind("gamma", c.loss.gamma)
      .bind("clamp", c.loss.clamp)
      .bind("include_diagonal", c.loss.include_diagonal)
      .bind("sigma2", c.sigma2)
      .bind("val_fraction", c.val_fraction)
      .bind("checkpoint_every", c.checkpoint_every)
      .bind("seed", c.seed);
}

inline void bind_augment(ConfigBinding& b, AugmentConfig& c) {
  for (std::size_t i = 0; i < kRuleCount; ++i) {
    b.bind("p_" + std::string(rule_name(static_cast<Rule>(i))), c.rule_probs[i]);
  }
  b.bind("min_depth", c.min_depth)
      .bind("vibration_prob", c.vibration_prob)
      .bind("duality_prob", c.duality_prob)
      .bind("vibration_threshold", c.vibration_threshold)
      .bind("vibration_width_lo", c.vibration_width_lo)
      .bind("vibration_width_hi", c.vibration_width_hi)
      .bind("shift_threshold_lo", c.shift_threshold_lo)
      .bind("shift_threshold_hi", c.shift_threshold_hi)
      .bind("shift_time_lo", c.shift_time_lo)
      .bind("shift_time_hi", c.shift_time_hi)
      .bind("target_equivalent", c.target_equivalent)
      .bind("target_parametric", c.target_parametric)
      .bind("target_hybrid", c.target_hybrid)
      .bind("seed", c.seed)
      .bind("num_vars", c.num_vars)
      .bind("points", c.points)
      .bind("horizon", c.horizon)
      .bind("max_tokens", c.max_tokens)
      .bind("pool_threshold_std", c.pool_threshold_std)
      .bind("until_max_lo", c.until_max_lo)
      .bind("until_max_width", c.until_max_width)
      .bind("max_attempts", c.max_attempts)
      .bind("max_rewrite_steps", c.max_rewrite_steps);
}

inline void bind_probe(ConfigBinding& b, ProbeConfig& c) {
  b.bind("hidden", c.hidden)
      .bind("probe_epochs", c.epochs)
      .bind("probe_batch", c.batch)
      .bind("probe_lr", c.lr)
      .bind("test_fraction", c.test_fraction)
      .bind("seed", c.seed);
}

inline void bind_bench(ConfigBinding& b, BenchConfig& c) {
  b.bind("points", c.points)
      .bind("vars", c.vars)
      .bind("horizon", c.horizon)
      .bind("sigma2", c.sigma2)
      .bind("repetitions", c.repetitions)
      .bind("warmup", c.warmup)
      .bind("seed", c.seed)
      .bind("memory_budget_mb", c.memory_budget_mb);
}

}  // namespace stlenc
