#include "msinr/app/config.hpp"

#include "msinr/error.hpp"
#include "msinr/signals.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace msinr::app {

using nlohmann::json;

namespace {

constexpr std::pair<Method, const char*> kMethods[] = {
    {Method::meta_sparse, "meta_sparse"}, {Method::random, "random"}, {Method::dense_narrow, "dense_narrow"},
    {Method::scratch, "scratch"},         {Method::oneshot, "oneshot"}, {Method::imp, "imp"},
    {Method::ticket, "ticket"},
};

void check_keys(const json& obj, const char* block, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string("config block '") + block + "' must be an object");
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; }))
      throw ConfigError(std::string("unknown key '") + item.key() + "' in config block '" + block + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

// Counts must be non-negative integers; nlohmann would silently wrap -1.
void read_count(const json& obj, const char* key, std::size_t& into) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  into = v.get<std::size_t>();
}

void read_seed(const json& obj, const char* key, std::uint64_t& into) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(std::string("'") + key + "' must be a non-negative integer");
  into = v.get<std::uint64_t>();
}

void apply_arch(const json& j, ArchSpec& a) {
  check_keys(j, "arch", {"kind", "in_dim", "out_dim", "width", "hidden_layers", "omega0", "omega_overrides",
                         "sigma", "fourier_dim", "seed", "prune_biases"});
  if (j.contains("kind")) a.kind = parse_arch_kind(j.at("kind").get<std::string>());
  read_count(j, "in_dim", a.in_dim);
  read_count(j, "out_dim", a.out_dim);
  read_count(j, "width", a.width);
  read_count(j, "hidden_layers", a.hidden_layers);
  read(j, "omega0", a.omega0);
  read(j, "omega_overrides", a.omega_overrides);
  read(j, "sigma", a.sigma);
  read_count(j, "fourier_dim", a.fourier_dim);
  read_seed(j, "seed", a.seed);
  read(j, "prune_biases", a.prune_biases);
}

void apply_data(const json& j, DataConfig& d) {
  check_keys(j, "data", {"source", "synth_seed", "synth_n", "size", "resize_short", "split_ratio", "split_seed"});
  read(j, "source", d.source);
  read_seed(j, "synth_seed", d.synth_seed);
  read_count(j, "synth_n", d.synth_n);
  read_count(j, "size", d.size);
  read_count(j, "resize_short", d.resize_short);
  read(j, "split_ratio", d.split_ratio);
  read_seed(j, "split_seed", d.split_seed);
}

void apply_meta(const json& j, MetaConfig& m) {
  check_keys(j, "meta", {"outer_lr", "inner_lr", "inner_steps", "outer_steps", "retrain_steps", "batch", "kind",
                         "outer_optimizer", "seed", "precision", "workers"});
  read(j, "outer_lr", m.outer_lr);
  read(j, "inner_lr", m.inner_lr);
  read_count(j, "inner_steps", m.inner_steps);
  read_count(j, "outer_steps", m.outer_steps);
  read_count(j, "retrain_steps", m.retrain_steps);
  read_count(j, "batch", m.batch);
  if (j.contains("kind")) m.kind = parse_meta_kind(j.at("kind").get<std::string>());
  if (j.contains("outer_optimizer")) m.outer = parse_outer_optimizer(j.at("outer_optimizer").get<std::string>());
  read_seed(j, "seed", m.seed);
  if (j.contains("precision")) m.precision = parse_precision(j.at("precision").get<std::string>());
  read_count(j, "workers", m.workers);
}

void apply_prune(const json& j, PruneConfig& p) {
  check_keys(j, "prune", {"method", "gamma", "kappa", "kappa_fraction", "prune_seed", "imp_rounds", "probe_signals"});
  if (j.contains("method")) p.method = parse_method(j.at("method").get<std::string>());
  read(j, "gamma", p.gamma);
  read_count(j, "kappa", p.kappa);
  read(j, "kappa_fraction", p.kappa_fraction);
  read_seed(j, "prune_seed", p.prune_seed);
  read_count(j, "imp_rounds", p.imp_rounds);
  read_count(j, "probe_signals", p.probe_signals);
}

void apply_eval(const json& j, EvalConfig& e) {
  check_keys(j, "eval", {"budget", "n_signals", "lr", "seed", "split", "levels"});
  read_count(j, "budget", e.budget);
  read_count(j, "n_signals", e.n_signals);
  read(j, "lr", e.lr);
  read_seed(j, "seed", e.seed);
  read(j, "split", e.split);
  read_count(j, "levels", e.levels);
}

void apply_ticket(const json& j, TicketConfig& t) {
  check_keys(j, "ticket", {"train_steps", "lr", "rounds", "image"});
  read_count(j, "train_steps", t.train_steps);
  read(j, "lr", t.lr);
  read_count(j, "rounds", t.rounds);
  read(j, "image", t.image);
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [k, name] : kMethods)
    if (k == m) return name;
  return "unknown";
}

Method parse_method(const std::string& s) {
  for (const auto& [k, name] : kMethods)
    if (s == name) return k;
  throw ConfigError("unknown method '" + s + "'");
}

std::size_t PruneConfig::target(std::size_t prunable) const {
  if (kappa != 0) return kappa;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(kappa_fraction * static_cast<double>(prunable))));
}

void ExperimentConfig::validate() const {
  arch.validate();
  meta.validate();
  if (data.source.empty()) throw ConfigError("data.source must be 'synth' or a directory");
  if (data.source == "synth") {
    if (data.synth_n < 2) throw ConfigError("data.synth_n must be >= 2");
    if (data.size < 8) throw ConfigError("data.size must be >= 8 for synthetic data");
  } else if (data.size < 1) {
    throw ConfigError("data.size must be >= 1");
  }
  if (!(data.split_ratio >= 0.0 && data.split_ratio <= 1.0)) throw ConfigError("data.split_ratio must lie in [0, 1]");
  if (!(prune.gamma > 0.0 && prune.gamma < 1.0)) throw ConfigError("prune.gamma must lie in (0, 1)");
  if (prune.kappa == 0 && !(prune.kappa_fraction > 0.0 && prune.kappa_fraction <= 1.0))
    throw ConfigError("prune.kappa_fraction must lie in (0, 1]");
  if (prune.imp_rounds < 1) throw ConfigError("prune.imp_rounds must be >= 1");
  if (!(eval.lr > 0.0)) throw ConfigError("eval.lr must be > 0");
  if (eval.n_signals < 1) throw ConfigError("eval.n_signals must be >= 1");
  if (eval.split != "train" && eval.split != "val") throw ConfigError("eval.split must be 'train' or 'val'");
  if (!(ticket.lr > 0.0)) throw ConfigError("ticket.lr must be > 0");
  if (ticket.rounds < 1) throw ConfigError("ticket.rounds must be >= 1");
  WidthTable{widths}.validate();
}

SparsitySchedule ExperimentConfig::schedule() const {
  return {prune.gamma, prune.target(full_mask(arch).prunable_count())};
}

EvalOptions ExperimentConfig::eval_options(const std::string& method) const {
  EvalOptions o;
  o.method = method;
  o.split = eval.split;
  o.n_signals = eval.n_signals;
  o.budget = eval.budget;
  o.lr = eval.lr;
  o.seed = eval.seed;
  o.workers = meta.workers;
  o.precision = meta.precision;
  return o;
}

std::vector<std::string> preset_names() { return {"full", "ticket", "desk", "desk-reptile"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "full") {
    c.arch.width = 256;
    c.arch.hidden_layers = 4;
    c.arch.omega0 = 200.0;
    c.data.size = 178;
    c.data.synth_n = 100;
    c.meta = MetaConfig{};  // outer 1e-5, inner 1e-3, t=2, tau=150000, tau~=30000, B=3
    c.prune.gamma = 0.2;
    c.prune.kappa_fraction = 0.05;
    c.eval.budget = 100;
    c.eval.n_signals = 100;
    c.eval.lr = 1e-3;
    c.eval.levels = 0;
    return c;
  }
  if (name == "ticket") {
    c.arch.width = 256;
    c.arch.hidden_layers = 4;
    c.arch.omega0 = 30.0;
    c.arch.sigma = 20.0;
    c.data.size = 178;
    c.ticket.train_steps = 50000;
    c.ticket.lr = 1e-4;
    c.ticket.rounds = 10;
    c.prune.method = Method::ticket;
    return c;
  }
  if (name == "desk" || name == "desk-reptile") {
    c.arch.width = 64;
    c.arch.hidden_layers = 2;
    c.arch.omega0 = 30.0;
    c.data.size = 32;
    c.data.synth_n = 10;
    c.meta.outer_lr = 1e-3;
    c.meta.inner_lr = 5e-5;
    c.meta.inner_steps = 2;
    c.meta.outer_steps = 5000;
    c.meta.retrain_steps = 1000;
    c.meta.batch = 3;
    c.meta.precision = Precision::f32;
    c.prune.kappa_fraction = 0.33;
    c.prune.probe_signals = 10;
    c.eval.n_signals = 10;
    c.eval.levels = 3;
    if (name == "desk-reptile") {
      c.meta.kind = MetaKind::reptile;
      c.meta.outer_lr = 0.1;
    }
    return c;
  }
  throw ConfigError("unknown preset '" + name + "'");
}

std::string to_json(const ExperimentConfig& c, int indent) {
  json j;
  j["name"] = c.name;
  j["arch"] = {{"kind", to_string(c.arch.kind)},
               {"in_dim", c.arch.in_dim},
               {"out_dim", c.arch.out_dim},
               {"width", c.arch.width},
               {"hidden_layers", c.arch.hidden_layers},
               {"omega0", c.arch.omega0},
               {"omega_overrides", c.arch.omega_overrides},
               {"sigma", c.arch.sigma},
               {"fourier_dim", c.arch.fourier_dim},
               {"seed", c.arch.seed},
               {"prune_biases", c.arch.prune_biases}};
  j["data"] = {{"source", c.data.source},         {"synth_seed", c.data.synth_seed},
               {"synth_n", c.data.synth_n},       {"size", c.data.size},
               {"resize_short", c.data.resize_short}, {"split_ratio", c.data.split_ratio},
               {"split_seed", c.data.split_seed}};
  j["meta"] = {{"outer_lr", c.meta.outer_lr},
               {"inner_lr", c.meta.inner_lr},
               {"inner_steps", c.meta.inner_steps},
               {"outer_steps", c.meta.outer_steps},
               {"retrain_steps", c.meta.retrain_steps},
               {"batch", c.meta.batch},
               {"kind", to_string(c.meta.kind)},
               {"outer_optimizer", to_string(c.meta.outer)},
               {"seed", c.meta.seed},
               {"precision", to_string(c.meta.precision)},
               {"workers", c.meta.workers}};
  j["prune"] = {{"method", to_string(c.prune.method)}, {"gamma", c.prune.gamma},
                {"kappa", c.prune.kappa},              {"kappa_fraction", c.prune.kappa_fraction},
                {"prune_seed", c.prune.prune_seed},    {"imp_rounds", c.prune.imp_rounds},
                {"probe_signals", c.prune.probe_signals}};
  j["eval"] = {{"budget", c.eval.budget}, {"n_signals", c.eval.n_signals}, {"lr", c.eval.lr},
               {"seed", c.eval.seed},     {"split", c.eval.split},         {"levels", c.eval.levels}};
  j["ticket"] = {{"train_steps", c.ticket.train_steps}, {"lr", c.ticket.lr}, {"rounds", c.ticket.rounds},
                 {"image", c.ticket.image}};
  j["widths"] = c.widths;
  j["out_dir"] = c.out_dir;
  j["log_every"] = c.log_every;
  return j.dump(indent);
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "root", {"preset", "name", "arch", "data", "meta", "prune", "eval", "ticket", "widths", "out_dir",
                         "log_every"});
  ExperimentConfig c = preset(j.value("preset", std::string("full")));
  try {
    read(j, "name", c.name);
    if (j.contains("arch")) apply_arch(j.at("arch"), c.arch);
    if (j.contains("data")) apply_data(j.at("data"), c.data);
    if (j.contains("meta")) apply_meta(j.at("meta"), c.meta);
    if (j.contains("prune")) apply_prune(j.at("prune"), c.prune);
    if (j.contains("eval")) apply_eval(j.at("eval"), c.eval);
    if (j.contains("ticket")) apply_ticket(j.at("ticket"), c.ticket);
    read(j, "widths", c.widths);
    read(j, "out_dir", c.out_dir);
    read_count(j, "log_every", c.log_every);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

SignalSet load_data(const DataConfig& data) {
  if (data.source == "synth") return synth_set(data.synth_seed, data.synth_n, data.size);
  LoadOptions o;
  o.size = data.size;
  o.resize_short = data.resize_short;
  o.split_ratio = data.split_ratio;
  o.seed = data.split_seed;
  return load_image_dir(data.source, o);
}

}  // namespace msinr::app
