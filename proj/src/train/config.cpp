#include "nnkgc/train/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "nnkgc/errors.hpp"

namespace nnkgc::train {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view type) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(type) + ")");
}

template <typename T>
T parse_integer(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

struct Entry {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

#define NNKGC_STRING(field) \
  Entry { #field, [](const RunConfig& c) { return c.field; }, \
          [](RunConfig& c, std::string_view v) { c.field = std::string(v); } }
#define NNKGC_SIZE(field) \
  Entry { #field, [](const RunConfig& c) { return std::to_string(c.field); }, \
          [](RunConfig& c, std::string_view v) { c.field = parse_integer<std::size_t>(#field, v); } }
#define NNKGC_DOUBLE(field) \
  Entry { #field, [](const RunConfig& c) { return format_double(c.field); }, \
          [](RunConfig& c, std::string_view v) { c.field = parse_double(#field, v); } }
#define NNKGC_BOOL(field) \
  Entry { #field, [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }, \
          [](RunConfig& c, std::string_view v) { c.field = parse_bool(#field, v); } }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      NNKGC_STRING(dataset),
      NNKGC_STRING(entity_file),
      NNKGC_STRING(output_dir),
      Entry{"seed",
            [](const RunConfig& c) { return c.seed ? std::to_string(*c.seed) : std::string(); },
            [](RunConfig& c, std::string_view v) { c.seed = parse_integer<std::uint64_t>("seed", v); }},
      NNKGC_SIZE(epochs),
      NNKGC_SIZE(batch_size),
      NNKGC_DOUBLE(lr),
      NNKGC_DOUBLE(weight_decay),
      NNKGC_DOUBLE(lambda),
      NNKGC_DOUBLE(tau),
      NNKGC_BOOL(learn_tau),
      Entry{"hops", [](const RunConfig& c) { return std::to_string(c.hops); },
            [](RunConfig& c, std::string_view v) { c.hops = parse_integer<int>("hops", v); }},
      NNKGC_SIZE(cap_per_hop),
      NNKGC_BOOL(resample_neighbors),
      Entry{"encoder", [](const RunConfig& c) { return std::string(graph::variant_name(c.encoder)); },
            [](RunConfig& c, std::string_view v) { c.encoder = graph::parse_variant(v); }},
      NNKGC_SIZE(layers),
      NNKGC_SIZE(heads),
      NNKGC_SIZE(dim),
      Entry{"activation",
            [](const RunConfig& c) { return std::string(graph::activation_name(c.activation)); },
            [](RunConfig& c, std::string_view v) { c.activation = graph::parse_activation(v); }},
      NNKGC_DOUBLE(dropout),
      Entry{"text_mode", [](const RunConfig& c) { return std::string(text::text_mode_name(c.text_mode)); },
            [](RunConfig& c, std::string_view v) { c.text_mode = text::parse_text_mode(v); }},
      NNKGC_SIZE(text_layers),
      NNKGC_SIZE(text_heads),
      NNKGC_SIZE(ff_width),
      NNKGC_SIZE(max_length),
      NNKGC_SIZE(min_frequency),
      NNKGC_BOOL(vgae),
      NNKGC_DOUBLE(mask_ratio),
      NNKGC_SIZE(latent_dim),
      NNKGC_DOUBLE(kl_beta),
      NNKGC_SIZE(eval_every),
      NNKGC_SIZE(max_eval_queries),
  };
  return entries;
}

#undef NNKGC_STRING
#undef NNKGC_SIZE
#undef NNKGC_DOUBLE
#undef NNKGC_BOOL

const Entry& find_entry(std::string_view key) {
  for (const auto& e : registry())
    if (key == e.key) return e;
  throw ConfigError(unknown_key_message(key));
}

}  // namespace

std::string unknown_key_message(std::string_view key) {
  std::string msg = "unknown config key '" + std::string(key) + "'; valid keys:";
  for (const auto& e : registry()) msg += std::string(" ") + e.key;
  return msg;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& e : registry()) k.emplace_back(e.key);
    return k;
  }();
  return out;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  find_entry(key).set(*this, trim(value));
}

std::string RunConfig::get(std::string_view key) const { return find_entry(key).get(*this); }

std::vector<std::pair<std::string, std::string>> RunConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : registry()) {
    if (std::string_view(e.key) == "seed" && !seed) continue;
    out.emplace_back(e.key, e.get(*this));
  }
  return out;
}

void RunConfig::validate(bool require_seed) const {
  if (require_seed && !seed) throw ConfigError("seed is required (set seed = <integer>)");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2 for in-batch negatives");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ConfigError("lambda must lie in [0, 1], got " + format_double(lambda));
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (hops < 1) throw ConfigError("hops must be at least 1");
  if (cap_per_hop < 1) throw ConfigError("cap_per_hop must be at least 1");
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) throw ConfigError("mask_ratio must lie in (0, 1)");
  if (kl_beta < 0.0) throw ConfigError("kl_beta must be non-negative");
  text_config().validate();
  graph_config().validate();
}

text::TextEncoderConfig RunConfig::text_config() const {
  text::TextEncoderConfig c;
  c.dim = dim;
  c.mode = text_mode;
  c.layers = text_layers;
  c.heads = text_heads;
  c.ff_width = ff_width;
  c.max_length = max_length;
  return c;
}

graph::GraphEncoderConfig RunConfig::graph_config() const {
  graph::GraphEncoderConfig c;
  c.variant = encoder;
  c.layers = layers;
  c.dim = dim;
  c.gat_heads = heads;
  c.activation = activation;
  c.dropout = dropout;
  return c;
}

std::filesystem::path RunConfig::resolved_output_dir() const {
  std::filesystem::path out(output_dir);
  if (const char* root = std::getenv(kOutputRootEnv); root && *root && out.is_relative())
    return std::filesystem::path(root) / out;
  return out;
}

kg::DatasetPaths RunConfig::dataset_paths() const {
  if (dataset.empty()) throw ConfigError("dataset is not set");
  return kg::DatasetPaths::in_directory(dataset, entity_file);
}

void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    try {
      config.set(key, std::string_view(body).substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
}

RunConfig read_config_file(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(base, ss.str(), path.string());
  return base;
}

std::string config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [k, v] : config.entries()) out += k + " = " + v + "\n";
  return out;
}

void write_config_file(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << config_text(config);
}

}  // namespace nnkgc::train
