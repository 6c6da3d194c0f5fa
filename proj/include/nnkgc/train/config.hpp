#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nnkgc/graph/graph_encoder.hpp"
#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/text/text_encoder.hpp"

namespace nnkgc::train {

inline constexpr const char* kOutputRootEnv = "NNKGC_OUTPUT_ROOT";

struct RunConfig {
  // Data and output.
  std::string dataset;
  std::string entity_file = "entity_texts.tsv";
  std::string output_dir = "runs/default";
  std::optional<std::uint64_t> seed;

  // Optimisation.
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double lr = 2e-3;
  double weight_decay = 1e-4;
  double lambda = 0.2;
  double tau = 0.05;
  bool learn_tau = true;

  // Neighborhoods.
  int hops = 1;
  std::size_t cap_per_hop = 32;
  bool resample_neighbors = true;

  // Graph encoder.
  graph::Variant encoder = graph::Variant::gat;
  std::size_t layers = 2;
  std::size_t heads = 3;
  std::size_t dim = 48;
  graph::Activation activation = graph::Activation::relu;
  double dropout = 0.0;

  // Text encoder.
  text::TextMode text_mode = text::TextMode::mean_pool;
  std::size_t text_layers = 1;
  std::size_t text_heads = 2;
  std::size_t ff_width = 96;
  std::size_t max_length = 64;
  std::size_t min_frequency = 1;

  // Edge reconstruction.
  bool vgae = true;
  double mask_ratio = 0.15;
  std::size_t latent_dim = 0;  // 0: dim / 2
  double kl_beta = 0.0;        // 0: 1 / n per neighborhood

  // Evaluation during training.
  std::size_t eval_every = 1;        // 0 disables per-epoch validation
  std::size_t max_eval_queries = 0;  // 0: all queries

  static const std::vector<std::string>& keys();

  // Throws ConfigError for an unknown key (listing the valid ones) or a value
  // that does not parse as the key's type.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  // Every key with its current value, in registry order. Unset seed is omitted.
  std::vector<std::pair<std::string, std::string>> entries() const;

  // Range checks across fields. require_seed additionally demands a seed.
  void validate(bool require_seed = true) const;

  text::TextEncoderConfig text_config() const;
  graph::GraphEncoderConfig graph_config() const;

  // output_dir, placed under $NNKGC_OUTPUT_ROOT when that is set and the path is relative.
  std::filesystem::path resolved_output_dir() const;
  kg::DatasetPaths dataset_paths() const;
};

// key = value lines; '#' starts a comment. Unknown keys throw ConfigError.
RunConfig read_config_file(const std::filesystem::path& path, RunConfig base = {});
void apply_config_text(RunConfig& config, std::string_view text, const std::string& origin);
std::string config_text(const RunConfig& config);
void write_config_file(const RunConfig& config, const std::filesystem::path& path);

std::string unknown_key_message(std::string_view key);

}  // namespace nnkgc::train
