#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nnkgc/kg/knowledge_graph.hpp"
#include "nnkgc/train/config.hpp"
#include "nnkgc/train/ranking.hpp"
#include "nnkgc/train/trainer.hpp"

namespace nnkgc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Raised by preprocess when counts differ from the expected manifest.
class ValidationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// load_dataset + add_inverse_relations.
kg::KnowledgeGraph load_graph(const kg::DatasetPaths& paths);

struct PreprocessOptions {
  std::filesystem::path dataset_dir;
  std::filesystem::path out_dir;
  std::string entity_file = "entity_texts.tsv";
  std::filesystem::path descriptions;  // optional id TAB description override
  std::optional<std::filesystem::path> expected_manifest;
  std::size_t min_frequency = 1;
};

struct PreprocessResult {
  kg::Manifest manifest;
  std::vector<kg::ManifestMismatch> mismatches;
  double seconds = 0.0;
};

// Writes manifest.txt, vocab.txt, entities.tsv, relations.tsv and
// preprocess.json. Throws ValidationFailed after writing when counts differ
// from the expected manifest.
PreprocessResult cmd_preprocess(const PreprocessOptions& options, std::ostream& out);

// Loads the dataset named by config, trains, and writes checkpoint.txt,
// train.log and config.resolved into config.resolved_output_dir().
train::TrainOutcome cmd_train(const train::RunConfig& config, std::ostream& out);

struct EvalCommandResult {
  train::EvalReport report;
  std::filesystem::path report_path;
};

// Prints key=value metrics and appends one JSON line per direction to report
// (default: eval_<split>.jsonl next to the checkpoint).
EvalCommandResult cmd_eval(const std::filesystem::path& checkpoint, kg::Split split,
                           std::optional<std::filesystem::path> report, bool verbose,
                           std::ostream& out, std::optional<std::string> dataset_override = std::nullopt);

enum class AblationAxis { encoder, hops };
AblationAxis parse_axis(std::string_view name);

struct AblationRow {
  std::string label;
  bool failed = false;
  std::string error;
  train::RankingMetrics metrics;
};

struct AblationTable {
  AblationAxis axis;
  std::vector<AblationRow> rows;
};

// One training per axis value (shared seed), evaluated on the test split.
// Writes ablation_<axis>.txt and ablation_<axis>.jsonl under the output dir.
AblationTable cmd_ablate(const train::RunConfig& base, AblationAxis axis, std::ostream& out);
std::string render_table(const AblationTable& table);

// Entry point used by the nnkgc executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nnkgc::cli
