#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nnkgc/autodiff/adamw.hpp"
#include "nnkgc/autodiff/tensor.hpp"
#include "nnkgc/text/tokenizer.hpp"
#include "nnkgc/train/config.hpp"

namespace nnkgc::train {

inline constexpr const char* kCheckpointMagic = "nnkgc-checkpoint";
inline constexpr int kCheckpointVersion = 1;

// Raised when a checkpoint was written by an incompatible format version.
class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckpointData {
  RunConfig config;
  text::Tokenizer tokenizer;
  std::map<std::string, ad::Tensor> tensors;
};

// Text container: magic and version line, [config], [vocab], [tensors].
// Values are written as hexadecimal floats so a reload is bit-exact and two
// identical models serialize to identical bytes.
void write_checkpoint(std::ostream& out, const RunConfig& config, const text::Tokenizer& tokenizer,
                      const std::vector<ad::Parameter>& params);
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const text::Tokenizer& tokenizer, const std::vector<ad::Parameter>& params);

CheckpointData read_checkpoint(std::istream& in, const std::string& origin = "checkpoint");
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace nnkgc::train
