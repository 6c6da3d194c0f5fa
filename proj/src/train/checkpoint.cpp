#include "nnkgc/train/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nnkgc/errors.hpp"

namespace nnkgc::train {

namespace {

void write_hex(std::ostream& out, double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::hex);
  out.write(buf, p - buf);
}

double read_hex(std::string_view token, const std::string& origin) {
  double x = 0.0;
  bool negative = !token.empty() && token.front() == '-';
  std::string_view body = negative ? token.substr(1) : token;
  auto [p, ec] = std::from_chars(body.data(), body.data() + body.size(), x, std::chars_format::hex);
  if (ec != std::errc() || p != body.data() + body.size())
    throw DatasetError(origin + ": malformed tensor value '" + std::string(token) + "'");
  return negative ? -x : x;
}

std::string next_line(std::istream& in, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DatasetError(origin + ": truncated checkpoint");
  return line;
}

}  // namespace

void write_checkpoint(std::ostream& out, const RunConfig& config, const text::Tokenizer& tokenizer,
                      const std::vector<ad::Parameter>& params) {
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << "[config]\n" << config_text(config);
  std::ostringstream vocab;
  tokenizer.write(vocab);
  const std::string v = vocab.str();
  out << "[vocab] " << tokenizer.vocab_size() << '\n' << v;
  out << "[tensors] " << params.size() << '\n';
  for (const auto& p : params) {
    out << p.name << ' ' << p.tensor.rows() << ' ' << p.tensor.cols() << '\n';
    bool first = true;
    for (double x : p.tensor.values()) {
      if (!first) out << ' ';
      first = false;
      write_hex(out, x);
    }
    out << '\n';
  }
  out << "[end]\n";
}

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     const text::Tokenizer& tokenizer, const std::vector<ad::Parameter>& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    write_checkpoint(out, config, tokenizer, params);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(std::istream& in, const std::string& origin) {
  std::string header = next_line(in, origin);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  if (!(hs >> magic >> version) || magic != kCheckpointMagic)
    throw DatasetError(origin + ": not an nnkgc checkpoint");
  if (version != kCheckpointVersion)
    throw CheckpointVersionError(origin + ": checkpoint format version " + std::to_string(version) +
                                 ", this build reads version " + std::to_string(kCheckpointVersion));

  if (next_line(in, origin) != "[config]") throw DatasetError(origin + ": missing [config] section");
  CheckpointData data;
  std::string config_body;
  std::string line;
  for (;;) {
    line = next_line(in, origin);
    if (line.rfind("[vocab]", 0) == 0) break;
    config_body += line + "\n";
  }
  apply_config_text(data.config, config_body, origin);

  const std::size_t vocab_size = std::stoul(line.substr(7));
  std::string vocab_body;
  for (std::size_t i = 0; i < vocab_size; ++i) vocab_body += next_line(in, origin) + "\n";
  std::istringstream vs(vocab_body);
  data.tokenizer = text::Tokenizer::read(vs);

  line = next_line(in, origin);
  if (line.rfind("[tensors]", 0) != 0) throw DatasetError(origin + ": missing [tensors] section");
  const std::size_t count = std::stoul(line.substr(9));
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream meta(next_line(in, origin));
    std::string name;
    std::size_t rows = 0, cols = 0;
    if (!(meta >> name >> rows >> cols)) throw DatasetError(origin + ": malformed tensor header");
    const std::string values = next_line(in, origin);
    std::vector<double> v;
    v.reserve(rows * cols);
    std::size_t pos = 0;
    while (pos < values.size()) {
      auto end = values.find(' ', pos);
      if (end == std::string::npos) end = values.size();
      v.push_back(read_hex(std::string_view(values).substr(pos, end - pos), origin));
      pos = end + 1;
    }
    if (v.size() != rows * cols)
      throw DatasetError(origin + ": tensor " + name + " has " + std::to_string(v.size()) +
                         " values, expected " + std::to_string(rows * cols));
    data.tensors.emplace(name, ad::Tensor(rows, cols, std::move(v)));
  }
  if (next_line(in, origin) != "[end]") throw DatasetError(origin + ": missing [end] marker");
  return data;
}

CheckpointData load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in, path.string());
}

}  // namespace nnkgc::train
