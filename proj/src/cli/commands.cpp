#include "nnkgc/cli/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>

#include "nnkgc/cli/explain.hpp"
#include "nnkgc/errors.hpp"
#include "nnkgc/text/tokenizer.hpp"
#include "nnkgc/train/checkpoint.hpp"
#include "nnkgc/train/synthetic.hpp"

namespace nnkgc::cli {

namespace {

using json = nlohmann::json;

json metrics_json(const train::RankingMetrics& m) {
  return json{{"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10},
              {"queries", m.queries}};
}

std::string fixed(double x, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void print_metrics(std::ostream& out, const train::RankingMetrics& m, const std::string& prefix = "") {
  out << prefix << "mrr=" << fixed(m.mrr, 6) << '\n'
      << prefix << "hits1=" << fixed(m.hits1, 6) << '\n'
      << prefix << "hits3=" << fixed(m.hits3, 6) << '\n'
      << prefix << "hits10=" << fixed(m.hits10, 6) << '\n'
      << prefix << "queries=" << m.queries << '\n';
}

std::ofstream open_out(const std::filesystem::path& path, bool append = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::unique_ptr<train::Model> restore_model(const train::CheckpointData& data, const kg::KnowledgeGraph& kg) {
  auto model = std::make_unique<train::Model>(data.config, data.tokenizer, kg);
  model->load_state(data.tensors);
  return model;
}

kg::DatasetPaths paths_for(const train::RunConfig& config, const std::optional<std::string>& dataset) {
  train::RunConfig c = config;
  if (dataset) c.dataset = *dataset;
  return c.dataset_paths();
}

std::string axis_name(AblationAxis a) { return a == AblationAxis::encoder ? "encoder" : "hops"; }

}  // namespace

kg::KnowledgeGraph load_graph(const kg::DatasetPaths& paths) {
  return kg::add_inverse_relations(kg::load_dataset(paths));
}

PreprocessResult cmd_preprocess(const PreprocessOptions& o, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  kg::DatasetPaths paths = kg::DatasetPaths::in_directory(o.dataset_dir, o.entity_file);
  paths.entity_description = o.descriptions;
  const kg::KnowledgeGraph kg = load_graph(paths);
  const text::Tokenizer tokenizer = text::build_vocab(kg, o.min_frequency);

  PreprocessResult result;
  auto& m = result.manifest;
  m.entities = kg.entity_count();
  m.relations = kg.base_relation_count();
  m.train = kg.triples(kg::Split::train).size();
  m.valid = kg.triples(kg::Split::valid).size();
  m.test = kg.triples(kg::Split::test).size();
  m.vocab = tokenizer.vocab_size();
  if (o.expected_manifest) {
    const kg::Manifest expected = kg::Manifest::read(*o.expected_manifest);
    result.mismatches = kg.check_manifest(expected, tokenizer.vocab_size());
  }

  std::filesystem::create_directories(o.out_dir);
  m.write(o.out_dir / "manifest.txt");
  tokenizer.save(o.out_dir / "vocab.txt");
  {
    auto f = open_out(o.out_dir / "entities.tsv");
    for (kg::EntityId e = 0; e < kg.entity_count(); ++e)
      f << e << '\t' << kg.entity(e).key << '\t' << kg.entity(e).name << '\n';
  }
  {
    auto f = open_out(o.out_dir / "relations.tsv");
    for (kg::RelationId r = 0; r < kg.relation_count(); ++r)
      f << r << '\t' << kg.relation_key(r) << '\t' << kg.relation_phrase(r) << '\n';
  }
  std::size_t empty_text = 0;
  for (const auto& e : kg.entities()) empty_text += e.name.empty() && e.description.empty();
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (const auto& [k, v] : m.fields()) out << k << '=' << v << '\n';
  out << "relations_with_inverse=" << kg.relation_count() << '\n';
  out << "unseen_entities=" << kg.unseen_entities().size() << '\n';
  out << "entities_without_text=" << empty_text << '\n';
  out << "seconds=" << fixed(result.seconds, 3) << '\n';

  json report{{"command", "preprocess"},
              {"dataset", o.dataset_dir.string()},
              {"counts", m.fields()},
              {"relations_with_inverse", kg.relation_count()},
              {"unseen_entities", kg.unseen_entities().size()},
              {"entities_without_text", empty_text},
              {"seconds", result.seconds},
              {"mismatches", json::array()}};
  for (const auto& d : result.mismatches)
    report["mismatches"].push_back({{"field", d.field}, {"expected", d.expected}, {"actual", d.actual}});
  open_out(o.out_dir / "preprocess.json") << report.dump() << '\n';

  if (!result.mismatches.empty()) {
    std::string msg = "manifest mismatch:";
    for (const auto& d : result.mismatches)
      msg += "\n  " + d.field + ": expected " + std::to_string(d.expected) + ", found " +
             std::to_string(d.actual);
    throw ValidationFailed(msg);
  }
  return result;
}

train::TrainOutcome cmd_train(const train::RunConfig& config, std::ostream& out) {
  config.validate();
  const kg::KnowledgeGraph kg = load_graph(config.dataset_paths());
  train::Trainer trainer(config, kg, text::build_vocab(kg, config.min_frequency));
  const auto dir = config.resolved_output_dir();
  auto outcome = trainer.run(dir, [&](const train::EpochStats& s) {
    out << train::format_epoch_line(s) << '\n';
    out.flush();
  });
  out << "checkpoint=" << (dir / "checkpoint.txt").string() << '\n';
  return outcome;
}

EvalCommandResult cmd_eval(const std::filesystem::path& checkpoint, kg::Split split,
                           std::optional<std::filesystem::path> report, bool verbose, std::ostream& out,
                           std::optional<std::string> dataset_override) {
  const train::CheckpointData data = train::load_checkpoint(checkpoint);
  const kg::KnowledgeGraph kg = load_graph(paths_for(data.config, dataset_override));
  const auto model = restore_model(data, kg);

  train::EvalOptions opts;
  opts.neighborhood_seed = train::eval_neighborhood_seed(data.config);
  EvalCommandResult result;
  result.report = train::evaluate(*model, kg, split, opts);
  result.report_path = report.value_or(checkpoint.parent_path() /
                                       ("eval_" + std::string(kg::split_name(split)) + ".jsonl"));

  out << "split=" << kg::split_name(split) << '\n';
  print_metrics(out, result.report.all);
  if (verbose) {
    print_metrics(out, result.report.forward, "forward_");
    print_metrics(out, result.report.inverse, "inverse_");
  }
  auto f = open_out(result.report_path);
  const std::pair<const char*, const train::RankingMetrics*> rows[] = {
      {"all", &result.report.all}, {"forward", &result.report.forward}, {"inverse", &result.report.inverse}};
  for (const auto& [direction, m] : rows) {
    json line = metrics_json(*m);
    line["split"] = kg::split_name(split);
    line["direction"] = direction;
    line["checkpoint"] = checkpoint.string();
    f << line.dump() << '\n';
  }
  return result;
}

AblationAxis parse_axis(std::string_view name) {
  if (name == "encoder") return AblationAxis::encoder;
  if (name == "hops") return AblationAxis::hops;
  throw ConfigError("unknown ablation axis '" + std::string(name) + "' (expected encoder or hops)");
}

std::string render_table(const AblationTable& t) {
  std::string s;
  auto cell = [](const std::string& v, std::size_t w) { return v + std::string(w > v.size() ? w - v.size() : 1, ' '); };
  s += cell(t.axis == AblationAxis::encoder ? "Encoder" : "Hops", 12);
  for (const char* h : {"MRR", "H@1", "H@3", "H@10", "Avg."}) s += cell(h, 8);
  s += '\n';
  for (const auto& r : t.rows) {
    s += cell(r.label, 12);
    if (r.failed) {
      s += "failed: " + r.error + '\n';
      continue;
    }
    for (double v : {r.metrics.mrr, r.metrics.hits1, r.metrics.hits3, r.metrics.hits10, r.metrics.average()})
      s += cell(fixed(100.0 * v, 2), 8);
    s += '\n';
  }
  return s;
}

AblationTable cmd_ablate(const train::RunConfig& base, AblationAxis axis, std::ostream& out) {
  base.validate();
  const kg::KnowledgeGraph kg = load_graph(base.dataset_paths());
  const auto root = base.resolved_output_dir() / ("ablate_" + axis_name(axis));

  std::vector<std::pair<std::string, train::RunConfig>> runs;
  if (axis == AblationAxis::encoder) {
    for (auto [label, v] : {std::pair{"GCN", graph::Variant::gcn}, std::pair{"GraphSAGE", graph::Variant::sage},
                            std::pair{"GAT", graph::Variant::gat}}) {
      train::RunConfig c = base;
      c.encoder = v;
      runs.emplace_back(label, c);
    }
  } else {
    for (int k = 1; k <= 3; ++k) {
      train::RunConfig c = base;
      c.hops = k;
      runs.emplace_back(std::to_string(k) + "-hop", c);
    }
  }

  AblationTable table{axis, {}};
  for (auto& [label, c] : runs) {
    AblationRow row;
    row.label = label;
    c.output_dir = (root / label).string();
    try {
      c.validate();
      train::Trainer trainer(c, kg, text::build_vocab(kg, c.min_frequency));
      trainer.run(root / label);
      train::EvalOptions opts;
      opts.neighborhood_seed = train::eval_neighborhood_seed(c);
      row.metrics = train::evaluate(trainer.model(), kg, kg::Split::test, opts).all;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    out << "run " << label << (row.failed ? " failed: " + row.error : " done") << '\n';
    table.rows.push_back(std::move(row));
  }

  const std::string rendered = render_table(table);
  out << rendered;
  open_out(root / ("ablation_" + axis_name(axis) + ".txt")) << rendered;
  auto f = open_out(root / ("ablation_" + axis_name(axis) + ".jsonl"));
  for (const auto& r : table.rows) {
    json line{{"axis", axis_name(axis)}, {"label", r.label}, {"failed", r.failed}};
    if (r.failed) {
      line["error"] = r.error;
    } else {
      line["metrics"] = metrics_json(r.metrics);
      line["average"] = r.metrics.average();
    }
    f << line.dump() << '\n';
  }
  return table;
}

namespace {

struct ConfigOptions {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_options(CLI::App* sub, ConfigOptions& co) {
  sub->add_option("--config", co.config_file, "key = value config file");
  for (const auto& key : train::RunConfig::keys())
    co.options[key] = sub->add_option("--" + key, co.values[key], "override config key " + key);
  sub->allow_extras();
}

train::RunConfig resolve_config(CLI::App* sub, const ConfigOptions& co) {
  for (const auto& extra : sub->remaining()) {
    if (extra.rfind("--", 0) == 0) throw ConfigError(train::unknown_key_message(extra.substr(2)));
    throw ConfigError("unexpected argument '" + extra + "'");
  }
  train::RunConfig config;
  if (!co.config_file.empty()) config = train::read_config_file(co.config_file);
  for (const auto& key : train::RunConfig::keys())
    if (co.options.at(key)->count() > 0) config.set(key, co.values.at(key));
  return config;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"nnkgc: knowledge graph completion with entity neighborhoods"};
  app.require_subcommand(1);

  PreprocessOptions pre;
  std::string pre_expected, pre_descriptions;
  auto* preprocess = app.add_subcommand("preprocess", "validate a dataset and write vocab, id maps and manifest");
  preprocess->add_option("--dataset", pre.dataset_dir, "directory with train/valid/test and entity text")->required();
  preprocess->add_option("--out", pre.out_dir, "output directory")->required();
  preprocess->add_option("--entity-file", pre.entity_file, "entity text file name inside the dataset directory");
  preprocess->add_option("--descriptions", pre_descriptions, "optional id TAB description file");
  preprocess->add_option("--expect", pre_expected, "expected manifest to validate against");
  preprocess->add_option("--min-frequency", pre.min_frequency, "minimum word count for the vocabulary");

  ConfigOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_config_options(train_cmd, train_opts);

  std::string eval_checkpoint, eval_split = "test", eval_report, eval_dataset;
  bool eval_verbose = false;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with filtered ranking");
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "valid or test");
  eval_cmd->add_option("--report", eval_report, "JSON lines report path");
  eval_cmd->add_option("--dataset", eval_dataset, "dataset directory overriding the checkpoint's");
  eval_cmd->add_flag("--verbose", eval_verbose, "also report forward and inverse queries separately");

  ConfigOptions ablate_opts;
  std::string ablate_axis;
  auto* ablate_cmd = app.add_subcommand("ablate", "train once per encoder or hop count and tabulate");
  ablate_cmd->add_option("--axis", ablate_axis, "encoder or hops")->required();
  add_config_options(ablate_cmd, ablate_opts);

  std::string ex_checkpoint, ex_head, ex_relation, ex_tail, ex_dataset, ex_json;
  std::size_t ex_top = 3;
  auto* explain_cmd = app.add_subcommand("explain", "show predictions and the neighbors behind them");
  explain_cmd->add_option("--checkpoint", ex_checkpoint, "checkpoint file")->required();
  explain_cmd->add_option("--head", ex_head, "head entity key, name or id")->required();
  explain_cmd->add_option("--relation", ex_relation, "relation key, phrase or id")->required();
  explain_cmd->add_option("--tail", ex_tail, "gold tail (defaults to a known true tail)");
  explain_cmd->add_option("--top-n", ex_top, "number of predicted tails");
  explain_cmd->add_option("--dataset", ex_dataset, "dataset directory overriding the checkpoint's");
  explain_cmd->add_option("--json", ex_json, "also write the report as one JSON line to this file");

  std::string synth_out;
  train::SyntheticOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "write the typed synthetic dataset");
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--seed", synth.seed, "generator seed");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }

    if (preprocess->parsed()) {
      if (!pre_expected.empty()) pre.expected_manifest = pre_expected;
      pre.descriptions = pre_descriptions;
      cmd_preprocess(pre, out);
    } else if (train_cmd->parsed()) {
      cmd_train(resolve_config(train_cmd, train_opts), out);
    } else if (eval_cmd->parsed()) {
      std::optional<std::filesystem::path> report;
      if (!eval_report.empty()) report = eval_report;
      std::optional<std::string> dataset;
      if (!eval_dataset.empty()) dataset = eval_dataset;
      const kg::Split split = kg::parse_split(eval_split);
      if (split == kg::Split::train) throw ConfigError("eval split must be valid or test");
      cmd_eval(eval_checkpoint, split, report, eval_verbose, out, dataset);
    } else if (ablate_cmd->parsed()) {
      const AblationAxis axis = parse_axis(ablate_axis);
      const AblationTable table = cmd_ablate(resolve_config(ablate_cmd, ablate_opts), axis, out);
      for (const auto& r : table.rows)
        if (r.failed) return kExitRuntime;
    } else if (explain_cmd->parsed()) {
      const train::CheckpointData data = train::load_checkpoint(ex_checkpoint);
      std::optional<std::string> dataset;
      if (!ex_dataset.empty()) dataset = ex_dataset;
      const kg::KnowledgeGraph kg = load_graph(paths_for(data.config, dataset));
      const auto model = restore_model(data, kg);
      const kg::EntityId head = resolve_entity(kg, ex_head);
      const kg::RelationId relation = resolve_relation(kg, ex_relation);
      std::optional<kg::EntityId> gold;
      if (!ex_tail.empty()) gold = resolve_entity(kg, ex_tail);
      const ExplanationReport report = explain(*model, kg, head, relation, ex_top, gold);
      render_text(report, out);
      if (!ex_json.empty()) open_out(ex_json, true) << to_json(report).dump() << '\n';
    } else if (synth_cmd->parsed()) {
      const auto data = train::generate_synthetic(synth);
      train::write_synthetic(data, synth_out);
      out << "entities=" << data.entities.size() << "\nrelations=" << data.relations.size()
          << "\ntrain=" << data.train.size() << "\nvalid=" << data.valid.size()
          << "\ntest=" << data.test.size() << '\n';
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ValidationFailed& e) {
    err << "validation failed: " << e.what() << '\n';
    return kExitValidation;
  } catch (const DatasetError& e) {
    err << "dataset error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const LookupError& e) {
    err << "lookup error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const train::CheckpointVersionError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace nnkgc::cli
