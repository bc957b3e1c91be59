// Copyright 2026 The MSF-CNN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "msf/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "msf/audit.hpp"
#include "msf/config.hpp"
#include "msf/data.hpp"
#include "msf/errors.hpp"
#include "msf/graph.hpp"
#include "msf/metrics.hpp"
#include "msf/model.hpp"
#include "msf/training.hpp"

namespace fs = std::filesystem;

namespace msf {

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

struct SynthOptions {
  std::string kind;
  std::size_t n = 10;
  std::size_t size = 32;
  SbmSpec sbm;
};

struct TrainOptions {
  std::string data;
  std::string log;
};

struct EvalOptions {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
};

struct GradcheckOptions {
  std::string scope = "all";
  std::size_t seeds = 5;
  std::string inject_fault;
};

struct Dataset {
  std::vector<FeatureMap> images;
  std::vector<int> labels;
  std::vector<std::string> class_names;
};

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream f(path, mode);
  if (!f) throw LoadError("cannot open '" + path.string() + "' for writing");
  return f;
}

RunConfig resolve_config(const GlobalOptions& g, const std::string& fallback = "") {
  RunConfig config;
  if (!g.config.empty()) {
    config = load_run_config(g.config);
  } else if (!fallback.empty()) {
    config = load_run_config(fallback);
  }
  if (g.seed) config.set_seed(*g.seed);
  return config;
}

Dataset load_dataset(const fs::path& root, const RunConfig& config) {
  const DatasetManifest manifest = load_isic_layout(root);
  Dataset d;
  for (const auto& record : load_images(manifest, config.preprocess)) {
    d.images.push_back(to_feature_map(record));
    d.labels.push_back(record.label);
  }
  d.class_names = manifest.class_names;
  std::size_t classes = d.class_names.size();
  if (classes == 0) {
    for (int label : d.labels) classes = std::max(classes, static_cast<std::size_t>(label) + 1);
    for (std::size_t k = 0; k < classes; ++k) d.class_names.push_back(std::to_string(k));
  }
  if (classes != config.model.classes) {
    throw ConfigError("config key 'classes' is " + std::to_string(config.model.classes) +
                          " but the dataset has " + std::to_string(classes) + " classes",
                      "classes");
  }
  for (const auto& img : d.images) {
    if (img.channels != config.model.in_channels) {
      throw ConfigError("config key 'in_channels' is " + std::to_string(config.model.in_channels) +
                            " but images have " + std::to_string(img.channels) + " channels",
                        "in_channels");
    }
  }
  return d;
}

void cmd_synth(const GlobalOptions& g, const SynthOptions& s, std::ostream& out) {
  if (g.out.empty()) throw ConfigError("synth needs --out", "out");
  const std::uint64_t seed = g.seed.value_or(0);
  const fs::path root = g.out;
  nlohmann::json summary;
  if (s.kind == "textures") {
    fs::create_directories(root / "images");
    const auto records = synth_texture_dataset(s.n, s.size, seed);
    auto labels = open_out(root / "labels.csv");
    labels << "id,label\n";
    for (const auto& r : records) {
      write_img8(root / "images" / (r.id + ".img8"), r);
      labels << r.id << "," << r.label << "\n";
    }
    open_out(root / "classes.txt") << "coarse\nfine\n";
    summary = {{"kind", "textures"},
               {"images", records.size()},
               {"classes", {"coarse", "fine"}},
               {"size", s.size},
               {"seed", seed},
               {"out", root.string()}};
  } else {
    SbmSpec spec = s.sbm;
    spec.seed = seed;
    const SbmDataset d = synth_sbm_graph(spec);
    fs::create_directories(root);
    auto edges = open_out(root / "graph.edges");
    write_edge_list(edges, d.graph);
    auto features = open_out(root / "features.csv");
    write_csv_matrix(features, *d.graph.features());
    auto labels = open_out(root / "labels.csv");
    labels << "node,label\n";
    for (std::size_t v = 0; v < d.labels.size(); ++v) labels << v << "," << d.labels[v] << "\n";
    summary = {{"kind", "sbm"},
               {"nodes", d.graph.node_count()},
               {"edges", d.graph.edges().size()},
               {"blocks", spec.blocks},
               {"seed", seed},
               {"out", root.string()}};
  }
  out << summary.dump() << "\n";
}

void cmd_train(const GlobalOptions& g, const TrainOptions& t, std::ostream& out, std::ostream& err) {
  if (g.out.empty()) throw ConfigError("train needs --out for the checkpoint", "out");
  const RunConfig config = resolve_config(g);
  const Dataset data = load_dataset(t.data, config);
  const fs::path checkpoint = g.out;
  const fs::path log_path = t.log.empty() ? fs::path(checkpoint.string() + ".jsonl") : fs::path(t.log);
  if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());

  auto make_task = [&]() -> std::unique_ptr<TrainingTask> {
    return std::make_unique<ImageClassificationTask>(build_model(config.model, config.seed()),
                                                     &data.images, data.labels);
  };
  auto log = open_out(log_path);
  const ProtocolResult result = run_protocol(
      make_task, data.labels, config.train, config.split,
      [&](const EpochLog& e) { log << to_jsonl(e) << "\n"; });
  for (int cls : result.split.unstratified_classes) {
    err << "warning: class " << cls << " has a single sample and was split unstratified\n";
  }
  log << nlohmann::json{{"cv_fold_acc", result.fold_accuracy},
                        {"cv_mean", result.cv_mean},
                        {"cv_std", result.cv_std}}
             .dump()
      << "\n";
  if (!log) throw LoadError("write failed for '" + log_path.string() + "'");

  const auto& task = static_cast<const ImageClassificationTask&>(*result.final_task);
  write_checkpoint(checkpoint.string(), task.model().parameters());
  open_out(checkpoint.string() + ".cfg") << to_config_text(config);

  out << nlohmann::json{{"checkpoint", checkpoint.string()},
                        {"log", log_path.string()},
                        {"epochs", result.logs.size()},
                        {"final_loss", result.logs.back().mean_loss},
                        {"final_train_accuracy", result.logs.back().train_accuracy},
                        {"cv_mean", result.cv_mean},
                        {"cv_std", result.cv_std},
                        {"train_size", result.split.train.size()},
                        {"test_size", result.split.test.size()}}
             .dump()
      << "\n";
}

void cmd_eval(const GlobalOptions& g, const EvalOptions& e, std::ostream& out) {
  const RunConfig config = resolve_config(g, e.checkpoint + ".cfg");
  MsfCnnModel model = build_model(config.model, config.seed());
  model.load_parameters(read_checkpoint(e.checkpoint));
  const Dataset data = load_dataset(e.data, config);

  std::vector<std::size_t> items;
  if (e.split == "all") {
    for (std::size_t i = 0; i < data.labels.size(); ++i) items.push_back(i);
  } else {
    const Split part = split(data.labels, config.split);
    items = e.split == "train" ? part.train : part.test;
  }
  ImageClassificationTask task(std::move(model), &data.images, data.labels);
  const Matrix probs = predict_batched(task, items, config.train.batch_size);
  std::vector<int> labels;
  for (auto i : items) labels.push_back(data.labels[i]);
  out << to_json(evaluate(probs, labels, data.class_names)) << "\n";
}

int cmd_gradcheck(const GlobalOptions& g, const GradcheckOptions& c, std::ostream& out,
                  std::ostream& err) {
  AuditOptions options;
  options.scope = c.scope;
  options.seeds = c.seeds;
  options.first_seed = g.seed.value_or(0);
  options.inject_fault = c.inject_fault;
  const auto entries = run_gradient_audit(options);
  out << audit_to_json(entries) << "\n";
  int failed = 0;
  for (const auto& entry : entries) {
    if (entry.pass()) continue;
    ++failed;
    err << "gradcheck: " << entry.name << " seed " << entry.seed << " max relative error "
        << entry.max_rel_error << " > " << entry.threshold << " at " << entry.worst << "\n";
  }
  return failed == 0 ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"MSF-CNN: multi-scale fusion CNN with a patient-similarity GNN", "msf"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config, "Run config (key = value lines)");
  app.add_option("--seed", g.seed, "Seed overriding every config seed");
  app.add_option("--out", g.out, "Output path");

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic dataset");
  synth_cmd->fallthrough();
  synth_cmd->add_option("kind", synth.kind, "textures or sbm")
      ->required()
      ->check(CLI::IsMember({"textures", "sbm"}));
  synth_cmd->add_option("--n", synth.n, "Images per class (textures)");
  synth_cmd->add_option("--size", synth.size, "Image side in pixels (textures)");
  synth_cmd->add_option("--blocks", synth.sbm.blocks, "Blocks (sbm)");
  synth_cmd->add_option("--nodes", synth.sbm.nodes_per_block, "Nodes per block (sbm)");
  synth_cmd->add_option("--p-in", synth.sbm.p_in, "Within-block edge probability (sbm)");
  synth_cmd->add_option("--p-out", synth.sbm.p_out, "Between-block edge probability (sbm)");
  synth_cmd->add_option("--feature-dim", synth.sbm.feature_dim, "Node feature width (sbm)");
  synth_cmd->add_option("--feature-shift", synth.sbm.feature_shift, "Class signal (sbm)");

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Split, cross-validate, fit, write a checkpoint");
  train_cmd->fallthrough();
  train_cmd->add_option("--data", train.data, "Dataset root (labels.csv + images/)")->required();
  train_cmd->add_option("--log", train.log, "JSONL log path (default <out>.jsonl)");

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Print a metrics report for a checkpoint");
  eval_cmd->fallthrough();
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint from train")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset root")->required();
  eval_cmd->add_option("--split", eval.split, "test, train or all")
      ->check(CLI::IsMember({"test", "train", "all"}));

  GradcheckOptions grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  grad_cmd->fallthrough();
  grad_cmd->add_option("--scope", grad.scope, "all or one check name");
  grad_cmd->add_option("--seeds", grad.seeds, "Seeds per check");
  grad_cmd->add_option("--inject-fault", grad.inject_fault)->group("");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) {
      cmd_synth(g, synth, out);
    } else if (*train_cmd) {
      cmd_train(g, train, out, err);
    } else if (*eval_cmd) {
      cmd_eval(g, eval, out);
    } else {
      return cmd_gradcheck(g, grad, out, err);
    }
  } catch (const NumericError& e) {
    err << "error: training diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitOk;
}

}  // namespace msf
