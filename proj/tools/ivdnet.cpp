// ivdnet command-line entry point.
//
//   ivdnet plan           print the connectivity plan of a model config
//   ivdnet generate-data  write a synthetic multi-modal phantom dataset
//   ivdnet train          train on a dataset manifest
//   ivdnet predict        write predicted 3D masks
//   ivdnet evaluate       DSC and localization distance against labels
//   ivdnet report         loss curves, comparison table, overlay images
//
// Every subcommand accepts --config FILE: a JSON object whose keys are the
// subcommand's long flag names without the leading dashes. Flags given on
// the command line take precedence over the file.
//
// Exit status: 0 success, 1 usage error or invalid configuration/input,
// 2 runtime failure (I/O, training divergence, ...).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ivdnet/checkpoint.hpp"
#include "ivdnet/connectivity.hpp"
#include "ivdnet/dataset.hpp"
#include "ivdnet/error.hpp"
#include "ivdnet/evaluation.hpp"
#include "ivdnet/model.hpp"
#include "ivdnet/phantom.hpp"
#include "ivdnet/report.hpp"
#include "ivdnet/slices.hpp"
#include "ivdnet/training.hpp"

namespace fs = std::filesystem;
using namespace ivdnet;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config files -------------------------------------------------------------

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number() || v.is_null()) return v.dump();
  throw ValidationError("config values must be scalars or arrays of scalars, got " + v.dump());
}

void apply_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw ValidationError(path + ": config must be a JSON object");

  for (const auto& [key, value] : doc.items()) {
    CLI::Option* opt = key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (!opt) throw ValidationError(path + ": unknown key '" + key + "' for '" + sub.get_name() + "'");
    if (opt->count() > 0) continue;
    std::vector<std::string> inputs;
    if (value.is_array())
      for (const auto& e : value) inputs.push_back(scalar_text(e));
    else
      inputs.push_back(scalar_text(value));
    if (opt->get_type_size() == 0 && inputs.size() == 1 && inputs[0] == "false") continue;
    try {
      opt->add_result(inputs);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ValidationError(path + ": bad value for '" + key + "': " + e.what());
    }
  }
}

void require(const CLI::App& sub, const std::string& flag, bool present) {
  if (!present) throw UsageError(sub.get_name() + ": " + flag + " is required (flag or config key)");
}

// name=value arguments
std::pair<std::string, std::string> split_named(const std::string& arg, const std::string& flag) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
    throw UsageError(flag + " expects NAME=PATH, got '" + arg + "'");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError(path.string(), "cannot write");
}

std::vector<std::string> pick_subjects(const io::Manifest& manifest, const std::vector<std::string>& wanted) {
  if (wanted.empty()) return manifest.subject_ids();
  for (const auto& id : wanted) manifest.find(id);
  return wanted;
}

fs::path prediction_path(const fs::path& dir, const std::string& id) { return dir / (id + "_pred.nii"); }

// Model flags shared by plan and train ------------------------------------

struct ModelFlags {
  std::string fusion = "hyper_dense";
  std::string block_variant = "standard";
  std::vector<int> growth{32, 64, 128, 256};
  int bridge_channels = 512;
  std::vector<int> dilation_rates{2, 4};
  bool no_permute = false;

  void add_to(CLI::App& sub, bool with_block) {
    sub.add_option("--fusion", fusion, "early | late | hyper_dense")->capture_default_str();
    sub.add_option("--growth", growth, "Channels per encoder level, comma separated")
        ->delimiter(',')
        ->capture_default_str();
    sub.add_flag("--no-permute", no_permute, "Disable per-stream reordering of dense inputs");
    if (!with_block) return;
    sub.add_option("--block-variant", block_variant, "standard | asymmetric")->capture_default_str();
    sub.add_option("--bridge-channels", bridge_channels, "Bridge output channels")->capture_default_str();
    sub.add_option("--dilation-rates", dilation_rates, "Two dilation rates, comma separated")
        ->delimiter(',')
        ->capture_default_str();
  }

  model::ModelConfig config(int streams, int input_size, std::uint64_t seed) const {
    model::ModelConfig c;
    c.num_streams = streams;
    c.input_size = input_size;
    c.growth = growth;
    c.bridge_channels = bridge_channels;
    c.fusion = model::parse_fusion(fusion);
    c.block_variant = model::parse_block_variant(block_variant);
    if (dilation_rates.size() != 2) throw ValidationError("--dilation-rates takes exactly two values");
    c.dilation_rates = {dilation_rates[0], dilation_rates[1]};
    c.permute_streams = !no_permute;
    c.init_seed = seed;
    return c;
  }
};

// plan ---------------------------------------------------------------------

struct PlanCmd {
  int streams = 4;
  ModelFlags model;
  std::string format = "table";
  std::string output;

  void add(CLI::App& sub) {
    sub.add_option("--streams", streams, "Number of modality streams")->capture_default_str();
    model.add_to(sub, false);
    sub.add_option("--format", format, "table | json")->capture_default_str();
    sub.add_option("--output", output, "Also write the plan to this file");
  }

  int run() {
    if (format != "table" && format != "json") throw ValidationError("--format must be table or json");
    if (streams < 1) throw ValidationError("--streams must be >= 1");
    const auto config = model.config(streams, 256, 0);
    const auto plan = config.connectivity();
    const std::string text = format == "json" ? plan::format_json(plan) + "\n" : plan::format_table(plan);
    std::cout << text;
    if (!output.empty()) write_file(output, text);
    return 0;
  }
};

// generate-data ------------------------------------------------------------

struct GenerateCmd {
  std::string output;
  int subjects = 12;
  int discs = 7;
  std::vector<int> shape{36, 256, 256};
  std::uint64_t seed = 0;
  std::vector<std::string> drop_modality;

  void add(CLI::App& sub) {
    sub.add_option("--output", output, "Dataset directory (required)");
    sub.add_option("--subjects", subjects, "Number of subjects")->capture_default_str();
    sub.add_option("--discs", discs, "Discs per subject")->capture_default_str();
    sub.add_option("--shape", shape, "Volume shape depth,height,width")->delimiter(',')->capture_default_str();
    sub.add_option("--seed", seed, "Dataset seed")->capture_default_str();
    sub.add_option("--drop-modality", drop_modality, "Render this modality as zeros (repeatable)");
  }

  int run(const CLI::App& sub) {
    require(sub, "--output", !output.empty());
    if (subjects < 1) throw ValidationError("--subjects must be >= 1");
    if (shape.size() != 3) throw ValidationError("--shape takes depth,height,width");
    auto profiles = data::default_profiles();
    for (const auto& name : drop_modality) {
      auto it = std::find_if(profiles.begin(), profiles.end(), [&](const auto& p) { return p.name == name; });
      if (it == profiles.end()) throw ValidationError("unknown modality '" + name + "'");
      it->enabled = false;
    }

    fs::create_directories(output);
    io::Manifest manifest;
    for (const auto& p : profiles) manifest.modalities.push_back(p.name);
    for (int i = 0; i < subjects; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                        static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      char id[32];
      std::snprintf(id, sizeof id, "subject_%02d", i);
      auto phantom = data::generate_phantom(rng(), discs, {shape[0], shape[1], shape[2]}, profiles);
      manifest.subjects.push_back(io::save_subject(output, data::to_subject(id, std::move(phantom))));
      std::cout << "wrote " << id << "\n";
    }
    io::write_manifest(fs::path(output) / "manifest.json", manifest);
    std::cout << "manifest: " << (fs::path(output) / "manifest.json").string() << "\n";
    return 0;
  }
};

// train --------------------------------------------------------------------

struct TrainCmd {
  std::string data;
  std::string output;
  ModelFlags model;
  train::TrainConfig defaults;
  int epochs = defaults.epochs;
  double lr = defaults.initial_lr;
  int lr_halve_at = -1;
  double beta1 = defaults.adam_beta1;
  double beta2 = defaults.adam_beta2;
  int batch_size = defaults.batch_size;
  std::string loss = "cross_entropy";
  double train_fraction = 13.0 / 16.0;
  std::uint64_t seed = 0;
  std::string resume;

  void add(CLI::App& sub) {
    sub.add_option("--data", data, "Dataset manifest (required)");
    sub.add_option("--output", output, "Run directory for checkpoints and history (required)");
    model.add_to(sub, true);
    sub.add_option("--epochs", epochs)->capture_default_str();
    sub.add_option("--lr", lr, "Initial learning rate")->capture_default_str();
    sub.add_option("--lr-halve-at", lr_halve_at, "Epoch at which the learning rate halves (default: epochs / 2)");
    sub.add_option("--beta1", beta1, "Adam beta1")->capture_default_str();
    sub.add_option("--beta2", beta2, "Adam beta2")->capture_default_str();
    sub.add_option("--batch-size", batch_size)->capture_default_str();
    sub.add_option("--loss", loss, "cross_entropy | dice")->capture_default_str();
    sub.add_option("--train-fraction", train_fraction, "Share of subjects used for training")
        ->capture_default_str();
    sub.add_option("--seed", seed, "Seed for split, initialization and batch order")->capture_default_str();
    sub.add_option("--resume", resume, "Continue from this checkpoint");
  }

  int run(const CLI::App& sub) {
    require(sub, "--data", !data.empty());
    require(sub, "--output", !output.empty());
    train::TrainConfig tc;
    tc.epochs = epochs;
    tc.initial_lr = lr;
    tc.lr_halve_at_epoch = lr_halve_at < 0 ? epochs / 2 : lr_halve_at;
    tc.adam_beta1 = beta1;
    tc.adam_beta2 = beta2;
    tc.batch_size = batch_size;
    tc.loss = train::parse_loss(loss);
    tc.seed = seed;
    tc.checkpoint_dir = output;
    tc.validate();

    const auto manifest = io::read_manifest(data);
    if (manifest.subjects.empty()) throw ValidationError(data + ": manifest lists no subjects");
    const auto split = data::split_dataset(manifest.subject_ids(), train_fraction, seed);

    train::TrainingData td;
    int input_size = 0;
    auto load = [&](const std::string& id) {
      if (!manifest.find(id).label_file) throw ValidationError(id + ": training subjects need a label");
      auto subject = io::load_subject(data, manifest, id);
      const auto shape = subject.label.shape();
      if (shape.height != shape.width)
        throw ValidationError(id + ": slices must be square, got " + to_string(shape));
      if (input_size != 0 && shape.height != input_size)
        throw ValidationError(id + ": slice size differs from the other subjects");
      input_size = shape.height;
      return subject;
    };
    for (const auto& id : split.train)
      for (auto& s : data::to_slices(load(id))) td.train_slices.push_back(std::move(s));
    for (const auto& id : split.val) td.validation.push_back(load(id));

    const auto config = model.config(static_cast<int>(manifest.modalities.size()), input_size, seed);
    config.validate();
    auto net = model::build_model(config);

    fs::create_directories(output);
    json run_doc{{"model", config.to_json()},
                 {"train", tc.to_json()},
                 {"data", fs::absolute(data).string()},
                 {"split", {{"train", split.train}, {"validation", split.val}}}};
    write_file(fs::path(output) / "run.json", run_doc.dump(2) + "\n");

    std::cout << "model " << model::to_string(config.fusion) << "/" << model::to_string(config.block_variant)
              << ", " << model::parameter_count(net) << " parameters; " << td.train_slices.size()
              << " training slices, " << td.validation.size() << " validation subjects\n";
    train::TrainOptions options;
    if (!resume.empty()) options.resume_from = fs::path(resume);
    options.on_epoch = [](const train::EpochRecord& r) {
      std::printf("epoch %4d  lr %.3g  loss %.5f  val_dsc %.4f\n", r.epoch, r.lr, r.train_loss, r.val_dsc);
      std::fflush(stdout);
    };
    const auto history = train::train(net, td, tc, options);
    std::cout << "best epoch " << history.best_epoch << ", validation DSC " << history.best_val_dsc << "\n";
    return 0;
  }
};

// predict ------------------------------------------------------------------

struct PredictCmd {
  std::string checkpoint;
  std::string data;
  std::string output;
  std::vector<std::string> subjects;
  int batch_size = 4;

  void add(CLI::App& sub) {
    sub.add_option("--checkpoint", checkpoint, "Model checkpoint (required)");
    sub.add_option("--data", data, "Dataset manifest (required)");
    sub.add_option("--output", output, "Directory for <subject>_pred.nii files (required)");
    sub.add_option("--subjects", subjects, "Subject ids (default: all)")->delimiter(',');
    sub.add_option("--batch-size", batch_size)->capture_default_str();
  }

  int run(const CLI::App& sub) {
    require(sub, "--checkpoint", !checkpoint.empty());
    require(sub, "--data", !data.empty());
    require(sub, "--output", !output.empty());
    if (batch_size < 1) throw ValidationError("--batch-size must be >= 1");
    const auto manifest = io::read_manifest(data);
    auto net = train::load_model(checkpoint);
    const auto predictor = metrics::model_predictor(net);
    fs::create_directories(output);
    for (const auto& id : pick_subjects(manifest, subjects)) {
      const auto subject = io::load_subject(data, manifest, id);
      const auto mask = metrics::predict_volume(predictor, subject, batch_size);
      io::write_nifti(prediction_path(output, id), mask);
      std::cout << "wrote " << prediction_path(output, id).string() << "\n";
    }
    return 0;
  }
};

// evaluate -----------------------------------------------------------------

struct EvaluateCmd {
  std::string data;
  std::string predictions;
  std::string output;
  std::vector<std::string> subjects;

  void add(CLI::App& sub) {
    sub.add_option("--data", data, "Dataset manifest with reference labels (required)");
    sub.add_option("--predictions", predictions, "Directory holding <subject>_pred.nii (required)");
    sub.add_option("--output", output, "Directory for evaluation.csv and evaluation.json (required)");
    sub.add_option("--subjects", subjects, "Subject ids (default: all)")->delimiter(',');
  }

  int run(const CLI::App& sub) {
    require(sub, "--data", !data.empty());
    require(sub, "--predictions", !predictions.empty());
    require(sub, "--output", !output.empty());
    const auto manifest = io::read_manifest(data);
    std::vector<metrics::EvalReport> reports;
    for (const auto& id : pick_subjects(manifest, subjects)) {
      const auto& entry = manifest.find(id);
      if (!entry.label_file) throw ValidationError(id + ": manifest has no reference label");
      const auto ref = io::read_nifti_label(fs::path(data).parent_path() / *entry.label_file);
      const auto pred = io::read_nifti_label(prediction_path(predictions, id));
      reports.push_back(metrics::evaluate_masks(id, ref, pred));
      const auto& r = reports.back();
      std::printf("%-16s DSC %.4f  distance %.3f  matched %d  misses %d  false positives %d\n", id.c_str(),
                  r.dsc, r.localization.mean_distance, r.matched(), r.localization.misses,
                  r.localization.false_positives);
    }
    fs::create_directories(output);
    report::write_evaluation_csv(fs::path(output) / "evaluation.csv", reports);
    report::write_evaluation_json(fs::path(output) / "evaluation.json", reports);
    const auto a = metrics::aggregate(reports);
    std::cout << "DSC " << metrics::format_mean_std(a.dsc) << "  localization "
              << metrics::format_mean_std(a.distance, 2) << " voxels\n";
    return 0;
  }
};

// report -------------------------------------------------------------------

struct ReportCmd {
  std::string output;
  std::vector<std::string> history;
  std::vector<std::string> evaluation;
  std::vector<std::string> predictions;
  std::string data;
  std::string overlay_subject;
  std::vector<int> overlay_slices;

  void add(CLI::App& sub) {
    sub.add_option("--output", output, "Report directory (required)");
    sub.add_option("--history", history, "NAME=history.csv for the loss curves (repeatable)");
    sub.add_option("--evaluation", evaluation, "NAME=evaluation.json for the comparison table (repeatable)");
    sub.add_option("--predictions", predictions, "NAME=prediction directory for overlays (repeatable)");
    sub.add_option("--data", data, "Dataset manifest, needed for overlays");
    sub.add_option("--overlay-subject", overlay_subject, "Subject shown in overlays (default: first)");
    sub.add_option("--overlay-slices", overlay_slices, "Sagittal slices to render (default: largest disc area)")
        ->delimiter(',');
  }

  int run(const CLI::App& sub) {
    require(sub, "--output", !output.empty());
    if (history.empty() && evaluation.empty() && predictions.empty())
      throw UsageError("report: give at least one --history, --evaluation or --predictions");
    fs::create_directories(output);

    if (!history.empty()) {
      std::vector<report::CurveSeries> series;
      for (const auto& arg : history) {
        auto [name, path] = split_named(arg, "--history");
        const auto h = train::TrainingHistory::read_csv(path);
        report::CurveSeries s{name, {}, {}, {}};
        for (const auto& e : h.epochs) {
          s.epochs.push_back(e.epoch);
          s.train_loss.push_back(e.train_loss);
          s.val_dsc.push_back(e.val_dsc);
        }
        series.push_back(std::move(s));
      }
      write_file(fs::path(output) / "loss_curves.svg", report::loss_curves_svg(series));
      std::cout << "wrote " << (fs::path(output) / "loss_curves.svg").string() << "\n";
    }

    if (!evaluation.empty()) {
      std::vector<report::ComparisonRow> rows;
      for (const auto& arg : evaluation) {
        auto [name, path] = split_named(arg, "--evaluation");
        rows.push_back({name, metrics::aggregate(report::read_evaluation_json(path))});
      }
      const auto md = report::comparison_markdown(rows);
      write_file(fs::path(output) / "comparison.md", md);
      write_file(fs::path(output) / "comparison.csv", report::comparison_csv(rows));
      std::cout << md;
    }

    if (!predictions.empty()) render_overlays(sub);
    return 0;
  }

  void render_overlays(const CLI::App& sub) {
    require(sub, "--data (for overlays)", !data.empty());
    const auto manifest = io::read_manifest(data);
    const std::string id = overlay_subject.empty() ? manifest.subject_ids().at(0) : overlay_subject;
    if (!manifest.find(id).label_file) throw ValidationError(id + ": overlays need a reference label");
    const auto subject = io::load_subject(data, manifest, id);
    const auto shape = subject.label.shape();

    std::vector<int> slices = overlay_slices;
    if (slices.empty()) {
      std::size_t best = 0;
      int best_z = 0;
      for (int z = 0; z < shape.depth; ++z) {
        auto s = subject.label.slice(z);
        const auto area = static_cast<std::size_t>(std::count(s.begin(), s.end(), std::uint8_t{1}));
        if (area > best) best = area, best_z = z;
      }
      slices.push_back(best_z);
    }
    for (int z : slices)
      if (z < 0 || z >= shape.depth) throw ValidationError("overlay slice " + std::to_string(z) + " out of range");

    const fs::path dir = fs::path(output) / "overlays";
    fs::create_directories(dir);
    for (const auto& arg : predictions) {
      auto [name, pred_dir] = split_named(arg, "--predictions");
      const auto pred = io::read_nifti_label(prediction_path(pred_dir, id));
      if (pred.shape() != shape) throw ValidationError(name + ": prediction shape differs from " + id);
      for (int z : slices) {
        std::vector<report::RgbImage> panels;
        for (const auto& m : subject.modalities)
          panels.push_back(report::render_overlay(m.voxels.slice(z), subject.label.slice(z), pred.slice(z),
                                                  shape.height, shape.width));
        const fs::path file = dir / (name + "_" + id + "_z" + std::to_string(z) + ".png");
        report::write_png(file, report::tile_horizontal(panels));
        std::cout << "wrote " << file.string() << "\n";
      }
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal intervertebral disc segmentation with hyper-dense connectivity"};
  app.require_subcommand(1);
  app.fallthrough(false);

  PlanCmd plan_cmd;
  GenerateCmd generate_cmd;
  TrainCmd train_cmd;
  PredictCmd predict_cmd;
  EvaluateCmd evaluate_cmd;
  ReportCmd report_cmd;

  std::map<CLI::App*, std::string> configs;
  auto add = [&](const std::string& name, const std::string& help, auto& cmd) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", configs[sub], "JSON file whose keys are this command's flag names");
    cmd.add(*sub);
    return sub;
  };
  auto* plan_sub = add("plan", "Print the layer-by-layer connectivity plan", plan_cmd);
  auto* gen_sub = add("generate-data", "Write a synthetic phantom dataset with a JSON manifest", generate_cmd);
  auto* train_sub = add("train", "Train a model on a dataset manifest", train_cmd);
  auto* predict_sub = add("predict", "Write predicted 3D masks for dataset subjects", predict_cmd);
  auto* eval_sub = add("evaluate", "Score predicted masks against reference labels", evaluate_cmd);
  auto* report_sub = add("report", "Render loss curves, a comparison table and overlay images", report_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    for (auto& [sub, path] : configs)
      if (sub->parsed() && !path.empty()) apply_config(*sub, path);
    if (plan_sub->parsed()) return plan_cmd.run();
    if (gen_sub->parsed()) return generate_cmd.run(*gen_sub);
    if (train_sub->parsed()) return train_cmd.run(*train_sub);
    if (predict_sub->parsed()) return predict_cmd.run(*predict_sub);
    if (eval_sub->parsed()) return evaluate_cmd.run(*eval_sub);
    if (report_sub->parsed()) return report_cmd.run(*report_sub);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
