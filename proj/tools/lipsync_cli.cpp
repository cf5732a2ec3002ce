// lipsync command line: synthetic corpus, dataset building, training, rendering
// and verification.
//
// Every flag can also come from a JSON object passed with --config; keys are
// the long flag names ("pairs-per-sec" or "pairs_per_sec"). Flags on the
// command line win. Errors are reported as {"error": ..., "message": ...} on
// stderr with a nonzero exit code.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lipsync.hpp"

namespace {

using namespace lipsync;
using nlohmann::json;

void print_error(std::string_view code, std::string_view message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << std::endl;
}

std::string flag_key(std::string key) {
  for (auto& c : key)
    if (c == '_') c = '-';
  return key;
}

/// Appends "--key value" for config entries that the command line did not set.
std::vector<std::string> merge_config(std::vector<std::string> args, const std::set<std::string>& known_flags) {
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (!config_path) return args;
  const json cfg = nn::read_json_file(*config_path);
  if (!cfg.is_object()) throw Error(ErrorCode::ParseError, "config file must hold a JSON object");

  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    const std::string name = flag_key(key);
    const std::string flag = "--" + name;
    if (name == "config" || !known_flags.contains(name) || given(flag)) continue;
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_string()) {
      extra.push_back(flag);
      extra.push_back(value.get<std::string>());
    } else if (value.is_number_integer()) {
      extra.push_back(flag);
      extra.push_back(std::to_string(value.get<long long>()));
    } else if (value.is_number()) {
      extra.push_back(flag);
      extra.push_back(value.dump());
    } else {
      throw Error(ErrorCode::ParseError, "config value for " + key + " must be a scalar");
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

/// Long names of the options of the subcommand chain selected by `args`.
std::set<std::string> active_flags(CLI::App& app, const std::vector<std::string>& args) {
  std::set<std::string> flags;
  CLI::App* cur = &app;
  for (const auto& a : args) {
    if (a.rfind("-", 0) == 0) break;
    CLI::App* sub = nullptr;
    try {
      sub = cur->get_subcommand(a);
    } catch (const CLI::OptionNotFound&) {
      break;
    }
    cur = sub;
  }
  for (const CLI::Option* opt : cur->get_options())
    for (const auto& n : opt->get_lnames()) flags.insert(n);
  return flags;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lip-sync pipeline: synthetic data, training, rendering"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file supplying default flag values");

  // synth corpus
  auto* synth = app.add_subcommand("synth", "Synthetic data");
  synth->require_subcommand(1);
  auto* synth_corpus = synth->add_subcommand("corpus", "Write synthetic talking clips and a corpus manifest");
  std::uint64_t synth_seed = 0;
  int synth_n = 4;
  std::string synth_out;
  SynthClipOptions synth_opt;
  synth_corpus->add_option("--seed", synth_seed);
  synth_corpus->add_option("--n", synth_n, "Number of clips")->check(CLI::PositiveNumber);
  synth_corpus->add_option("--out", synth_out)->required();
  synth_corpus->add_option("--seconds", synth_opt.seconds)->check(CLI::PositiveNumber);
  synth_corpus->add_option("--fps", synth_opt.fps)->check(CLI::PositiveNumber);
  synth_corpus->add_option("--size", synth_opt.width, "Square frame size in pixels")->check(CLI::Range(32, 4096));
  synth_corpus->add_option("--config", config_path);

  // dataset build
  auto* dataset = app.add_subcommand("dataset", "Dataset preparation");
  dataset->require_subcommand(1);
  auto* dataset_build = dataset->add_subcommand("build", "Fit PCA, write sequences and in-painting pairs");
  std::string manifest_path, data_out;
  DatasetOptions ds_opt;
  dataset_build->add_option("--manifest", manifest_path)->required();
  dataset_build->add_option("--out", data_out)->required();
  dataset_build->add_option("--pairs-per-sec", ds_opt.pairs_per_sec)->check(CLI::PositiveNumber);
  dataset_build->add_option("--pca-k", ds_opt.pca_k);
  dataset_build->add_option("--bbox-expand", ds_opt.bbox_expand)->check(CLI::NonNegativeNumber);
  dataset_build->add_option("--config", config_path);

  // train keypoints / inpainter
  auto* train = app.add_subcommand("train", "Train a network");
  train->require_subcommand(1);
  auto* train_kp = train->add_subcommand("keypoints", "Train the audio-to-keypoint predictor");
  std::string kp_data, kp_out;
  PredictorConfig kp_cfg;
  train_kp->add_option("--data", kp_data)->required();
  train_kp->add_option("--out", kp_out)->required();
  train_kp->add_option("--hidden", kp_cfg.hidden_size);
  train_kp->add_option("--layers", kp_cfg.layers);
  train_kp->add_option("--delay", kp_cfg.delay_frames);
  train_kp->add_option("--epochs", kp_cfg.epochs);
  train_kp->add_option("--lr", kp_cfg.learning_rate);
  train_kp->add_option("--batch", kp_cfg.batch_size);
  train_kp->add_option("--seed", kp_cfg.seed);
  train_kp->add_option("--config", config_path);

  auto* train_inp = train->add_subcommand("inpainter", "Train the in-painting network");
  std::string inp_data, inp_out;
  InpainterConfig inp_cfg;
  bool inp_double = false;
  train_inp->add_option("--data", inp_data)->required();
  train_inp->add_option("--out", inp_out)->required();
  train_inp->add_option("--size", inp_cfg.image_size);
  train_inp->add_option("--depth", inp_cfg.depth);
  train_inp->add_option("--base", inp_cfg.base_channels);
  train_inp->add_option("--epochs", inp_cfg.epochs);
  train_inp->add_option("--lr", inp_cfg.learning_rate);
  train_inp->add_option("--batch", inp_cfg.batch_size);
  train_inp->add_option("--seed", inp_cfg.seed);
  train_inp->add_flag("--double", inp_double, "Compute in 64-bit instead of 32-bit");
  train_inp->add_option("--config", config_path);

  // render
  auto* render = app.add_subcommand("render", "Render a lip-synced clip");
  std::string r_text, r_audio, r_target, r_pca, r_kp, r_inp, r_out;
  int r_workers = 1;
  std::uint64_t r_seed = 0;
  double r_expand = kDefaultBoxExpand;
  auto* text_opt = render->add_option("--text", r_text);
  auto* audio_opt = render->add_option("--audio", r_audio);
  text_opt->excludes(audio_opt);
  render->add_option("--target", r_target)->required();
  render->add_option("--pca", r_pca)->required();
  render->add_option("--kp", r_kp)->required();
  render->add_option("--inpaint", r_inp)->required();
  render->add_option("--out", r_out)->required();
  render->add_option("--workers", r_workers)->check(CLI::PositiveNumber);
  render->add_option("--seed", r_seed, "Accepted for reproducibility records; rendering is deterministic");
  render->add_option("--bbox-expand", r_expand)->check(CLI::NonNegativeNumber);
  render->add_option("--config", config_path);

  // verify
  auto* verify = app.add_subcommand("verify", "Check a render directory");
  std::string v_out, v_compare;
  verify->add_option("--out", v_out)->required();
  verify->add_option("--compare", v_compare, "Second render of the same job; frames must be byte-identical");
  verify->add_option("--config", config_path);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = merge_config(args, active_flags(app, args));
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 2;
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 1;
  }

  try {
    if (synth_corpus->parsed()) {
      synth_opt.height = synth_opt.width;
      StagedDir stage(synth_out);
      json clips = json::array();
      for (int i = 0; i < synth_n; ++i) {
        const std::string name = numbered("clip", static_cast<std::size_t>(i), "d");
        const std::string dir = name.substr(0, name.size() - 2);
        const SynthClip clip = synth_clip(synth_seed * 1000003ULL + static_cast<std::uint64_t>(i), synth_opt);
        write_clip_dir(stage.path() / dir, clip, synth_opt.fps);
        clips.push_back({{"frames_dir", dir + "/frames"},
                         {"landmarks_path", dir + "/landmarks.jsonl"},
                         {"wav_path", dir + "/audio.wav"},
                         {"fps", synth_opt.fps}});
      }
      nn::write_json_file(stage.path() / "manifest.json",
                          {{"clips", clips},
                           {"notes", "synthetic cartoon faces driven by stub speech; seed " + std::to_string(synth_seed)}});
      stage.commit();
      std::cout << json{{"clips", synth_n}, {"out", synth_out}}.dump() << std::endl;
    } else if (dataset_build->parsed()) {
      const auto summary = build_dataset(read_corpus_manifest(manifest_path), data_out, ds_opt);
      std::cout << to_json(summary).dump() << std::endl;
    } else if (train_kp->parsed()) {
      const auto seqs = load_sequences(kp_data);
      kp_cfg.input_dim = static_cast<int>(seqs.front().features.cols());
      kp_cfg.output_dim = static_cast<int>(seqs.front().targets.cols());
      const auto res = train_predictor(seqs, kp_cfg);
      nn::write_json_file(kp_out, to_json(res.model, res.loss_history));
      std::cout << json{{"epochs", res.loss_history.size()},
                        {"final_loss", res.loss_history.empty() ? json(nullptr) : json(res.loss_history.back())}}
                       .dump()
                << std::endl;
    } else if (train_inp->parsed()) {
      inp_cfg.single_precision = !inp_double;
      const auto pairs = load_pairs(inp_data);
      const auto res = train_inpainter(pairs, inp_cfg);
      nn::write_json_file(inp_out, to_json(res.model, res.loss_history));
      std::cout << json{{"pairs", pairs.size()},
                        {"epochs", res.loss_history.size()},
                        {"final_loss", res.loss_history.empty() ? json(nullptr) : json(res.loss_history.back())}}
                       .dump()
                << std::endl;
    } else if (render->parsed()) {
      RenderInputs in;
      if (text_opt->count() > 0) in.text = r_text;
      else if (audio_opt->count() > 0) in.audio = r_audio;
      else throw Error(ErrorCode::BadArgument, "render needs --text or --audio");
      in.target_clip = r_target;
      in.pca = load_pca(r_pca);
      in.predictor = predictor_from_json(nn::read_json_file(r_kp));
      in.inpainter = inpainter_from_json(nn::read_json_file(r_inp));
      in.workers = r_workers;
      in.bbox_expand = r_expand;
      const auto manifest = render_video(in, r_out);
      std::cout << json{{"frames", manifest.frames.size()}, {"out", r_out}}.dump() << std::endl;
    } else if (verify->parsed()) {
      std::optional<std::filesystem::path> compare;
      if (!v_compare.empty()) compare = v_compare;
      const auto rep = verify_outputs(v_out, compare);
      if (!rep.ok()) {
        std::cerr << json{{"error", "VerificationFailed"},
                          {"message", std::to_string(rep.violations.size()) + " violation(s)"},
                          {"violations", rep.violations}}
                         .dump()
                  << std::endl;
        return 1;
      }
      std::cout << json{{"frames_checked", rep.frames_checked}, {"compared", rep.compared}, {"violations", json::array()}}
                       .dump()
                << std::endl;
    }
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("InternalError", e.what());
    return 1;
  }
  return 0;
}
