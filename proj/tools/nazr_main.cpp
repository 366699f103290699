// nazr: damage-assessment pipeline command line.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "nazr/error.hpp"
#include "nazr/imaging.hpp"
#include "nazr/pipeline.hpp"
#include "nazr/synth.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

struct CommonArgs {
  std::string config_path;
  Overrides overrides;
};

void add_config_flags(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  const std::pair<const char*, const char*> flags[] = {
      {"--manifest", "manifest"},       {"--model-dir", "model_dir"},
      {"--patch-size", "patch_size"},   {"--stride", "stride"},
      {"--gmm-k", "gmm_k"},             {"--gmm-samples", "gmm_samples"},
      {"--unary-epochs", "unary_epochs"}, {"--crf-iters", "crf_iters"},
      {"--crf-tol", "crf_tol"},         {"--theta-pos", "theta_pos"},
      {"--theta-int", "theta_int"},     {"--kernel-weights", "kernel_weights"},
      {"--svm-c", "svm_c"},             {"--class-weighting", "class_weighting"},
      {"--folds", "folds"},             {"--seed", "seed"},
      {"--min-area", "min_area"},
  };
  for (const auto& [flag, key] : flags) {
    std::string k = key;
    cmd->add_option_function<std::string>(
        flag, [&args, k](const std::string& v) { args.overrides.emplace_back(k, v); },
        "overrides config key " + k);
  }
}

nazr::PipelineConfig resolve_config(const CommonArgs& args) {
  nazr::PipelineConfig cfg;
  if (!args.config_path.empty()) cfg = nazr::load_config(args.config_path);
  for (const auto& [k, v] : args.overrides) nazr::set_config_value(cfg, k, v);
  cfg.validate();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw nazr::DataError("cannot write " + path);
  out << text;
}

int exit_code(const nazr::Error& e) {
  switch (e.kind()) {
    case nazr::ErrorKind::kConfig: return 2;
    case nazr::ErrorKind::kData: return 3;
    case nazr::ErrorKind::kNumeric: return 4;
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structural damage assessment from overhead imagery"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::size_t scenes = 20;
  std::uint64_t synth_seed = 0;
  double empty_frac = 0.0;
  std::string synth_out = "corpus";
  bool noise_free = false;
  int size = 64;
  synth->add_option("--scenes", scenes, "number of scenes")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--empty-frac", empty_frac, "fraction of scenes without structures")
      ->check(CLI::Range(0.0, 1.0));
  synth->add_option("--out", synth_out, "output directory");
  synth->add_option("--size", size, "scene width and height");
  synth->add_flag("--noise-free", noise_free, "exact annotations, no label confusion");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "rasterize and merge annotations");
  CommonArgs ingest_args;
  std::string ingest_out;
  add_config_flags(ingest, ingest_args);
  ingest->add_option("--out", ingest_out, "directory for merged label maps");

  auto* train = app.add_subcommand("train", "train unary, GMM and SVM models");
  CommonArgs train_args;
  add_config_flags(train, train_args);

  auto* infer = app.add_subcommand("infer", "label one image");
  CommonArgs infer_args;
  std::string image_path, infer_out = ".";
  add_config_flags(infer, infer_args);
  infer->add_option("--image", image_path, "PGM/PPM image")->required();
  infer->add_option("--out", infer_out, "directory for overlay and segments");

  auto* cv = app.add_subcommand("cv", "k-fold cross validation");
  CommonArgs cv_args;
  std::string cv_out, cv_format = "table";
  add_config_flags(cv, cv_args);
  cv->add_option("--out", cv_out, "write the JSON report here");
  cv->add_option("--format", cv_format, "stdout format")
      ->check(CLI::IsMember({"json", "table"}));

  auto* evaluate = app.add_subcommand("evaluate", "score trained models on a corpus");
  CommonArgs eval_args;
  std::string eval_format = "table";
  add_config_flags(evaluate, eval_args);
  evaluate->add_option("--format", eval_format, "output format")
      ->check(CLI::IsMember({"json", "table"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      nazr::SceneSpec spec = noise_free ? nazr::SceneSpec::noise_free() : nazr::SceneSpec{};
      spec.width = spec.height = size;
      spec.empty_fraction = empty_frac;
      spec.validate();
      const auto m = nazr::generate_corpus(scenes, spec, synth_seed, synth_out);
      std::cout << "wrote " << m.entries.size() << " scenes to " << synth_out << "\n";
    } else if (ingest->parsed()) {
      const auto cfg = resolve_config(ingest_args);
      const auto manifest = nazr::read_manifest(cfg.manifest);
      std::size_t kept = 0, empty = 0;
      int skipped = 0;
      for (const auto& entry : manifest.entries) {
        const auto img = nazr::read_pnm(entry.image);
        const auto raster = nazr::rasterize_annotations(nazr::read_annotations(entry.annotations),
                                                        img.width, img.height);
        skipped += raster.skipped_polygons;
        const auto gt = nazr::majority_vote(raster.maps);
        if (!nazr::has_structure(gt)) {
          ++empty;
          continue;
        }
        ++kept;
        if (!ingest_out.empty()) {
          std::filesystem::create_directories(ingest_out);
          nazr::write_label_map(std::filesystem::path(ingest_out) /
                                    (entry.image.stem().string() + "_gt.pgm"),
                                gt);
        }
      }
      std::cout << "scenes with structures: " << kept << "\nempty scenes dropped: " << empty
                << "\ndegenerate polygons skipped: " << skipped << "\n";
    } else if (train->parsed()) {
      const auto cfg = resolve_config(train_args);
      nazr::run_training(cfg, &std::cerr);
      std::cout << "models written to " << cfg.model_dir.string() << "\n";
    } else if (infer->parsed()) {
      const auto cfg = resolve_config(infer_args);
      const auto models = nazr::load_models(cfg);
      const auto img = nazr::read_pnm(image_path);
      const auto res = nazr::infer_scene(models, cfg, img);
      std::filesystem::create_directories(infer_out);
      const std::string stem = std::filesystem::path(image_path).stem().string();
      nazr::write_pnm(std::filesystem::path(infer_out) / (stem + "_overlay.ppm"),
                      nazr::render_overlay(img, res.final_map));
      std::string lines;
      for (const auto& seg : res.segments) lines += nazr::segment_json_line(stem, seg) + "\n";
      write_text((std::filesystem::path(infer_out) / (stem + "_segments.jsonl")).string(), lines);
      std::cout << lines;
    } else if (cv->parsed()) {
      const auto cfg = resolve_config(cv_args);
      const auto res = nazr::run_cv(cfg, &std::cerr);
      const auto json = nazr::cv_report_json(cfg, res);
      if (!cv_out.empty()) write_text(cv_out, json);
      std::cout << (cv_format == "json" ? json : nazr::cv_report_table(res));
    } else if (evaluate->parsed()) {
      const auto cfg = resolve_config(eval_args);
      const auto models = nazr::load_models(cfg);
      const auto corpus = nazr::ingest(nazr::read_manifest(cfg.manifest), cfg.descriptors);
      std::vector<const nazr::LoadedScene*> all;
      for (const auto& s : corpus.scenes) all.push_back(&s);
      const auto m = nazr::evaluate_scenes(models, cfg, all);
      std::cout << (eval_format == "json" ? nazr::metrics_json(m) : nazr::metrics_table(m));
    }
  } catch (const nazr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
