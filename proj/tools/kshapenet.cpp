// kshapenet: dataset generation, preprocessing, training, evaluation,
// experiment grids and self-checks.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "kshape/checks.hpp"
#include "kshape/io.hpp"
#include "kshape/pipeline.hpp"
#include "kshape/synth.hpp"

namespace {

using kshape::io::json;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> frames;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_out = true) {
  cmd->add_option("--config", f.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--epochs", f.epochs, "Training epochs");
  cmd->add_option("--frames", f.frames, "Frames per resampled sequence");
  if (with_out) cmd->add_option("--out", f.out, "Output path");
}

json load_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  return json::parse(in);
}

// Config files may hold a "model" and a "synth" section, or be a bare model config.
json section(const json& root, const char* name) {
  if (root.contains(name)) return root.at(name);
  if (std::string(name) == "model" && !root.contains("synth")) return root;
  return json::object();
}

kshape::KShapeNetConfig model_config(const CommonFlags& f, kshape::KShapeNetConfig base = {}) {
  kshape::KShapeNetConfig c = kshape::io::config_from_json(section(load_json(f.config), "model"), base);
  if (f.seed) c.seed = *f.seed;
  if (f.epochs) c.epochs = *f.epochs;
  if (f.frames) c.frames = *f.frames;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw kshape::FormatError("cannot write " + path);
  out << text;
}

int cmd_synth(const CommonFlags& f) {
  json spec_json = section(load_json(f.config), "synth");
  if (f.seed) spec_json["seed"] = *f.seed;
  if (f.frames) spec_json["frames"] = *f.frames;
  const kshape::SyntheticSpec spec = kshape::io::synthetic_spec_from_json(spec_json);
  const kshape::Dataset data = kshape::synth_generate(spec);
  const std::filesystem::path dir = f.out.empty() ? "synthetic" : f.out;
  kshape::io::write_dataset(dir, data);
  std::cout << "wrote " << data.train.size() + data.test.size() << " sequences (" << data.class_names.size()
            << " classes) to " << (dir / "manifest.json").string() << "\n";
  return 0;
}

int cmd_preprocess(const CommonFlags& f, const std::string& manifest) {
  const kshape::Dataset data = kshape::io::read_dataset(manifest);
  const kshape::io::TensorFile t = kshape::io::preprocess(data, model_config(f));
  if (f.out.empty()) throw kshape::FormatError("preprocess: --out is required");
  kshape::io::write_tensor_file(f.out, t);
  std::cout << "wrote " << t.train.size() << " train + " << t.test.size() << " test trajectories ("
            << t.config.frames << " x " << t.config.features() << ", projection "
            << kshape::to_string(t.config.projection) << ") to " << f.out << "\n";
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& tensors) {
  const kshape::io::TensorFile t = kshape::io::read_tensor_file(tensors);
  kshape::KShapeNetConfig c = model_config(f, t.config);
  // Data-shaping fields come from the tensor file.
  c.frames = t.config.frames;
  c.joints = t.config.joints;
  c.classes = t.config.classes;
  c.projection = t.config.projection;
  c.align = t.config.align;
  kshape::Model model = kshape::build_model(c, t.reference);
  const kshape::Metrics m = kshape::train(model, t.train, t.test.size() ? t.test : t.train);
  if (!f.out.empty()) kshape::io::write_checkpoint(f.out, model);
  std::cout << kshape::io::metrics_to_json(m).dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& tensors, const std::string& split,
             const std::string& out) {
  const kshape::Model model = kshape::io::read_checkpoint(checkpoint);
  const kshape::io::TensorFile t = kshape::io::read_tensor_file(tensors);
  kshape::LabeledSet set;
  auto add = [&](const kshape::LabeledSet& s) {
    set.inputs.insert(set.inputs.end(), s.inputs.begin(), s.inputs.end());
    set.labels.insert(set.labels.end(), s.labels.begin(), s.labels.end());
    set.ids.insert(set.ids.end(), s.ids.begin(), s.ids.end());
  };
  if (split == "train" || split == "all") add(t.train);
  if (split == "test" || split == "all") add(t.test);
  const kshape::Evaluation ev = kshape::evaluate(model, set);
  write_text(out, kshape::io::evaluation_to_json(ev).dump(2) + "\n");
  return 0;
}

template <class Grid>
int cmd_grid(const CommonFlags& f, const std::string& manifest, Grid&& grid) {
  const kshape::Dataset data = kshape::io::read_dataset(manifest);
  kshape::KShapeNetConfig c = model_config(f);
  c.joints = data.joints;
  c.classes = static_cast<int>(data.class_names.size());
  const auto rows = grid(c, data, kshape::default_reference(data));
  write_text(f.out, kshape::format_table(rows));
  return 0;
}

int cmd_check(const std::string& which) {
  kshape::checks::Report rep;
  if (which == "geometry" || which == "all") rep.append(kshape::checks::geometry_suite());
  if (which == "gradients" || which == "all") {
    rep.append(kshape::checks::gradient_suite());
    rep.append(kshape::checks::so3_suite());
  }
  if (which == "pipeline" || which == "all") rep.append(kshape::checks::pipeline_suite());
  std::cout << rep.format();
  const bool ok = rep.all_passed();
  std::cout << (ok ? "all checks passed\n" : "CHECKS FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kendall shape-space action recognition (KShapeNet)"};
  app.require_subcommand(1);

  CommonFlags synth_f, pre_f, train_f, ablate_f, variants_f, proj_f;
  std::string manifest, tensors, checkpoint, split = "test", eval_out, which = "all";

  auto* synth = app.add_subcommand("synth", "Generate a synthetic skeleton action dataset");
  add_common(synth, synth_f);

  auto* pre = app.add_subcommand("preprocess", "Resample, normalize and project a dataset");
  pre->add_option("manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  add_common(pre, pre_f);

  auto* tr = app.add_subcommand("train", "Train a model on a tangent-tensor file");
  tr->add_option("tensors", tensors, "Tangent-tensor file")->required()->check(CLI::ExistingFile);
  add_common(tr, train_f);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a tangent-tensor file");
  ev->add_option("checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("tensors", tensors, "Tangent-tensor file")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));
  ev->add_option("--out", eval_out, "Output path (default stdout)");

  auto* ab = app.add_subcommand("ablate", "Baseline / +transform / +projection / full");
  ab->add_option("manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  add_common(ab, ablate_f);

  auto* var = app.add_subcommand("variants", "Compare the four transformation-layer variants");
  var->add_option("manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  add_common(var, variants_f);

  auto* proj = app.add_subcommand("projections", "Compare the tangent-space projections");
  proj->add_option("manifest", manifest, "Dataset manifest")->required()->check(CLI::ExistingFile);
  add_common(proj, proj_f);

  auto* chk = app.add_subcommand("check", "Run the built-in property suites");
  chk->add_option("suite", which, "geometry, gradients, pipeline or all")
      ->check(CLI::IsMember({"geometry", "gradients", "pipeline", "all"}));

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) return cmd_synth(synth_f);
    if (pre->parsed()) return cmd_preprocess(pre_f, manifest);
    if (tr->parsed()) return cmd_train(train_f, tensors);
    if (ev->parsed()) return cmd_eval(checkpoint, tensors, split, eval_out);
    if (ab->parsed()) return cmd_grid(ablate_f, manifest, [](auto&&... a) { return kshape::run_ablation(a...); });
    if (var->parsed()) return cmd_grid(variants_f, manifest, [](auto&&... a) { return kshape::run_variants(a...); });
    if (proj->parsed()) {
      return cmd_grid(proj_f, manifest, [](auto&&... a) { return kshape::run_projections(a...); });
    }
    if (chk->parsed()) return cmd_check(which);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
