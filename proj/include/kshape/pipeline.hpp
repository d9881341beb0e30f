#pragma once

// Dataset-level preprocessing and the experiment grids (ablation, transform
// variants, projection variants).

#include <cstdio>
#include <string>
#include <vector>

#include "kshape/model.hpp"
#include "kshape/trajectory.hpp"

namespace kshape {

struct Dataset {
  int joints = 0;
  std::vector<std::string> class_names;
  std::vector<SkeletonSequence> train;
  std::vector<SkeletonSequence> test;
};

struct PreprocessOptions {
  int frames = 100;
  Projection projection = Projection::CommonReference;
  bool align = true;
};

inline PreprocessOptions preprocess_options(const KShapeNetConfig& c) {
  return {c.frames, c.projection, c.align};
}

/// Reference used when none is configured: pre-shape of frame 0 of the first
/// training sequence.
inline ReferenceShape default_reference(const Dataset& data) {
  if (data.train.empty()) throw DomainError("default_reference: empty training set");
  return reference_from_first_frame(data.train.front());
}

/// resample -> pre-shape (-> align) -> projection for one sequence.
inline TangentTrajectory encode_sequence(const SkeletonSequence& seq, const PreprocessOptions& opt,
                                         const ReferenceShape& ref) {
  const SkeletonSequence resampled = resample_sequence(seq, opt.frames);
  const PreShapeTrajectory traj = sequence_to_trajectory(resampled, ref, opt.align);
  try {
    return project(traj, opt.projection, ref);
  } catch (const UndefinedMapError& e) {
    throw UndefinedMapError("sequence '" + seq.id + "': " + e.what());
  }
}

inline LabeledSet encode_set(const std::vector<SkeletonSequence>& seqs, const PreprocessOptions& opt,
                             const ReferenceShape& ref) {
  LabeledSet out;
  for (const auto& s : seqs) {
    out.inputs.push_back(encode_sequence(s, opt, ref).data);
    out.labels.push_back(s.label);
    out.ids.push_back(s.id);
  }
  return out;
}

struct GridRow {
  std::string name;
  KShapeNetConfig config;
  Metrics metrics;
};

/// Preprocesses with each row's projection, builds and trains a fresh model.
inline GridRow run_row(const std::string& name, const KShapeNetConfig& config, const Dataset& data,
                       const ReferenceShape& ref) {
  const PreprocessOptions opt = preprocess_options(config);
  const LabeledSet train_set = encode_set(data.train, opt, ref);
  const LabeledSet test_set = encode_set(data.test, opt, ref);
  Model model = build_model(config, ref);
  Metrics m = train(model, train_set, test_set);
  return {name, config, std::move(m)};
}

namespace detail {

inline KShapeNetConfig full_config(KShapeNetConfig base) {
  if (base.projection == Projection::None) base.projection = Projection::CommonReference;
  if (!base.transform) base.transform = TransformVariant::NonRigidAngle;
  return base;
}

}  // namespace detail

/// Baseline, transform only, projection only, full; identical seeds and epochs.
inline std::vector<GridRow> run_ablation(const KShapeNetConfig& base, const Dataset& data,
                                         const ReferenceShape& ref) {
  const KShapeNetConfig full = detail::full_config(base);
  KShapeNetConfig baseline = full, transform_only = full, projection_only = full;
  baseline.projection = Projection::None;
  baseline.transform.reset();
  transform_only.projection = Projection::None;
  projection_only.transform.reset();
  return {run_row("baseline", baseline, data, ref), run_row("transform_only", transform_only, data, ref),
          run_row("projection_only", projection_only, data, ref), run_row("full", full, data, ref)};
}

/// The four transformation-layer variants on the full pipeline.
inline std::vector<GridRow> run_variants(const KShapeNetConfig& base, const Dataset& data,
                                         const ReferenceShape& ref) {
  std::vector<GridRow> rows;
  for (auto v : {TransformVariant::RigidMatrix, TransformVariant::RigidAngle, TransformVariant::NonRigidMatrix,
                 TransformVariant::NonRigidAngle}) {
    KShapeNetConfig c = detail::full_config(base);
    c.transform = v;
    rows.push_back(run_row(std::string(to_string(v)), c, data, ref));
  }
  return rows;
}

/// Common-reference log, first-frame log and shooting-vector transport.
inline std::vector<GridRow> run_projections(const KShapeNetConfig& base, const Dataset& data,
                                            const ReferenceShape& ref) {
  std::vector<GridRow> rows;
  for (auto p : {Projection::CommonReference, Projection::FirstFrame, Projection::ShootingPT}) {
    KShapeNetConfig c = detail::full_config(base);
    c.projection = p;
    rows.push_back(run_row(std::string(to_string(p)), c, data, ref));
  }
  return rows;
}

/// Fixed-width text table; deterministic for identical inputs.
inline std::string format_table(const std::vector<GridRow>& rows) {
  std::string out = "row                projection   transform        final_loss  train_acc  test_acc\n";
  char line[256];
  for (const auto& r : rows) {
    const double loss = r.metrics.epoch_losses.empty() ? 0.0 : r.metrics.epoch_losses.back();
    const std::string transform = r.config.transform ? std::string(to_string(*r.config.transform)) : "off";
    std::snprintf(line, sizeof line, "%-18s %-12s %-16s %10.6f %10.4f %9.4f\n", r.name.c_str(),
                  std::string(to_string(r.config.projection)).c_str(), transform.c_str(), loss,
                  r.metrics.train_accuracy, r.metrics.test_accuracy);
    out += line;
  }
  return out;
}

}  // namespace kshape
