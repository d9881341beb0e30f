#pragma once

// File formats.
//
//  * Sequence file: one JSON object per line,
//      {"id": str, "label": int, "joints": n, "frames": [[[x,y,z] * n] * T_raw]}
//  * Manifest: JSON object naming the sequence file (relative to the manifest),
//    the joint count, class names and the train/test split by id.
//  * Tangent-tensor file: a JSON header line, then for every sequence a JSON
//    record line {"id", "label", "split"} followed by T lines of
//    space-separated floats printed with 17 significant digits.
//  * Checkpoint: a JSON object with config, reference shape, every parameter
//    tensor as nested lists and the Adam state.
//
// nlohmann::json prints doubles in shortest round-trip form, so every file
// reproduces its 64-bit values exactly.

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "kshape/errors.hpp"
#include "kshape/model.hpp"
#include "kshape/pipeline.hpp"
#include "kshape/synth.hpp"

namespace kshape::io {

using json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------- matrices

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected a nested numeric list");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows == 0 ? 0 : static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<Eigen::Index>(j[i].size()) != cols) throw FormatError("ragged matrix");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::VectorXd vector_from_json(const json& j) {
  if (!j.is_array()) throw FormatError("expected a numeric list");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

// ---------------------------------------------------------------- config

inline json config_to_json(const KShapeNetConfig& c) {
  return json{{"frames", c.frames},
              {"joints", c.joints},
              {"classes", c.classes},
              {"projection", std::string(to_string(c.projection))},
              {"transform", c.transform ? std::string(to_string(*c.transform)) : std::string("off")},
              {"align", c.align},
              {"conv1_channels", c.conv1_channels},
              {"conv1_kernel", c.conv1_kernel},
              {"conv2_channels", c.conv2_channels},
              {"conv2_kernel", c.conv2_kernel},
              {"pool_window", c.pool_window},
              {"lstm_hidden", c.lstm_hidden},
              {"learning_rate", c.learning_rate},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"epsilon", c.epsilon},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed}};
}

/// Overlays the keys present in `j` onto `c`.
inline KShapeNetConfig config_from_json(const json& j, KShapeNetConfig c = {}) {
  if (!j.is_object()) throw FormatError("config must be a JSON object");
  auto take = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  take("frames", c.frames);
  take("joints", c.joints);
  take("classes", c.classes);
  if (j.contains("projection")) c.projection = projection_from_string(j.at("projection").get<std::string>());
  if (j.contains("transform")) {
    const auto t = j.at("transform").get<std::string>();
    if (t == "off") {
      c.transform.reset();
    } else {
      c.transform = transform_variant_from_string(t);
    }
  }
  take("align", c.align);
  take("conv1_channels", c.conv1_channels);
  take("conv1_kernel", c.conv1_kernel);
  take("conv2_channels", c.conv2_channels);
  take("conv2_kernel", c.conv2_kernel);
  take("pool_window", c.pool_window);
  take("lstm_hidden", c.lstm_hidden);
  take("learning_rate", c.learning_rate);
  take("beta1", c.beta1);
  take("beta2", c.beta2);
  take("epsilon", c.epsilon);
  take("epochs", c.epochs);
  take("batch_size", c.batch_size);
  take("seed", c.seed);
  return c;
}

inline json reference_to_json(const ReferenceShape& r) {
  return json{{"provenance", r.provenance}, {"coords", vector_to_json(r.shape.flat())}};
}

inline ReferenceShape reference_from_json(const json& j) {
  return {PreShape::from_flat(vector_from_json(j.at("coords"))), j.at("provenance").get<std::string>()};
}

// ---------------------------------------------------------------- sequences

inline json sequence_to_json(const SkeletonSequence& s) {
  json frames = json::array();
  for (const auto& f : s.frames) {
    json joints = json::array();
    for (Eigen::Index j = 0; j < f.rows(); ++j) joints.push_back(json::array({f(j, 0), f(j, 1), f(j, 2)}));
    frames.push_back(std::move(joints));
  }
  return json{{"id", s.id}, {"label", s.label}, {"joints", s.joints()}, {"frames", std::move(frames)}};
}

inline SkeletonSequence sequence_from_json(const json& j) {
  SkeletonSequence s;
  s.id = j.at("id").get<std::string>();
  s.label = j.at("label").get<int>();
  const int n = j.at("joints").get<int>();
  for (const auto& f : j.at("frames")) {
    if (static_cast<int>(f.size()) != n) {
      throw FormatError("sequence '" + s.id + "': frame joint count differs from 'joints'");
    }
    Landmarks frame(n, 3);
    for (int k = 0; k < n; ++k) {
      if (f[k].size() != 3) throw FormatError("sequence '" + s.id + "': joints must have 3 coordinates");
      for (int c = 0; c < 3; ++c) frame(k, c) = f[k][c].get<double>();
    }
    s.frames.push_back(std::move(frame));
  }
  if (s.label < 0) throw FormatError("sequence '" + s.id + "': negative label");
  return s;
}

inline void write_sequences(const std::filesystem::path& path, const std::vector<SkeletonSequence>& seqs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (const auto& s : seqs) out << sequence_to_json(s).dump() << '\n';
}

inline std::vector<SkeletonSequence> read_sequences(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::vector<SkeletonSequence> seqs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      seqs.push_back(sequence_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return seqs;
}

// ---------------------------------------------------------------- manifest

struct DatasetManifest {
  std::string sequences;  // path relative to the manifest directory
  int joints = 0;
  std::vector<std::string> class_names;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

inline json manifest_to_json(const DatasetManifest& m) {
  return json{{"format", "kshape-manifest"},
              {"version", kFormatVersion},
              {"sequences", m.sequences},
              {"joints", m.joints},
              {"classes", m.class_names},
              {"splits", {{"train", m.train_ids}, {"test", m.test_ids}}}};
}

inline DatasetManifest manifest_from_json(const json& j) {
  if (j.value("format", "") != "kshape-manifest") throw FormatError("not a kshape manifest");
  DatasetManifest m;
  m.sequences = j.at("sequences").get<std::string>();
  m.joints = j.at("joints").get<int>();
  m.class_names = j.at("classes").get<std::vector<std::string>>();
  m.train_ids = j.at("splits").at("train").get<std::vector<std::string>>();
  m.test_ids = j.at("splits").at("test").get<std::vector<std::string>>();
  return m;
}

/// Writes `dir`/sequences.jsonl and `dir`/manifest.json.
inline void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  std::filesystem::create_directories(dir);
  DatasetManifest m{"sequences.jsonl", data.joints, data.class_names, {}, {}};
  std::vector<SkeletonSequence> all;
  for (const auto& s : data.train) {
    m.train_ids.push_back(s.id);
    all.push_back(s);
  }
  for (const auto& s : data.test) {
    m.test_ids.push_back(s.id);
    all.push_back(s);
  }
  write_sequences(dir / m.sequences, all);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest_to_json(m).dump(2) << '\n';
}

/// Loads a manifest and its sequence file, checking that every id appears
/// exactly once and every label names a class.
inline Dataset read_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  DatasetManifest m;
  try {
    m = manifest_from_json(j);
  } catch (const json::exception& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  const auto seqs = read_sequences(manifest_path.parent_path() / m.sequences);

  std::map<std::string, const SkeletonSequence*> by_id;
  for (const auto& s : seqs) {
    if (!by_id.emplace(s.id, &s).second) throw FormatError("duplicate sequence id '" + s.id + "'");
    if (s.label >= static_cast<int>(m.class_names.size())) {
      throw FormatError("sequence '" + s.id + "': label outside the class list");
    }
    if (s.joints() != m.joints) throw FormatError("sequence '" + s.id + "': joint count differs from manifest");
  }
  Dataset data;
  data.joints = m.joints;
  data.class_names = m.class_names;
  std::set<std::string> used;
  auto collect = [&](const std::vector<std::string>& ids, std::vector<SkeletonSequence>& dst) {
    for (const auto& id : ids) {
      auto it = by_id.find(id);
      if (it == by_id.end()) throw FormatError("manifest references unknown id '" + id + "'");
      if (!used.insert(id).second) throw FormatError("id '" + id + "' assigned to more than one split");
      dst.push_back(*it->second);
    }
  };
  collect(m.train_ids, data.train);
  collect(m.test_ids, data.test);
  return data;
}

// ---------------------------------------------------------------- synth spec

inline json synthetic_spec_to_json(const SyntheticSpec& s) {
  json classes = json::array();
  for (const auto& c : s.classes) {
    json joints = json::array();
    for (const auto& m : c.joints) {
      joints.push_back({{"axis", {m.axis.x(), m.axis.y(), m.axis.z()}},
                        {"amplitude", m.amplitude},
                        {"frequency", m.frequency},
                        {"phase", m.phase}});
    }
    classes.push_back({{"name", c.name}, {"joints", std::move(joints)}});
  }
  return json{{"joints", s.joints},
              {"sequences_per_class", s.sequences_per_class},
              {"test_per_class", s.test_per_class},
              {"frames", s.frames},
              {"noise", s.noise},
              {"seed", s.seed},
              {"templates", std::move(classes)}};
}

/// Either explicit "templates" or "classes": count (templates drawn from the seed).
inline SyntheticSpec synthetic_spec_from_json(const json& j) {
  const int joints = j.value("joints", 8);
  const int per_class = j.value("sequences_per_class", 30);
  const int test = j.value("test_per_class", 10);
  const int frames = j.value("frames", 40);
  const double noise = j.value("noise", 0.02);
  const auto seed = j.value("seed", std::uint64_t{0});
  if (j.contains("templates")) {
    SyntheticSpec s{joints, {}, per_class, test, frames, noise, seed};
    for (const auto& c : j.at("templates")) {
      MotionTemplate t{c.at("name").get<std::string>(), {}};
      for (const auto& m : c.at("joints")) {
        const auto axis = m.at("axis").get<std::vector<double>>();
        if (axis.size() != 3) throw FormatError("synth template axis must have 3 entries");
        Eigen::Vector3d a(axis[0], axis[1], axis[2]);
        // Written axes are already unit; leave them bit-identical.
        if (std::abs(a.norm() - 1.0) > 1e-12) a.normalize();
        t.joints.push_back({a, m.at("amplitude").get<double>(),
                            m.at("frequency").get<double>(), m.at("phase").get<double>()});
      }
      s.classes.push_back(std::move(t));
    }
    return s;
  }
  return make_synthetic_spec(j.value("classes", 3), joints, per_class, test, frames, noise, seed);
}

// ---------------------------------------------------------------- tangent tensors

struct TensorFile {
  KShapeNetConfig config;
  ReferenceShape reference;
  std::vector<std::string> class_names;
  LabeledSet train;
  LabeledSet test;
};

inline std::string format_row(const Eigen::MatrixXd& m, Eigen::Index r) {
  std::string line;
  char buf[32];
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
    if (c) line += ' ';
    line += buf;
  }
  return line;
}

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  const json header{{"format", "kshape-tangent"},
                    {"version", kFormatVersion},
                    {"frames", t.config.frames},
                    {"features", t.config.features()},
                    {"joints", t.config.joints},
                    {"projection", std::string(to_string(t.config.projection))},
                    {"classes", t.class_names},
                    {"count", t.train.size() + t.test.size()},
                    {"config", config_to_json(t.config)},
                    {"reference", reference_to_json(t.reference)}};
  out << header.dump() << '\n';
  auto emit = [&](const LabeledSet& set, const char* split) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      out << json{{"id", set.ids[i]}, {"label", set.labels[i]}, {"split", split}}.dump() << '\n';
      for (Eigen::Index r = 0; r < set.inputs[i].rows(); ++r) out << format_row(set.inputs[i], r) << '\n';
    }
  };
  emit(t.train, "train");
  emit(t.test, "test");
}

inline TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path.string() + ": empty file");
  TensorFile t;
  std::size_t count = 0;
  int frames = 0, features = 0;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "kshape-tangent") throw FormatError(path.string() + ": not a tangent file");
    if (header.value("version", 0) != kFormatVersion) throw FormatError(path.string() + ": unsupported version");
    t.config = config_from_json(header.at("config"));
    t.reference = reference_from_json(header.at("reference"));
    t.class_names = header.at("classes").get<std::vector<std::string>>();
    count = header.at("count").get<std::size_t>();
    frames = header.at("frames").get<int>();
    features = header.at("features").get<int>();
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": bad header: " + e.what());
  }
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated file");
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(path.string() + ": bad record: " + e.what());
    }
    Eigen::MatrixXd data(frames, features);
    for (int r = 0; r < frames; ++r) {
      if (!std::getline(in, line)) throw FormatError(path.string() + ": truncated rows");
      std::istringstream row(line);
      for (int c = 0; c < features; ++c) {
        std::string tok;
        if (!(row >> tok)) throw FormatError(path.string() + ": short row");
        char* end = nullptr;
        data(r, c) = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') throw FormatError(path.string() + ": bad number '" + tok + "'");
      }
    }
    const auto split = rec.at("split").get<std::string>();
    LabeledSet& dst = split == "train" ? t.train : t.test;
    if (split != "train" && split != "test") throw FormatError(path.string() + ": unknown split '" + split + "'");
    dst.inputs.push_back(std::move(data));
    dst.labels.push_back(rec.at("label").get<int>());
    dst.ids.push_back(rec.at("id").get<std::string>());
  }
  return t;
}

/// Runs the full preprocessing pipeline over a dataset.
inline TensorFile preprocess(const Dataset& data, KShapeNetConfig config,
                             const std::optional<ReferenceShape>& reference = std::nullopt) {
  config.joints = data.joints;
  config.classes = static_cast<int>(data.class_names.size());
  const ReferenceShape ref = reference ? *reference : default_reference(data);
  const PreprocessOptions opt = preprocess_options(config);
  return {config, ref, data.class_names, encode_set(data.train, opt, ref), encode_set(data.test, opt, ref)};
}

// ---------------------------------------------------------------- checkpoints

inline json checkpoint_to_json(const Model& m) {
  json params = json::object();
  const auto names = m.parameter_names();
  const auto tensors = m.parameters();
  for (std::size_t k = 0; k < names.size(); ++k) params[names[k]] = matrix_to_json(*tensors[k]);
  json first = json::array(), second = json::array();
  for (const auto& t : m.optimizer().first_moment) first.push_back(matrix_to_json(t));
  for (const auto& t : m.optimizer().second_moment) second.push_back(matrix_to_json(t));
  const auto& a = m.optimizer();
  return json{{"format", "kshape-checkpoint"},
              {"version", kFormatVersion},
              {"config", config_to_json(m.config())},
              {"reference", reference_to_json(m.reference())},
              {"parameters", std::move(params)},
              {"adam",
               {{"learning_rate", a.learning_rate},
                {"beta1", a.beta1},
                {"beta2", a.beta2},
                {"epsilon", a.epsilon},
                {"step", a.step},
                {"first_moment", std::move(first)},
                {"second_moment", std::move(second)}}}};
}

inline Model checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "kshape-checkpoint") throw FormatError("not a kshape checkpoint");
  if (j.value("version", 0) != kFormatVersion) throw FormatError("unsupported checkpoint version");
  Model m(config_from_json(j.at("config")), reference_from_json(j.at("reference")));
  const auto names = m.parameter_names();
  const auto tensors = m.parameters();
  for (std::size_t k = 0; k < names.size(); ++k) {
    Eigen::MatrixXd v = matrix_from_json(j.at("parameters").at(names[k]));
    if (v.rows() != tensors[k]->rows() || v.cols() != tensors[k]->cols()) {
      throw FormatError("checkpoint tensor '" + names[k] + "' has the wrong shape");
    }
    *tensors[k] = std::move(v);
  }
  const json& a = j.at("adam");
  AdamState& s = m.optimizer();
  s.learning_rate = a.at("learning_rate").get<double>();
  s.beta1 = a.at("beta1").get<double>();
  s.beta2 = a.at("beta2").get<double>();
  s.epsilon = a.at("epsilon").get<double>();
  s.step = a.at("step").get<std::int64_t>();
  for (const auto& t : a.at("first_moment")) s.first_moment.push_back(matrix_from_json(t));
  for (const auto& t : a.at("second_moment")) s.second_moment.push_back(matrix_from_json(t));
  if (s.first_moment.size() != s.second_moment.size() ||
      (!s.first_moment.empty() && s.first_moment.size() != tensors.size())) {
    throw FormatError("checkpoint optimizer state does not match the parameters");
  }
  return m;
}

inline void write_checkpoint(const std::filesystem::path& path, const Model& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << checkpoint_to_json(m).dump() << '\n';
}

inline Model read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------- metrics

inline json metrics_to_json(const Metrics& m) {
  return json{{"epoch_losses", m.epoch_losses},
              {"train_accuracy", m.train_accuracy},
              {"test_accuracy", m.test_accuracy},
              {"confusion", m.confusion}};
}

inline json evaluation_to_json(const Evaluation& e) {
  return json{{"accuracy", e.accuracy}, {"predictions", e.predictions}, {"confusion", e.confusion}};
}

}  // namespace kshape::io
