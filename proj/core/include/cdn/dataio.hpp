#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdn/geometry.hpp"

namespace cdn::data {

/// Object and action vocabulary sizes shared by every file of one dataset.
struct Vocabulary {
  int num_object_classes = 0;
  int num_action_classes = 0;

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;
};

/// <human box, object box, object class, action set> triplet.
///
/// Boxes are absolute pixel corners. Ground truth uses `actions` only. A
/// prediction additionally carries per-action probabilities (length C_a),
/// the object and interactive scores, and lists in `actions` the action ids
/// it reports; each reported action k scores
/// action_scores[k] * object_score * interactive_score.
struct HoiInstance {
  std::string image_id;
  Corners human_box;
  Corners object_box;
  int object_class = 0;
  std::vector<int> actions;
  std::vector<double> action_scores;
  double object_score = 1.0;
  double interactive_score = 1.0;

  /// c^hoi for action k of a prediction.
  double triplet_score(int action) const {
    return action_scores.at(static_cast<std::size_t>(action)) * object_score * interactive_score;
  }

  friend bool operator==(const HoiInstance&, const HoiInstance&) = default;
};

struct ImageAnnotation {
  std::string image_id;
  std::string file;
  int width = 0;
  int height = 0;
  std::vector<HoiInstance> hois;

  friend bool operator==(const ImageAnnotation&, const ImageAnnotation&) = default;
};

struct AnnotationSet {
  Vocabulary vocab;
  std::vector<ImageAnnotation> images;

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

struct PredictionSet {
  Vocabulary vocab;
  std::vector<HoiInstance> predictions;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

struct HoiClass {
  int object_class = 0;
  int action = 0;
  std::int64_t train_count = 0;
  bool rare = false;

  friend bool operator==(const HoiClass&, const HoiClass&) = default;
};

/// HOI classes (object, action) with training-instance counts and the rare
/// split (rare iff count < rare_threshold).
struct HoiClassTable {
  Vocabulary vocab;
  int rare_threshold = 10;
  std::vector<HoiClass> classes;

  /// Index into `classes`, or -1.
  int index_of(int object_class, int action) const;

  friend bool operator==(const HoiClassTable&, const HoiClassTable&) = default;
};

/// Counts every (object, action) label of the ground truth and flags rare
/// classes. Lists all C_o x C_a combinations, object-major.
HoiClassTable build_class_table(const AnnotationSet& train, int rare_threshold = 10);

/// Interleaved 8-bit RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Synthetic scene configuration.
struct SceneSpec {
  int num_images = 32;
  int image_size = 64;
  int num_object_classes = 3;
  int num_action_classes = 4;
  int min_pairs_per_image = 1;
  int max_pairs_per_image = 2;
  /// Zipf exponent of the object and action frequencies (0 = uniform).
  double class_skew = 0.0;
  /// Draw class-coded shapes (rectangle, ellipse, diamond); otherwise every
  /// object is a rectangle distinguished by fill intensity only.
  bool class_coded_shapes = true;
  /// Number of direction patterns that encode actions; 0 means C_a. Actions
  /// at and above this count are companion labels of pattern (a - patterns)
  /// attached when the object sits close to the human.
  int geometric_patterns = 0;
  int rare_threshold = 10;

  int patterns() const { return geometric_patterns > 0 ? geometric_patterns : num_action_classes; }
  /// Throws ConfigError on an invalid spec.
  void validate() const;
};

struct Dataset {
  AnnotationSet annotations;
  std::vector<Image> images;
  HoiClassTable classes;
};

/// Deterministic in (spec, seed). Throws ConfigError for invalid specs.
Dataset generate_dataset(const SceneSpec& spec, std::uint64_t seed);

SceneSpec load_scene_spec(const std::filesystem::path& path);
SceneSpec parse_scene_spec(const std::string& json_text, const std::string& origin = "<string>");

// Line-delimited files. The first line is a header record naming the format
// and vocabulary; every following line is one record. Unknown fields are
// rejected and errors carry file, line and field (see DataError).

void save_annotations(const std::filesystem::path& path, const AnnotationSet& set);
AnnotationSet load_annotations(const std::filesystem::path& path);

void save_predictions(const std::filesystem::path& path, const PredictionSet& set);
PredictionSet load_predictions(const std::filesystem::path& path);

void save_class_table(const std::filesystem::path& path, const HoiClassTable& table);
HoiClassTable load_class_table(const std::filesystem::path& path);

/// Binary PPM (P6).
void write_ppm(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);

/// Dataset directory: annotations.jsonl, classes.jsonl and images/*.ppm.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

inline constexpr const char* kAnnotationsFile = "annotations.jsonl";
inline constexpr const char* kClassesFile = "classes.jsonl";

}  // namespace cdn::data
