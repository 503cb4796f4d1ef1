#include "cdn/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "cdn/error.hpp"
#include "cdn/random.hpp"
#include "json.hpp"

namespace cdn::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;
constexpr const char* kAnnotationFormat = "cdn-annotations";
constexpr const char* kPredictionFormat = "cdn-predictions";
constexpr const char* kClassFormat = "cdn-hoi-classes";

/// Typed field access on one parsed record with file/line context.
class Record {
 public:
  Record(const json& obj, std::string file, std::size_t line, std::string prefix = "")
      : obj_(obj), file_(std::move(file)), line_(line), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) fail("<record>", "record is not a JSON object");
  }

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw DataError(file_, line_, prefix_ + field, what);
  }

  void only(std::initializer_list<const char*> allowed) const {
    for (const auto& [key, _] : obj_.items()) {
      const bool known = std::any_of(allowed.begin(), allowed.end(),
                                     [&](const char* a) { return key == a; });
      if (!known) fail(key, "unknown field");
    }
  }

  const json& req(const char* key) const {
    auto it = obj_.find(key);
    if (it == obj_.end()) fail(key, "missing field");
    return *it;
  }

  int integer(const char* key) const {
    const json& v = req(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<int>();
  }

  std::int64_t int64(const char* key) const {
    const json& v = req(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    return v.get<std::int64_t>();
  }

  double number(const char* key) const {
    const json& v = req(key);
    if (!v.is_number()) fail(key, "expected a number");
    return v.get<double>();
  }

  bool boolean(const char* key) const {
    const json& v = req(key);
    if (!v.is_boolean()) fail(key, "expected a boolean");
    return v.get<bool>();
  }

  std::string string(const char* key) const {
    const json& v = req(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }

  Corners box(const char* key) const {
    const json& v = req(key);
    if (!v.is_array() || v.size() != 4) fail(key, "expected [x1, y1, x2, y2]");
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "box coordinates must be numbers");
    }
    Corners c{v[0].get<double>(), v[1].get<double>(), v[2].get<double>(), v[3].get<double>()};
    if (!(c.x1 <= c.x2) || !(c.y1 <= c.y2)) fail(key, "box corners out of order");
    return c;
  }

  std::vector<int> int_list(const char* key) const {
    const json& v = req(key);
    if (!v.is_array()) fail(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) fail(key, "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::vector<double> number_list(const char* key) const {
    const json& v = req(key);
    if (!v.is_array()) fail(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  const json& obj_;
  std::string file_;
  std::size_t line_;
  std::string prefix_;
};

/// Iterates non-blank lines of a line-delimited JSON file.
class LineReader {
 public:
  explicit LineReader(const fs::path& path) : path_(path.string()), in_(path) {
    if (!in_) throw DataError(path_, 0, "<file>", "cannot open file");
  }

  /// Parses the next non-blank line; false at end of file.
  bool next(json& out) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out = json::parse(text);
      } catch (const json::parse_error& e) {
        throw DataError(path_, line_, "<record>", std::string("invalid JSON: ") + e.what());
      }
      return true;
    }
    return false;
  }

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_ = 0;
};

json box_json(const Corners& c) { return json::array({c.x1, c.y1, c.x2, c.y2}); }

json header_json(const char* format, const Vocabulary& vocab) {
  json h;
  h["format"] = format;
  h["version"] = kFormatVersion;
  h["num_object_classes"] = vocab.num_object_classes;
  h["num_action_classes"] = vocab.num_action_classes;
  return h;
}

Vocabulary read_header(LineReader& reader, const char* format,
                       std::initializer_list<const char*> extra_fields, json& header) {
  if (!reader.next(header)) throw DataError(reader.path(), 0, "format", "missing header record");
  Record rec(header, reader.path(), reader.line());
  std::vector<const char*> allowed = {"format", "version", "num_object_classes",
                                      "num_action_classes"};
  allowed.insert(allowed.end(), extra_fields.begin(), extra_fields.end());
  for (const auto& [key, _] : header.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      rec.fail(key, "unknown field");
    }
  }
  if (rec.string("format") != format) rec.fail("format", std::string("expected '") + format + "'");
  if (rec.integer("version") != kFormatVersion) rec.fail("version", "unsupported version");
  Vocabulary vocab{rec.integer("num_object_classes"), rec.integer("num_action_classes")};
  if (vocab.num_object_classes < 1) rec.fail("num_object_classes", "must be >= 1");
  if (vocab.num_action_classes < 1) rec.fail("num_action_classes", "must be >= 1");
  return vocab;
}

void check_vocab(const Record& rec, const Vocabulary& vocab, int object_class,
                 const std::vector<int>& actions, const char* actions_field) {
  if (object_class < 0 || object_class >= vocab.num_object_classes) {
    rec.fail("object_class", "object class " + std::to_string(object_class) + " out of range [0," +
                                 std::to_string(vocab.num_object_classes) + ")");
  }
  for (int a : actions) {
    if (a < 0 || a >= vocab.num_action_classes) {
      rec.fail(actions_field, "action id " + std::to_string(a) + " out of range [0," +
                                  std::to_string(vocab.num_action_classes) + ")");
    }
  }
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

int HoiClassTable::index_of(int object_class, int action) const {
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (classes[i].object_class == object_class && classes[i].action == action) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

HoiClassTable build_class_table(const AnnotationSet& train, int rare_threshold) {
  HoiClassTable table;
  table.vocab = train.vocab;
  table.rare_threshold = rare_threshold;
  const int C_a = train.vocab.num_action_classes;
  std::vector<std::int64_t> counts(
      static_cast<std::size_t>(train.vocab.num_object_classes) * C_a, 0);
  for (const auto& img : train.images) {
    for (const auto& h : img.hois) {
      for (int a : h.actions) ++counts[static_cast<std::size_t>(h.object_class) * C_a + a];
    }
  }
  for (int o = 0; o < train.vocab.num_object_classes; ++o) {
    for (int a = 0; a < C_a; ++a) {
      const auto n = counts[static_cast<std::size_t>(o) * C_a + a];
      table.classes.push_back({o, a, n, n < rare_threshold});
    }
  }
  return table;
}

// ---------------------------------------------------------------------------
// Scene generation

void SceneSpec::validate() const {
  if (num_images < 0) throw ConfigError("scene spec: num_images must be >= 0");
  if (image_size < 32) throw ConfigError("scene spec: image_size must be >= 32");
  if (num_object_classes < 1) throw ConfigError("scene spec: num_object_classes must be >= 1");
  if (num_action_classes < 1) throw ConfigError("scene spec: num_action_classes must be >= 1");
  if (min_pairs_per_image < 1) throw ConfigError("scene spec: min pairs per image must be >= 1");
  if (max_pairs_per_image < min_pairs_per_image) {
    throw ConfigError("scene spec: max pairs per image below min");
  }
  if (!(class_skew >= 0.0)) throw ConfigError("scene spec: class_skew must be >= 0");
  if (geometric_patterns < 0) throw ConfigError("scene spec: geometric_patterns must be >= 0");
  if (num_action_classes < patterns()) {
    throw ConfigError("scene spec: num_action_classes (" + std::to_string(num_action_classes) +
                      ") is smaller than the " + std::to_string(patterns()) +
                      " geometric patterns requested");
  }
  if (rare_threshold < 0) throw ConfigError("scene spec: rare_threshold must be >= 0");
}

namespace {

struct IntBox {
  int x1, y1, x2, y2;
  bool intersects(const IntBox& o) const {
    return x1 < o.x2 && o.x1 < x2 && y1 < o.y2 && o.y1 < y2;
  }
};

std::vector<double> zipf_weights(int n, double skew) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[static_cast<std::size_t>(i)] = std::pow(i + 1.0, -skew);
  return w;
}

void fill_shape(Image& img, const IntBox& b, int shape, std::uint8_t r, std::uint8_t g,
                std::uint8_t bl) {
  const double cx = 0.5 * (b.x1 + b.x2), cy = 0.5 * (b.y1 + b.y2);
  const double hw = 0.5 * (b.x2 - b.x1), hh = 0.5 * (b.y2 - b.y1);
  for (int y = b.y1; y < b.y2; ++y) {
    for (int x = b.x1; x < b.x2; ++x) {
      const double dx = (x + 0.5 - cx) / hw, dy = (y + 0.5 - cy) / hh;
      bool inside = true;
      if (shape == 1) inside = dx * dx + dy * dy <= 1.0;
      if (shape == 2) inside = std::abs(dx) + std::abs(dy) <= 1.0;
      if (!inside) continue;
      auto* px = &img.rgb[(static_cast<std::size_t>(y) * img.width + x) * 3];
      px[0] = r;
      px[1] = g;
      px[2] = bl;
    }
  }
}

std::string image_id_for(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", index);
  return buf;
}

}  // namespace

Dataset generate_dataset(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const int S = spec.image_size;
  const int P = spec.patterns();
  const auto object_weights = zipf_weights(spec.num_object_classes, spec.class_skew);
  const auto action_weights = zipf_weights(P, spec.class_skew);

  Dataset ds;
  ds.annotations.vocab = {spec.num_object_classes, spec.num_action_classes};

  for (int n = 0; n < spec.num_images; ++n) {
    ImageAnnotation ann;
    ann.image_id = image_id_for(n);
    ann.file = "images/" + ann.image_id + ".ppm";
    ann.width = S;
    ann.height = S;
    Image img{S, S, std::vector<std::uint8_t>(static_cast<std::size_t>(S) * S * 3, 0)};

    const int wanted = rng.uniform_int(spec.min_pairs_per_image, spec.max_pairs_per_image);
    std::vector<IntBox> placed;
    struct Placed {
      IntBox human, object;
      int object_class;
    };
    std::vector<Placed> pairs;
    for (int p = 0; p < wanted; ++p) {
      const int object_class = static_cast<int>(rng.categorical(object_weights));
      const int pattern = static_cast<int>(rng.categorical(action_weights));
      const bool has_companion = pattern + P < spec.num_action_classes;
      const bool near = has_companion && rng.uniform() < 0.5;

      bool ok = false;
      IntBox hb{}, ob{};
      for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
        const int hw = static_cast<int>(std::lround(rng.uniform(0.16, 0.24) * S));
        const int hh = static_cast<int>(std::lround(rng.uniform(0.26, 0.36) * S));
        const int ow = static_cast<int>(std::lround(rng.uniform(0.12, 0.18) * S));
        const int oh = static_cast<int>(std::lround(rng.uniform(0.12, 0.18) * S));
        const double step = 2.0 * std::numbers::pi / P;
        const double theta = step * pattern + rng.uniform(-0.1, 0.1) * step;
        const double dist = (near ? rng.uniform(0.14, 0.18) : rng.uniform(0.30, 0.36)) * S;
        const int dx = static_cast<int>(std::lround(dist * std::cos(theta)));
        const int dy = static_cast<int>(std::lround(dist * std::sin(theta)));

        // Offsets relative to the human box's top-left corner.
        const int ox1 = hw / 2 + dx - ow / 2, oy1 = hh / 2 + dy - oh / 2;
        const int min_x = std::min(0, ox1), max_x = std::max(hw, ox1 + ow);
        const int min_y = std::min(0, oy1), max_y = std::max(hh, oy1 + oh);
        const int lo_x = -min_x, hi_x = S - max_x;
        const int lo_y = -min_y, hi_y = S - max_y;
        if (lo_x > hi_x || lo_y > hi_y) continue;
        const int hx = rng.uniform_int(lo_x, hi_x), hy = rng.uniform_int(lo_y, hi_y);
        hb = {hx, hy, hx + hw, hy + hh};
        ob = {hx + ox1, hy + oy1, hx + ox1 + ow, hy + oy1 + oh};
        ok = std::none_of(placed.begin(), placed.end(), [&](const IntBox& b) {
          return b.intersects(hb) || b.intersects(ob);
        });
      }
      if (!ok) {
        if (p == 0) throw std::logic_error("generate_dataset: could not place the first pair");
        break;
      }
      placed.push_back(hb);
      placed.push_back(ob);
      pairs.push_back({hb, ob, object_class});

      HoiInstance inst;
      inst.image_id = ann.image_id;
      inst.human_box = {double(hb.x1), double(hb.y1), double(hb.x2), double(hb.y2)};
      inst.object_box = {double(ob.x1), double(ob.y1), double(ob.x2), double(ob.y2)};
      inst.object_class = object_class;
      inst.actions.push_back(pattern);
      if (near) inst.actions.push_back(pattern + P);
      ann.hois.push_back(std::move(inst));
    }

    // Humans first so objects stay visible where they overlap.
    for (const auto& pr : pairs) fill_shape(img, pr.human, 0, 230, 0, 0);
    for (const auto& pr : pairs) {
      const int shape = spec.class_coded_shapes ? pr.object_class % 3 : 0;
      const auto blue =
          static_cast<std::uint8_t>(40 + (200 * (pr.object_class + 1)) / spec.num_object_classes);
      fill_shape(img, pr.object, shape, 0, 200, blue);
    }

    ds.annotations.images.push_back(std::move(ann));
    ds.images.push_back(std::move(img));
  }
  ds.classes = build_class_table(ds.annotations, spec.rare_threshold);
  return ds;
}

SceneSpec parse_scene_spec(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": scene spec must be a JSON object");
  SceneSpec spec;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "num_images") spec.num_images = v.get<int>();
      else if (key == "image_size") spec.image_size = v.get<int>();
      else if (key == "num_object_classes") spec.num_object_classes = v.get<int>();
      else if (key == "num_action_classes") spec.num_action_classes = v.get<int>();
      else if (key == "pairs_per_image") {
        if (!v.is_array() || v.size() != 2) {
          throw ConfigError(origin + ": pairs_per_image must be [min, max]");
        }
        spec.min_pairs_per_image = v[0].get<int>();
        spec.max_pairs_per_image = v[1].get<int>();
      } else if (key == "class_skew") spec.class_skew = v.get<double>();
      else if (key == "class_coded_shapes") spec.class_coded_shapes = v.get<bool>();
      else if (key == "geometric_patterns") spec.geometric_patterns = v.get<int>();
      else if (key == "rare_threshold") spec.rare_threshold = v.get<int>();
      else throw ConfigError(origin + ": unknown scene spec key '" + key + "'");
    } catch (const json::exception&) {
      throw ConfigError(origin + ": bad value for scene spec key '" + key + "'");
    }
  }
  spec.validate();
  return spec;
}

SceneSpec load_scene_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene spec " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene_spec(ss.str(), path.string());
}

// ---------------------------------------------------------------------------
// Annotation files

void save_annotations(const fs::path& path, const AnnotationSet& set) {
  auto out = open_out(path);
  out << header_json(kAnnotationFormat, set.vocab).dump() << '\n';
  for (const auto& img : set.images) {
    json rec;
    rec["image_id"] = img.image_id;
    rec["file"] = img.file;
    rec["width"] = img.width;
    rec["height"] = img.height;
    json hois = json::array();
    for (const auto& h : img.hois) {
      json jh;
      jh["human_box"] = box_json(h.human_box);
      jh["object_box"] = box_json(h.object_box);
      jh["object_class"] = h.object_class;
      jh["actions"] = h.actions;
      hois.push_back(std::move(jh));
    }
    rec["hois"] = std::move(hois);
    out << rec.dump() << '\n';
  }
}

AnnotationSet load_annotations(const fs::path& path) {
  LineReader reader(path);
  json header;
  AnnotationSet set;
  set.vocab = read_header(reader, kAnnotationFormat, {}, header);
  json j;
  while (reader.next(j)) {
    Record rec(j, reader.path(), reader.line());
    rec.only({"image_id", "file", "width", "height", "hois"});
    ImageAnnotation img;
    img.image_id = rec.string("image_id");
    img.file = rec.string("file");
    img.width = rec.integer("width");
    img.height = rec.integer("height");
    if (img.width <= 0) rec.fail("width", "must be positive");
    if (img.height <= 0) rec.fail("height", "must be positive");
    const json& hois = rec.req("hois");
    if (!hois.is_array()) rec.fail("hois", "expected an array");
    for (std::size_t i = 0; i < hois.size(); ++i) {
      Record h(hois[i], reader.path(), reader.line(), "hois[" + std::to_string(i) + "].");
      h.only({"human_box", "object_box", "object_class", "actions"});
      HoiInstance inst;
      inst.image_id = img.image_id;
      inst.human_box = h.box("human_box");
      inst.object_box = h.box("object_box");
      inst.object_class = h.integer("object_class");
      inst.actions = h.int_list("actions");
      if (inst.actions.empty()) h.fail("actions", "ground truth needs at least one action");
      check_vocab(h, set.vocab, inst.object_class, inst.actions, "actions");
      img.hois.push_back(std::move(inst));
    }
    set.images.push_back(std::move(img));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Prediction files

void save_predictions(const fs::path& path, const PredictionSet& set) {
  auto out = open_out(path);
  out << header_json(kPredictionFormat, set.vocab).dump() << '\n';
  for (const auto& p : set.predictions) {
    json rec;
    rec["image_id"] = p.image_id;
    rec["human_box"] = box_json(p.human_box);
    rec["object_box"] = box_json(p.object_box);
    rec["object_class"] = p.object_class;
    rec["object_score"] = p.object_score;
    rec["interactive_score"] = p.interactive_score;
    rec["action_scores"] = p.action_scores;
    rec["actions"] = p.actions;
    out << rec.dump() << '\n';
  }
}

PredictionSet load_predictions(const fs::path& path) {
  LineReader reader(path);
  json header;
  PredictionSet set;
  set.vocab = read_header(reader, kPredictionFormat, {}, header);
  json j;
  while (reader.next(j)) {
    Record rec(j, reader.path(), reader.line());
    rec.only({"image_id", "human_box", "object_box", "object_class", "object_score",
              "interactive_score", "action_scores", "actions"});
    HoiInstance p;
    p.image_id = rec.string("image_id");
    p.human_box = rec.box("human_box");
    p.object_box = rec.box("object_box");
    p.object_class = rec.integer("object_class");
    p.object_score = rec.number("object_score");
    p.interactive_score = rec.number("interactive_score");
    p.action_scores = rec.number_list("action_scores");
    p.actions = rec.int_list("actions");
    check_vocab(rec, set.vocab, p.object_class, p.actions, "actions");
    if (static_cast<int>(p.action_scores.size()) != set.vocab.num_action_classes) {
      rec.fail("action_scores", "expected " + std::to_string(set.vocab.num_action_classes) +
                                    " scores, got " + std::to_string(p.action_scores.size()));
    }
    auto in_unit = [](double s) { return s >= 0.0 && s <= 1.0; };
    if (!in_unit(p.object_score)) rec.fail("object_score", "must lie in [0,1]");
    if (!in_unit(p.interactive_score)) rec.fail("interactive_score", "must lie in [0,1]");
    if (!std::all_of(p.action_scores.begin(), p.action_scores.end(), in_unit)) {
      rec.fail("action_scores", "scores must lie in [0,1]");
    }
    set.predictions.push_back(std::move(p));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Class tables

void save_class_table(const fs::path& path, const HoiClassTable& table) {
  auto out = open_out(path);
  json header = header_json(kClassFormat, table.vocab);
  header["rare_threshold"] = table.rare_threshold;
  out << header.dump() << '\n';
  for (const auto& c : table.classes) {
    json rec;
    rec["object_class"] = c.object_class;
    rec["action"] = c.action;
    rec["train_count"] = c.train_count;
    rec["rare"] = c.rare;
    out << rec.dump() << '\n';
  }
}

HoiClassTable load_class_table(const fs::path& path) {
  LineReader reader(path);
  json header;
  HoiClassTable table;
  table.vocab = read_header(reader, kClassFormat, {"rare_threshold"}, header);
  {
    Record h(header, reader.path(), reader.line());
    table.rare_threshold = h.integer("rare_threshold");
  }
  json j;
  while (reader.next(j)) {
    Record rec(j, reader.path(), reader.line());
    rec.only({"object_class", "action", "train_count", "rare"});
    HoiClass c;
    c.object_class = rec.integer("object_class");
    c.action = rec.integer("action");
    c.train_count = rec.int64("train_count");
    c.rare = rec.boolean("rare");
    check_vocab(rec, table.vocab, c.object_class, {c.action}, "action");
    if (c.train_count < 0) rec.fail("train_count", "must be >= 0");
    if (c.rare != (c.train_count < table.rare_threshold)) {
      rec.fail("rare", "flag disagrees with train_count and rare_threshold");
    }
    if (table.index_of(c.object_class, c.action) >= 0) rec.fail("action", "duplicate HOI class");
    table.classes.push_back(c);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Images and dataset directories

void write_ppm(const fs::path& path, const Image& image) {
  auto out = open_out(path);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()),
            static_cast<std::streamsize>(image.rgb.size()));
}

Image read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string(), 0, "<file>", "cannot open image");
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) {
    throw DataError(path.string(), 1, "<header>", "expected an 8-bit binary PPM (P6)");
  }
  in.get();
  Image img{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
  if (!in) throw DataError(path.string(), 1, "<pixels>", "truncated pixel data");
  return img;
}

void save_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir / "images");
  save_annotations(dir / kAnnotationsFile, dataset.annotations);
  save_class_table(dir / kClassesFile, dataset.classes);
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    write_ppm(dir / dataset.annotations.images[i].file, dataset.images[i]);
  }
}

Dataset load_dataset(const fs::path& dir) {
  Dataset ds;
  ds.annotations = load_annotations(dir / kAnnotationsFile);
  if (fs::exists(dir / kClassesFile)) {
    ds.classes = load_class_table(dir / kClassesFile);
  } else {
    ds.classes = build_class_table(ds.annotations);
  }
  for (const auto& img : ds.annotations.images) {
    ds.images.push_back(read_ppm(dir / img.file));
    if (ds.images.back().width != img.width || ds.images.back().height != img.height) {
      throw DataError((dir / img.file).string(), 1, "<header>",
                      "image size disagrees with its annotation record");
    }
  }
  return ds;
}

}  // namespace cdn::data
