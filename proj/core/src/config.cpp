#include "cdn/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cdn/error.hpp"
#include "json.hpp"

namespace cdn {

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (channels.empty()) fail("channels must name at least one conv block");
  for (int c : channels) {
    if (c < 1) fail("channel counts must be positive");
  }
  if (stride != (1 << channels.size())) {
    fail("stride " + std::to_string(stride) + " must equal 2^" + std::to_string(channels.size()) +
         " (one stride-2 block per channel entry)");
  }
  if (image_size < stride || image_size % stride != 0) {
    fail("image_size must be a positive multiple of the stride");
  }
  if (hidden_dim < 4 || hidden_dim % 4 != 0) fail("D_c must be a positive multiple of 4");
  if (heads < 1 || hidden_dim % heads != 0) fail("D_c must be divisible by heads");
  if (ffn_dim < 1) fail("ffn_dim must be positive");
  if (encoder_layers < 0) fail("encoder_layers must be >= 0");
  if (num_queries < 1) fail("N_d must be >= 1");
  if (decoder_layers_ho < 1 || decoder_layers_int < 1) fail("decoders need at least one layer");
  if (num_object_classes < 1 || num_action_classes < 1) {
    fail("class counts must be >= 1 (set them or take them from the dataset)");
  }
}

namespace train {

using nlohmann::json;

const char* phase_name(Phase p) { return p == Phase::kMain ? "main" : "decouple"; }

TrainConfig TrainConfig::from_preset(const std::string& name) {
  TrainConfig c;
  c.preset = name;
  if (name == "desk") return c;
  if (name == "cdn-s" || name == "cdn-b") {
    const int dec = name == "cdn-s" ? 3 : 6;
    c.model.image_size = 512;
    c.model.stride = 32;
    c.model.channels = {64, 256, 512, 1024, 2048};
    c.model.hidden_dim = 256;
    c.model.encoder_layers = 6;
    c.model.heads = 8;
    c.model.ffn_dim = 2048;
    c.model.num_queries = 64;
    c.model.decoder_layers_ho = dec;
    c.model.decoder_layers_int = dec;
    c.epochs_main = 90;
    c.lr_main = 1e-4;
    c.lr_drop_epoch = 60;
    c.epochs_decouple = 10;
    c.lr_decouple = 1e-5;
    c.weight_decay = 1e-4;
    c.batch_size = 16;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected desk, cdn-s or cdn-b)");
}

double TrainConfig::learning_rate(Phase phase, int epoch) const {
  if (phase == Phase::kDecouple) return lr_decouple;
  return (lr_drop_epoch > 0 && epoch >= lr_drop_epoch) ? lr_main / 10.0 : lr_main;
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  pnms.validate();
  if (epochs_main < 0 || epochs_decouple < 0) throw ConfigError("epoch counts must be >= 0");
  if (!(lr_main > 0.0) || !(lr_decouple > 0.0)) throw ConfigError("learning rates must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
  if (!(reweight.p_object >= 0.0) || !(reweight.p_action >= 0.0)) {
    throw ConfigError("re-weighting exponents must be >= 0");
  }
  if (reweight.queue_length_object < 0 || reweight.queue_length_action < 0) {
    throw ConfigError("queue lengths must be >= 0");
  }
}

namespace {

json model_json(const ModelConfig& m) {
  return json{{"image_size", m.image_size},
              {"stride", m.stride},
              {"channels", m.channels},
              {"D_c", m.hidden_dim},
              {"encoder_layers", m.encoder_layers},
              {"heads", m.heads},
              {"ffn_dim", m.ffn_dim},
              {"N_d", m.num_queries},
              {"decoder_layers_ho", m.decoder_layers_ho},
              {"decoder_layers_int", m.decoder_layers_int},
              {"num_object_classes", m.num_object_classes},
              {"num_action_classes", m.num_action_classes}};
}

/// Applies `section`'s keys through `setters`, rejecting unknown ones.
template <typename Setter>
void apply_section(const json& root, const char* name, const std::string& origin, Setter&& set) {
  auto it = root.find(name);
  if (it == root.end()) return;
  if (!it->is_object()) throw ConfigError(origin + ": section '" + name + "' must be an object");
  for (const auto& [key, value] : it->items()) {
    try {
      if (!set(key, value)) {
        throw ConfigError(origin + ": unknown key '" + std::string(name) + "." + key + "'");
      }
    } catch (const json::exception&) {
      throw ConfigError(origin + ": bad value for '" + std::string(name) + "." + key + "'");
    }
  }
}

}  // namespace

std::string TrainConfig::model_fingerprint() const {
  const std::string canon = model_json(model).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : canon) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainConfig parse_config(const std::string& json_text, const std::string& origin) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": invalid JSON: " + e.what());
  }
  if (!root.is_object()) throw ConfigError(origin + ": config must be a JSON object");
  for (const auto& [key, _] : root.items()) {
    static const char* kSections[] = {"preset", "model", "train", "loss", "reweight", "postproc"};
    if (std::none_of(std::begin(kSections), std::end(kSections),
                     [&](const char* s) { return key == s; })) {
      throw ConfigError(origin + ": unknown section '" + key + "'");
    }
  }
  std::string preset = "desk";
  if (root.contains("preset")) {
    if (!root["preset"].is_string()) throw ConfigError(origin + ": preset must be a string");
    preset = root["preset"].get<std::string>();
  }
  TrainConfig c = TrainConfig::from_preset(preset);

  apply_section(root, "model", origin, [&](const std::string& k, const json& v) {
    auto& m = c.model;
    if (k == "image_size") m.image_size = v.get<int>();
    else if (k == "stride") m.stride = v.get<int>();
    else if (k == "channels") m.channels = v.get<std::vector<int>>();
    else if (k == "D_c") m.hidden_dim = v.get<int>();
    else if (k == "C_q") v.get<int>();  // reconciled with D_c below
    else if (k == "encoder_layers") m.encoder_layers = v.get<int>();
    else if (k == "heads") m.heads = v.get<int>();
    else if (k == "ffn_dim") m.ffn_dim = v.get<int>();
    else if (k == "N_d") m.num_queries = v.get<int>();
    else if (k == "decoder_layers_ho") m.decoder_layers_ho = v.get<int>();
    else if (k == "decoder_layers_int") m.decoder_layers_int = v.get<int>();
    else if (k == "num_object_classes") m.num_object_classes = v.get<int>();
    else if (k == "num_action_classes") m.num_action_classes = v.get<int>();
    else return false;
    return true;
  });
  if (root.contains("model") && root["model"].contains("C_q")) {
    const int cq = root["model"]["C_q"].get<int>();
    if (!root["model"].contains("D_c")) c.model.hidden_dim = cq;
    else if (cq != c.model.hidden_dim) throw ConfigError(origin + ": C_q must equal D_c");
  }
  apply_section(root, "train", origin, [&](const std::string& k, const json& v) {
    if (k == "epochs_main") c.epochs_main = v.get<int>();
    else if (k == "epochs_decouple") c.epochs_decouple = v.get<int>();
    else if (k == "lr_main") c.lr_main = v.get<double>();
    else if (k == "lr_decouple") c.lr_decouple = v.get<double>();
    else if (k == "lr_drop_epoch") c.lr_drop_epoch = v.get<int>();
    else if (k == "weight_decay") c.weight_decay = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<int>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "grad_clip") c.grad_clip = v.get<double>();
    else return false;
    return true;
  });
  apply_section(root, "loss", origin, [&](const std::string& k, const json& v) {
    if (k == "lambda_b") c.loss.box = v.get<double>();
    else if (k == "lambda_giou") c.loss.giou = v.get<double>();
    else if (k == "lambda_p") c.loss.interactive = v.get<double>();
    else if (k == "lambda_o") c.loss.object = v.get<double>();
    else if (k == "lambda_a") c.loss.action = v.get<double>();
    else return false;
    return true;
  });
  apply_section(root, "reweight", origin, [&](const std::string& k, const json& v) {
    auto& r = c.reweight;
    if (k == "p_o") r.p_object = v.get<double>();
    else if (k == "p_a") r.p_action = v.get<double>();
    else if (k == "L_Q_o") r.queue_length_object = v.get<std::int64_t>();
    else if (k == "L_Q_a") r.queue_length_action = v.get<std::int64_t>();
    else if (k == "reweight_objects") r.reweight_objects = v.get<bool>();
    else if (k == "reweight_actions") r.reweight_actions = v.get<bool>();
    else if (k == "gamma_mode") {
      const auto mode = v.get<std::string>();
      if (mode == "fill") r.gamma_mode = reweight::GammaMode::kFill;
      else if (mode == "capacity") r.gamma_mode = reweight::GammaMode::kCapacity;
      else throw ConfigError(origin + ": gamma_mode must be 'fill' or 'capacity'");
    } else return false;
    return true;
  });
  apply_section(root, "postproc", origin, [&](const std::string& k, const json& v) {
    auto& p = c.pnms;
    if (k == "pnms_alpha") p.alpha = v.get<double>();
    else if (k == "pnms_beta") p.beta = v.get<double>();
    else if (k == "pnms_threshold") p.threshold = v.get<double>();
    else if (k == "top_k") p.top_k = v.get<int>();
    else if (k == "argmax_only") p.argmax_only = v.get<bool>();
    else if (k == "class_agnostic_pnms") p.class_agnostic = v.get<bool>();
    else if (k == "enable_pnms") p.enabled = v.get<bool>();
    else return false;
    return true;
  });
  return c;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string to_json(const TrainConfig& c) {
  json root;
  root["preset"] = c.preset;
  root["model"] = model_json(c.model);
  root["train"] = {{"epochs_main", c.epochs_main},       {"epochs_decouple", c.epochs_decouple},
                   {"lr_main", c.lr_main},               {"lr_decouple", c.lr_decouple},
                   {"lr_drop_epoch", c.lr_drop_epoch},   {"weight_decay", c.weight_decay},
                   {"batch_size", c.batch_size},         {"seed", c.seed},
                   {"grad_clip", c.grad_clip}};
  root["loss"] = {{"lambda_b", c.loss.box},
                  {"lambda_giou", c.loss.giou},
                  {"lambda_p", c.loss.interactive},
                  {"lambda_o", c.loss.object},
                  {"lambda_a", c.loss.action}};
  root["reweight"] = {
      {"p_o", c.reweight.p_object},
      {"p_a", c.reweight.p_action},
      {"L_Q_o", c.reweight.queue_length_object},
      {"L_Q_a", c.reweight.queue_length_action},
      {"reweight_objects", c.reweight.reweight_objects},
      {"reweight_actions", c.reweight.reweight_actions},
      {"gamma_mode", c.reweight.gamma_mode == reweight::GammaMode::kFill ? "fill" : "capacity"}};
  root["postproc"] = {{"pnms_alpha", c.pnms.alpha},
                      {"pnms_beta", c.pnms.beta},
                      {"pnms_threshold", c.pnms.threshold},
                      {"top_k", c.pnms.top_k},
                      {"argmax_only", c.pnms.argmax_only},
                      {"class_agnostic_pnms", c.pnms.class_agnostic},
                      {"enable_pnms", c.pnms.enabled}};
  return root.dump(2);
}

}  // namespace train
}  // namespace cdn
