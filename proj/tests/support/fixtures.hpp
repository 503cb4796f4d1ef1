#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "cdn/config.hpp"
#include "cdn/dataio.hpp"
#include "cdn/model.hpp"
#include "cdn/postproc.hpp"
#include "cdn/random.hpp"

namespace testsupport {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("cdn_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

/// Desk-scale architecture with the class counts filled in.
inline cdn::ModelConfig desk_model(int objects = 3, int actions = 4) {
  cdn::ModelConfig m = cdn::train::TrainConfig::from_preset("desk").model;
  m.num_object_classes = objects;
  m.num_action_classes = actions;
  return m;
}

/// A much smaller network for tests that differentiate many times.
inline cdn::ModelConfig tiny_model(int objects = 2, int actions = 3) {
  cdn::ModelConfig m;
  m.image_size = 16;
  m.stride = 4;
  m.channels = {4, 8};
  m.hidden_dim = 8;
  m.encoder_layers = 1;
  m.heads = 2;
  m.ffn_dim = 12;
  m.num_queries = 5;
  m.decoder_layers_ho = 2;
  m.decoder_layers_int = 2;
  m.num_object_classes = objects;
  m.num_action_classes = actions;
  return m;
}

inline cdn::data::SceneSpec small_scene(int images, int size = 64) {
  cdn::data::SceneSpec s;
  s.num_images = images;
  s.image_size = size;
  return s;
}

inline cdn::nn::Matrix random_image(int h, int w, cdn::Rng& rng) {
  cdn::nn::Matrix m(h * w, 3);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform();
  return m;
}

inline cdn::Box random_box(cdn::Rng& rng) {
  const double w = rng.uniform(0.05, 0.5), h = rng.uniform(0.05, 0.5);
  return {rng.uniform(w / 2, 1 - w / 2), rng.uniform(h / 2, 1 - h / 2), w, h};
}

/// Random triplets clustered around a few anchor pairs so that suppression
/// actually triggers.
inline std::vector<cdn::postproc::ScoredTriplet> random_triplets(std::size_t n, cdn::Rng& rng,
                                                                 int objects = 2, int actions = 2) {
  std::vector<cdn::Box> anchors_h, anchors_o;
  for (int i = 0; i < 4; ++i) {
    anchors_h.push_back(random_box(rng));
    anchors_o.push_back(random_box(rng));
  }
  auto jitter = [&](cdn::Box b) {
    b.cx += rng.uniform(-0.03, 0.03);
    b.cy += rng.uniform(-0.03, 0.03);
    b.w *= rng.uniform(0.85, 1.15);
    b.h *= rng.uniform(0.85, 1.15);
    return b;
  };
  std::vector<cdn::postproc::ScoredTriplet> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& t = out[i];
    const int a = rng.uniform_int(0, 3);
    t.human_box = jitter(anchors_h[static_cast<std::size_t>(a)]);
    t.object_box = rng.uniform() < 0.8 ? jitter(anchors_o[static_cast<std::size_t>(a)]) : random_box(rng);
    t.query = static_cast<int>(i);
    t.object_class = rng.uniform_int(0, objects - 1);
    t.action = rng.uniform_int(0, actions - 1);
    t.score = rng.uniform();
  }
  return out;
}

}  // namespace testsupport
