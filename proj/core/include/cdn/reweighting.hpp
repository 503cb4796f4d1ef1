#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "cdn/dataio.hpp"
#include "cdn/loss.hpp"

namespace cdn::reweight {

/// Sliding window over the most recent `capacity` samples. A sample is
/// either a positive of some class or a background sample.
class ClassCountQueue {
 public:
  ClassCountQueue(int num_classes, std::size_t capacity);

  /// Appends `labels` in order, then `background_count` background samples,
  /// evicting the oldest samples beyond capacity. Throws std::out_of_range
  /// for a label outside [0, num_classes).
  void push(std::span<const int> labels, std::int64_t background_count);

  /// Drops the oldest sample, if any.
  void evict_oldest();

  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t background() const { return background_; }
  std::size_t fill() const { return window_.size(); }
  std::size_t capacity() const { return capacity_; }
  int num_classes() const { return static_cast<int>(counts_.size()); }

 private:
  static constexpr int kBackground = -1;
  void push_one(int label);

  std::size_t capacity_;
  std::vector<std::int64_t> counts_;
  std::int64_t background_ = 0;
  std::deque<int> window_;
};

enum class WeightKind { kStatic, kDynamic, kBlended };

struct WeightVector {
  std::vector<double> weights;
  double background = 1.0;
  double exponent = 0.0;
  WeightKind kind = WeightKind::kStatic;
};

/// w_i = (sum_j N_j / N_i)^p and w_bg = (sum_j N_j / N_bg)^p, where the sum
/// runs over the positive classes only.
///
/// A zero count (class or background) takes the fallback's entry; without a
/// fallback that throws std::domain_error. Throws std::domain_error for an
/// empty queue.
WeightVector dynamic_weights(const ClassCountQueue& queue, double p,
                             const WeightVector* fallback = nullptr);

/// Same formula over fixed counts. Zero counts get weight 1.
WeightVector weights_from_counts(std::span<const std::int64_t> counts, std::int64_t background,
                                 double p);

/// gamma = min(0.999^n, 0.9).
double smoothing_factor(std::size_t n);

/// gamma * static + (1 - gamma) * dynamic with gamma = smoothing_factor(n).
/// Throws std::invalid_argument on length mismatch.
WeightVector blend(const WeightVector& static_w, const WeightVector& dynamic_w, std::size_t n);

/// Whole-training-set counts. Background samples are the queries left
/// unmatched: num_queries - #GT per image.
struct DatasetCounts {
  std::vector<std::int64_t> object;
  std::int64_t object_background = 0;
  std::vector<std::int64_t> action;
  std::int64_t action_background = 0;
  /// Samples pushed into each queue per epoch (positives + background).
  std::int64_t object_samples() const;
  std::int64_t action_samples() const;
};

DatasetCounts count_dataset(const data::AnnotationSet& train, int num_queries);

struct StaticWeights {
  WeightVector object;
  WeightVector action;
};

StaticWeights static_weights(const data::AnnotationSet& train, double p_object, double p_action,
                             int num_queries);

/// Which count the smoothing factor's exponent uses.
enum class GammaMode { kFill, kCapacity };

struct ReweightConfig {
  double p_object = 0.7;
  double p_action = 0.7;
  /// Queue lengths; 0 selects twice the per-epoch sample count.
  std::int64_t queue_length_object = 0;
  std::int64_t queue_length_action = 0;
  bool reweight_objects = true;
  bool reweight_actions = true;
  GammaMode gamma_mode = GammaMode::kFill;

  friend bool operator==(const ReweightConfig&, const ReweightConfig&) = default;
};

/// Queue state and weight schedule for decoupled fine-tuning.
class DynamicReweighter {
 public:
  DynamicReweighter(const ReweightConfig& config, const data::AnnotationSet& train,
                    int num_queries);

  /// Records one iteration: GT object classes, GT action labels and the
  /// number of unmatched queries.
  void observe(std::span<const int> object_labels, std::span<const int> action_labels,
               std::int64_t unmatched_queries);

  /// Loss multipliers for the next loss evaluation.
  loss::ClassWeights current() const;

  const ClassCountQueue& object_queue() const { return object_queue_; }
  const ClassCountQueue& action_queue() const { return action_queue_; }
  const StaticWeights& statics() const { return static_; }

 private:
  WeightVector blended(const ClassCountQueue& q, const WeightVector& stat, double p) const;

  ReweightConfig config_;
  StaticWeights static_;
  ClassCountQueue object_queue_;
  ClassCountQueue action_queue_;
};

}  // namespace cdn::reweight
