#include "cdn/reweighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cdn::reweight {

ClassCountQueue::ClassCountQueue(int num_classes, std::size_t capacity)
    : capacity_(capacity), counts_(static_cast<std::size_t>(num_classes), 0) {
  if (num_classes < 1) throw std::invalid_argument("ClassCountQueue: need at least one class");
  if (capacity == 0) throw std::invalid_argument("ClassCountQueue: capacity must be positive");
}

void ClassCountQueue::push_one(int label) {
  window_.push_back(label);
  if (label == kBackground) {
    ++background_;
  } else {
    ++counts_[static_cast<std::size_t>(label)];
  }
  if (window_.size() > capacity_) evict_oldest();
}

void ClassCountQueue::evict_oldest() {
  if (window_.empty()) return;
  const int old = window_.front();
  window_.pop_front();
  if (old == kBackground) {
    --background_;
  } else {
    --counts_[static_cast<std::size_t>(old)];
  }
}

void ClassCountQueue::push(std::span<const int> labels, std::int64_t background_count) {
  for (int l : labels) {
    if (l < 0 || l >= num_classes()) {
      throw std::out_of_range("ClassCountQueue::push: label " + std::to_string(l) +
                              " outside [0," + std::to_string(num_classes()) + ")");
    }
  }
  if (background_count < 0) throw std::out_of_range("ClassCountQueue::push: negative background");
  for (int l : labels) push_one(l);
  for (std::int64_t i = 0; i < background_count; ++i) push_one(kBackground);
}

WeightVector dynamic_weights(const ClassCountQueue& queue, double p, const WeightVector* fallback) {
  if (queue.fill() == 0) throw std::domain_error("dynamic_weights: empty queue");
  const auto& counts = queue.counts();
  double total = 0.0;
  for (auto n : counts) total += static_cast<double>(n);

  auto pick_fallback = [&](std::size_t i, bool background) {
    if (fallback == nullptr) {
      throw std::domain_error("dynamic_weights: zero count without a fallback weight");
    }
    return background ? fallback->background : fallback->weights.at(i);
  };

  WeightVector w;
  w.exponent = p;
  w.kind = WeightKind::kDynamic;
  w.weights.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    w.weights[i] = (counts[i] > 0 && total > 0.0)
                       ? std::pow(total / static_cast<double>(counts[i]), p)
                       : pick_fallback(i, false);
  }
  w.background = (queue.background() > 0 && total > 0.0)
                     ? std::pow(total / static_cast<double>(queue.background()), p)
                     : pick_fallback(0, true);
  return w;
}

WeightVector weights_from_counts(std::span<const std::int64_t> counts, std::int64_t background,
                                 double p) {
  double total = 0.0;
  for (auto n : counts) total += static_cast<double>(n);
  WeightVector w;
  w.exponent = p;
  w.kind = WeightKind::kStatic;
  for (auto n : counts) {
    w.weights.push_back(n > 0 && total > 0.0 ? std::pow(total / static_cast<double>(n), p) : 1.0);
  }
  w.background =
      background > 0 && total > 0.0 ? std::pow(total / static_cast<double>(background), p) : 1.0;
  return w;
}

double smoothing_factor(std::size_t n) {
  return std::min(std::pow(0.999, static_cast<double>(n)), 0.9);
}

WeightVector blend(const WeightVector& static_w, const WeightVector& dynamic_w, std::size_t n) {
  if (static_w.weights.size() != dynamic_w.weights.size()) {
    throw std::invalid_argument("blend: weight vectors differ in length");
  }
  const double gamma = smoothing_factor(n);
  WeightVector w;
  w.exponent = dynamic_w.exponent;
  w.kind = WeightKind::kBlended;
  w.weights.resize(static_w.weights.size());
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    w.weights[i] = gamma * static_w.weights[i] + (1.0 - gamma) * dynamic_w.weights[i];
  }
  w.background = gamma * static_w.background + (1.0 - gamma) * dynamic_w.background;
  return w;
}

std::int64_t DatasetCounts::object_samples() const {
  std::int64_t n = object_background;
  for (auto c : object) n += c;
  return n;
}

std::int64_t DatasetCounts::action_samples() const {
  std::int64_t n = action_background;
  for (auto c : action) n += c;
  return n;
}

DatasetCounts count_dataset(const data::AnnotationSet& train, int num_queries) {
  DatasetCounts c;
  c.object.assign(static_cast<std::size_t>(train.vocab.num_object_classes), 0);
  c.action.assign(static_cast<std::size_t>(train.vocab.num_action_classes), 0);
  for (const auto& img : train.images) {
    for (const auto& h : img.hois) {
      ++c.object[static_cast<std::size_t>(h.object_class)];
      for (int a : h.actions) ++c.action[static_cast<std::size_t>(a)];
    }
    const auto unmatched =
        std::max<std::int64_t>(0, num_queries - static_cast<std::int64_t>(img.hois.size()));
    c.object_background += unmatched;
    c.action_background += unmatched;
  }
  return c;
}

StaticWeights static_weights(const data::AnnotationSet& train, double p_object, double p_action,
                             int num_queries) {
  const auto c = count_dataset(train, num_queries);
  return {weights_from_counts(c.object, c.object_background, p_object),
          weights_from_counts(c.action, c.action_background, p_action)};
}

namespace {

std::size_t queue_length(std::int64_t configured, std::int64_t samples_per_epoch) {
  if (configured > 0) return static_cast<std::size_t>(configured);
  return static_cast<std::size_t>(std::max<std::int64_t>(1, 2 * samples_per_epoch));
}

}  // namespace

DynamicReweighter::DynamicReweighter(const ReweightConfig& config,
                                     const data::AnnotationSet& train, int num_queries)
    : config_(config),
      static_(static_weights(train, config.p_object, config.p_action, num_queries)),
      object_queue_(train.vocab.num_object_classes,
                    queue_length(config.queue_length_object,
                                 count_dataset(train, num_queries).object_samples())),
      action_queue_(train.vocab.num_action_classes,
                    queue_length(config.queue_length_action,
                                 count_dataset(train, num_queries).action_samples())) {}

void DynamicReweighter::observe(std::span<const int> object_labels,
                                std::span<const int> action_labels,
                                std::int64_t unmatched_queries) {
  object_queue_.push(object_labels, unmatched_queries);
  action_queue_.push(action_labels, unmatched_queries);
}

WeightVector DynamicReweighter::blended(const ClassCountQueue& q, const WeightVector& stat,
                                        double p) const {
  if (q.fill() == 0) return stat;
  const WeightVector dyn = dynamic_weights(q, p, &stat);
  const std::size_t n = config_.gamma_mode == GammaMode::kFill ? q.fill() : q.capacity();
  return blend(stat, dyn, n);
}

loss::ClassWeights DynamicReweighter::current() const {
  loss::ClassWeights cw = loss::ClassWeights::uniform(object_queue_.num_classes(),
                                                      action_queue_.num_classes());
  if (config_.reweight_objects) {
    const auto w = blended(object_queue_, static_.object, config_.p_object);
    for (std::size_t i = 0; i < w.weights.size(); ++i) cw.object[i] = w.weights[i];
    cw.object.back() = w.background;
  }
  if (config_.reweight_actions) {
    const auto w = blended(action_queue_, static_.action, config_.p_action);
    cw.action = w.weights;
    cw.action_background = w.background;
  }
  return cw;
}

}  // namespace cdn::reweight
