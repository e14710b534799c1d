#include "lbap/grounding.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "lbap/errors.hpp"
#include "lbap/text.hpp"

namespace lbap {

void GroundingConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvariantViolation("epsilon", "must lie in (0,1)");
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) throw InvariantViolation("iou_threshold", "must lie in (0,1]");
}

double iou(const Box& a, const Box& b) {
  const double area_a = a.area();
  const double area_b = b.area();
  if (area_a <= 0.0 && area_b <= 0.0) throw ZeroArea();
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double inter = w * h;
  return inter / (area_a + area_b - inter);
}

double ground_textual(const CandidateAction& candidate, const SceneContext& scene, const GroundingConfig& cfg) {
  for (const auto& o : candidate.mentioned_objects) {
    if (!scene.contains(o)) return cfg.epsilon;
  }
  return 1.0;
}

namespace {

Detection lookup(const ObjectRef& o, const SceneContext& scene, const DetectionOracle* detector) {
  if (const Detection* d = scene.detection_for(o)) return *d;
  if (detector == nullptr) {
    throw DetectorUnavailable("perception grounding needs a detection for '" + o.canonical_name() +
                              "' but no detector is configured");
  }
  return detector->detect(o, scene);
}

}  // namespace

double ground_perception(const CandidateAction& candidate, const SceneContext& scene,
                         const DetectionOracle* detector, const GroundingConfig& cfg) {
  double product = 1.0;
  for (const auto& mentioned : candidate.mentioned_objects) {
    const Detection d = lookup(mentioned, scene, detector);
    for (const auto& other : scene.objects) {
      if (other == mentioned) continue;
      const Detection od = lookup(other, scene, detector);
      if (d.box.area() <= 0.0 && od.box.area() <= 0.0) continue;
      if (iou(d.box, od.box) >= cfg.iou_threshold) return cfg.epsilon;
    }
    product *= d.score;
  }
  // keeps the result inside (0,1] when a detector reports a hard zero
  return std::max(product, std::numeric_limits<double>::min());
}

// --- simulated detector ---------------------------------------------------------------

SimulatedDetector::SimulatedDetector(SimulatedDetectorConfig cfg) : cfg_(cfg) {}

namespace {

constexpr int kGrid = 4;
constexpr double kCell = 1.0 / kGrid;

double sample_beta(std::mt19937_64& rng, BetaParams p) {
  std::gamma_distribution<double> ga(p.alpha, 1.0);
  std::gamma_distribution<double> gb(p.beta, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return std::clamp(x / (x + y), 0.0, 1.0);
}

Box cell_box(std::size_t cell, std::mt19937_64& rng) {
  const auto c = static_cast<int>(std::min<std::size_t>(cell, kGrid * kGrid - 1));
  std::uniform_real_distribution<double> inset(0.02, 0.05);
  const double x0 = (c % kGrid) * kCell;
  const double y0 = (c / kGrid) * kCell;
  return Box{x0 + inset(rng), y0 + inset(rng), x0 + kCell - inset(rng), y0 + kCell - inset(rng)};
}

std::uint64_t scene_key(const SceneContext& scene) {
  std::uint64_t h = text::fnv1a(scene.description);
  for (const auto& o : scene.objects) h = text::fnv1a(o.canonical_name(), text::fnv1a("|", h));
  return h;
}

}  // namespace

Detection SimulatedDetector::detect(const ObjectRef& object, const SceneContext& scene) const {
  const std::uint64_t skey = scene_key(scene);
  std::mt19937_64 rng(text::mix(text::mix(cfg_.seed, skey), text::fnv1a(object.canonical_name())));

  const auto it = std::find(scene.objects.begin(), scene.objects.end(), object);
  if (it != scene.objects.end()) {
    const auto index = static_cast<std::size_t>(it - scene.objects.begin());
    std::mt19937_64 box_rng(text::mix(skey, index));
    return Detection{object, cell_box(index, box_rng), sample_beta(rng, cfg_.present)};
  }

  const double score = sample_beta(rng, cfg_.absent);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (!scene.objects.empty() && coin(rng) < cfg_.duplicate_probability) {
    std::uniform_int_distribution<std::size_t> pick(0, scene.objects.size() - 1);
    const std::size_t target = pick(rng);
    std::mt19937_64 box_rng(text::mix(skey, target));
    Box b = cell_box(target, box_rng);
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    b.x_min = std::clamp(b.x_min + jitter(rng), 0.0, 1.0);
    b.x_max = std::clamp(b.x_max + jitter(rng), b.x_min, 1.0);
    b.y_min = std::clamp(b.y_min + jitter(rng), 0.0, 1.0);
    b.y_max = std::clamp(b.y_max + jitter(rng), b.y_min, 1.0);
    return Detection{object, b, score};
  }
  return Detection{object, cell_box(scene.objects.size(), rng), score};
}

}  // namespace lbap
