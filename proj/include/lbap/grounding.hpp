#pragma once

#include <cstdint>

#include "lbap/domain.hpp"

namespace lbap {

enum class GroundingMode { Textual, Perception };

struct GroundingConfig {
  double epsilon = 1e-3;
  GroundingMode mode = GroundingMode::Textual;
  double iou_threshold = 0.5;

  void validate() const;
};

// Intersection over union of two normalized boxes; 0 when disjoint.
// Throws ZeroArea when both boxes are degenerate.
double iou(const Box& a, const Box& b);

// 1 when every mentioned object is in the scene's object set, epsilon
// otherwise. An action mentioning no objects is grounded.
double ground_textual(const CandidateAction& candidate, const SceneContext& scene, const GroundingConfig& cfg);

// Scores open-vocabulary (object, scene) pairs with a box and a confidence.
// Must be safe to call concurrently.
class DetectionOracle {
public:
  virtual ~DetectionOracle() = default;
  [[nodiscard]] virtual Detection detect(const ObjectRef& object, const SceneContext& scene) const = 0;
};

// Product of per-object detection scores. When a mentioned object's box
// overlaps a different scene object's box with IoU >= iou_threshold, the
// whole score becomes epsilon. Scene-supplied detections take precedence over
// the oracle. Throws DetectorUnavailable when a score is needed and neither
// source has one.
double ground_perception(const CandidateAction& candidate, const SceneContext& scene,
                         const DetectionOracle* detector, const GroundingConfig& cfg);

struct BetaParams {
  double alpha = 1.0;
  double beta = 1.0;
};

struct SimulatedDetectorConfig {
  BetaParams present{8.0, 1.5};  // objects in the scene
  BetaParams absent{1.5, 6.0};   // objects the scene does not contain
  double duplicate_probability = 0.3;
  std::uint64_t seed = 0;
};

// Seeded stand-in for a vision-language detector. Scene objects sit in
// disjoint grid cells; an absent object is either placed in an empty cell or,
// with duplicate_probability, localized onto one of the scene objects.
// Deterministic in (seed, scene, object).
class SimulatedDetector final : public DetectionOracle {
public:
  explicit SimulatedDetector(SimulatedDetectorConfig cfg);
  [[nodiscard]] Detection detect(const ObjectRef& object, const SceneContext& scene) const override;

private:
  SimulatedDetectorConfig cfg_;
};

}  // namespace lbap
