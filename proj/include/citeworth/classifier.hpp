#pragma once

// One trained model of any family plus the preprocessing it needs, with
// artifact round-tripping. Inference is const and safe to share across threads.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeworth/artifact.hpp"
#include "citeworth/features.hpp"
#include "citeworth/linear.hpp"
#include "citeworth/neural.hpp"

namespace citeworth::model {

enum class Family { Enlr, Rf, Neural };

std::string_view to_string(Family f);
Family family_from_string(std::string_view s);

class Classifier {
 public:
  static Classifier from_enlr(features::FeaturePipeline pipeline, linear::EnlrModel model);
  static Classifier from_rf(features::FeaturePipeline pipeline, linear::RfModel model);
  static Classifier from_neural(neural::NeuralModel model);

  Family family() const { return family_; }
  bool contextual() const;
  /// Attention score function name for the neural family, "none" otherwise.
  std::string attention_variant() const;

  /// P(citing) for one context.
  double predict_proba(const features::ContextBundle& bundle,
                       features::FlagPolicy flags = features::FlagPolicy::FromLabels) const;
  std::vector<double> predict_proba(std::span<const features::ContextBundle> bundles,
                                    features::FlagPolicy flags = features::FlagPolicy::FromLabels) const;

  const features::FeaturePipeline& pipeline() const;
  const linear::EnlrModel& enlr() const;
  const linear::RfModel& rf() const;
  const neural::NeuralModel& neural() const;

  /// Free-form metadata stored under header["training"].
  nlohmann::json training_info = nlohmann::json::object();

  artifact::Artifact to_artifact() const;
  /// Throws Error{BadArtifact} when the header is inconsistent with the
  /// tensors (including vocabulary hash mismatches).
  static Classifier from_artifact(const artifact::Artifact& a);

  void save(const std::filesystem::path& path) const;
  static Classifier load(const std::filesystem::path& path);

  /// The artifact header this model writes (and, after load, was read from).
  nlohmann::json header() const;

 private:
  Family family_ = Family::Enlr;
  std::optional<features::FeaturePipeline> pipeline_;
  std::optional<linear::EnlrModel> enlr_;
  std::optional<linear::RfModel> rf_;
  std::optional<neural::NeuralModel> neural_;
};

}  // namespace citeworth::model
