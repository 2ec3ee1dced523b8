#pragma once

// Inference over draft text: segment, strip hints, clean, link neighbors and
// score. Shared by the CLI and the HTTP service so both produce the same
// probabilities for the same input.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "citeworth/classifier.hpp"

namespace citeworth::predict {

struct InputSentence {
  std::string text;
  std::optional<std::string> section_type;
};

struct PredictOptions {
  double threshold = 0.5;
  // Supply previous/next sentences to the model.
  bool contextual = true;
  // Second pass feeds first-pass decisions back in as neighbor citation flags.
  bool two_pass = false;
  std::string default_section;
};

struct Prediction {
  std::string text;  // after hint stripping and cleaning
  std::string section_type;
  double probability = 0.0;
  bool worthy = false;  // probability >= threshold
};

/// Segments raw text into sentences (blank lines separate paragraphs).
std::vector<InputSentence> split_raw_text(std::string_view raw);

/// Sentences left without any token after cleaning get probability 0.
/// Throws Error{InvalidArgument} for a threshold outside (0, 1).
std::vector<Prediction> predict_sentences(const model::Classifier& model,
                                          const std::vector<InputSentence>& sentences,
                                          const PredictOptions& options = {});

}  // namespace citeworth::predict
