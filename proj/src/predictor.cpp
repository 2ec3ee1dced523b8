#include "citeworth/predictor.hpp"

#include "citeworth/corpus.hpp"
#include "citeworth/error.hpp"
#include "citeworth/text_util.hpp"
#include "citeworth/textrep.hpp"

namespace citeworth::predict {

std::vector<InputSentence> split_raw_text(std::string_view raw) {
  std::vector<InputSentence> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    // paragraph = run of lines up to a blank line
    std::size_t end = raw.find("\n\n", pos);
    std::size_t next = end;
    if (end == std::string_view::npos) {
      end = raw.size();
      next = raw.size() + 1;
    } else {
      next = end + 2;
    }
    const std::string para = normalize_space(raw.substr(pos, end - pos));
    if (!para.empty()) {
      for (auto& s : corpus::segment_sentences(para)) out.push_back({std::move(s), std::nullopt});
    }
    pos = next;
  }
  return out;
}

namespace {

std::vector<features::ContextBundle> bundles_for(const std::vector<corpus::LabeledSentence>& live,
                                                 bool contextual) {
  std::vector<features::ContextBundle> out;
  out.reserve(live.size());
  for (std::size_t i = 0; i < live.size(); ++i) {
    features::ContextBundle b;
    b.cur_sentence = live[i];
    b.section_type = live[i].section_type;
    if (contextual && i > 0) b.prev_sentence = live[i - 1];
    if (contextual && i + 1 < live.size()) b.next_sentence = live[i + 1];
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace

std::vector<Prediction> predict_sentences(const model::Classifier& model,
                                          const std::vector<InputSentence>& sentences,
                                          const PredictOptions& options) {
  if (!(options.threshold > 0.0 && options.threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in (0, 1)");
  }
  std::vector<Prediction> out(sentences.size());
  std::vector<corpus::LabeledSentence> live;
  std::vector<std::size_t> where;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    auto& p = out[i];
    p.text = corpus::clean_sentence(corpus::strip_citation_hints(normalize_space(sentences[i].text)));
    p.section_type = sentences[i].section_type.value_or(options.default_section);
    if (textrep::tokenize(p.text).empty()) continue;
    corpus::LabeledSentence s;
    s.id = "input#" + std::to_string(i);
    s.article_id = "input";
    s.text = p.text;
    s.section_type = p.section_type;
    s.char_len = char_length(s.text);
    s.word_len = word_length(s.text);
    live.push_back(std::move(s));
    where.push_back(i);
  }

  auto bundles = bundles_for(live, options.contextual);
  auto probs = model.predict_proba(bundles, features::FlagPolicy::Zero);
  if (options.two_pass && options.contextual) {
    for (std::size_t k = 0; k < live.size(); ++k) live[k].label = probs[k] >= options.threshold;
    bundles = bundles_for(live, true);
    probs = model.predict_proba(bundles, features::FlagPolicy::FromLabels);
  }
  for (std::size_t k = 0; k < live.size(); ++k) {
    out[where[k]].probability = probs[k];
    out[where[k]].worthy = probs[k] >= options.threshold;
  }
  return out;
}

}  // namespace citeworth::predict
