#include <algorithm>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <expat.h>
#include <zlib.h>

#include "citeworth/corpus.hpp"
#include "citeworth/error.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::corpus {

namespace {

// Containers whose paragraphs are not running article text.
bool is_excluded_container(std::string_view name) {
  static constexpr std::string_view kExcluded[] = {
      "fig",  "table-wrap", "ref-list", "supplementary-material", "fn-group", "back",
      "caption", "table", "disp-formula", "ack", "trans-abstract", "sub-article"};
  return std::find(std::begin(kExcluded), std::end(kExcluded), name) != std::end(kExcluded);
}

std::string_view attribute(const XML_Char** atts, std::string_view key) {
  for (std::size_t i = 0; atts[i] != nullptr; i += 2) {
    if (key == atts[i]) return atts[i + 1];
  }
  return {};
}

struct SecFrame {
  std::string explicit_type;
  std::string title;
  std::string inherited_type;  // resolved type of the enclosing sec, if any
  int section_index = -1;      // index into ArticleTree::sections once used
};

class JatsBuilder {
 public:
  explicit JatsBuilder(std::string_view fallback_id) { article_.article_id = fallback_id; }

  void start(const XML_Char* name_c, const XML_Char** atts) {
    const std::string_view name(name_c);
    path_.emplace_back(name);

    if (name == "front") ++front_depth_;
    if (name == "abstract" && front_depth_ > 0) {
      ++abstract_depth_;
      if (abstract_depth_ == 1) abstract_section_ = -1;
    }
    if (is_excluded_container(name)) ++excluded_depth_;

    if (name == "article-id" && front_depth_ > 0) {
      capturing_id_ = true;
      id_buffer_.clear();
      id_is_pmc_ = attribute(atts, "pub-id-type") == "pmc";
    }

    if (name == "sec" && excluded_depth_ == 0) {
      SecFrame frame;
      frame.explicit_type = normalize_space(attribute(atts, "sec-type"));
      if (!secs_.empty()) frame.inherited_type = resolved_type(secs_.back());
      secs_.push_back(std::move(frame));
    }

    if (name == "title" && path_.size() >= 2 && path_[path_.size() - 2] == "sec" &&
        !secs_.empty() && p_depth_ == 0) {
      capturing_title_ = true;
      title_buffer_.clear();
    }

    if (name == "p" && accepts_paragraph()) {
      if (p_depth_ == 0) {
        raw_.clear();
        xrefs_.clear();
      }
      ++p_depth_;
    } else if (name == "p" && p_depth_ > 0) {
      ++p_depth_;
    }

    if (name == "xref" && p_depth_ > 0) {
      const bool bibr = attribute(atts, "ref-type") == "bibr";
      xref_stack_.push_back({bibr, raw_.size()});
    }
  }

  void end(const XML_Char* name_c) {
    const std::string_view name(name_c);

    if (name == "xref" && p_depth_ > 0 && !xref_stack_.empty()) {
      auto open = xref_stack_.back();
      xref_stack_.pop_back();
      if (open.bibr) xrefs_.push_back({open.start, raw_.size()});
    }

    if (name == "p" && p_depth_ > 0) {
      --p_depth_;
      if (p_depth_ == 0) finish_paragraph();
    }

    if (name == "title" && capturing_title_) {
      capturing_title_ = false;
      if (!secs_.empty()) secs_.back().title = normalize_space(title_buffer_);
    }

    if (name == "article-id" && capturing_id_) {
      capturing_id_ = false;
      std::string id = normalize_space(id_buffer_);
      if (!id.empty() && (!have_id_ || (id_is_pmc_ && !have_pmc_id_))) {
        article_.article_id = id;
        have_id_ = true;
        have_pmc_id_ = have_pmc_id_ || id_is_pmc_;
      }
    }

    if (name == "sec" && excluded_depth_ == 0 && !secs_.empty()) secs_.pop_back();
    if (is_excluded_container(name) && excluded_depth_ > 0) --excluded_depth_;
    if (name == "abstract" && abstract_depth_ > 0) --abstract_depth_;
    if (name == "front" && front_depth_ > 0) --front_depth_;
    path_.pop_back();
  }

  void text(const XML_Char* s, int len) {
    const std::string_view chunk(s, static_cast<std::size_t>(len));
    if (p_depth_ > 0) raw_.append(chunk);
    if (capturing_title_) title_buffer_.append(chunk);
    if (capturing_id_) id_buffer_.append(chunk);
  }

  ArticleTree take() {
    std::size_t sentences = 0;
    for (const auto& s : article_.sections)
      for (const auto& p : s.paragraphs) sentences += p.sentences.size();
    if (sentences == 0) throw Error(ErrorCode::EmptyArticle, "no paragraph text in article '" +
                                                                 article_.article_id + "'");
    return std::move(article_);
  }

 private:
  struct OpenXref {
    bool bibr;
    std::size_t start;
  };

  static std::string resolved_type(const SecFrame& f) {
    if (!f.explicit_type.empty()) return f.explicit_type;
    if (!f.inherited_type.empty()) return f.inherited_type;
    if (!f.title.empty()) return f.title;
    return "untitled";
  }

  bool accepts_paragraph() const {
    if (p_depth_ > 0 || excluded_depth_ > 0) return false;
    if (front_depth_ > 0) return abstract_depth_ > 0;
    return true;
  }

  Section& current_section() {
    if (abstract_depth_ > 0 && front_depth_ > 0) {
      if (abstract_section_ < 0) {
        abstract_section_ = static_cast<int>(article_.sections.size());
        article_.sections.push_back({"abstract", "Abstract", {}});
      }
      return article_.sections[static_cast<std::size_t>(abstract_section_)];
    }
    if (secs_.empty()) {
      if (body_section_ < 0) {
        body_section_ = static_cast<int>(article_.sections.size());
        article_.sections.push_back({"body", "", {}});
      }
      return article_.sections[static_cast<std::size_t>(body_section_)];
    }
    SecFrame& frame = secs_.back();
    if (frame.section_index < 0) {
      frame.section_index = static_cast<int>(article_.sections.size());
      article_.sections.push_back({resolved_type(frame), frame.title, {}});
    }
    return article_.sections[static_cast<std::size_t>(frame.section_index)];
  }

  void finish_paragraph() {
    // Whitespace-normalize the flattened text, remapping xref offsets.
    // start_at[i]: where raw_[i..] begins in `text`; end_at[i]: length of
    // `text` covering raw_[..i).
    std::string text;
    std::vector<std::size_t> start_at(raw_.size() + 1, 0), end_at(raw_.size() + 1, 0);
    bool pending = false;
    for (std::size_t i = 0; i < raw_.size(); ++i) {
      const char c = raw_[i];
      end_at[i] = text.size();
      start_at[i] = text.size() + (pending ? 1 : 0);
      if (is_space(c)) {
        pending = !text.empty();
        continue;
      }
      if (pending) text.push_back(' ');
      pending = false;
      text.push_back(c);
    }
    end_at[raw_.size()] = start_at[raw_.size()] = text.size();
    if (text.empty()) return;

    std::vector<CitationSpan> xrefs;
    for (const auto& x : xrefs_) {
      xrefs.push_back({std::min(start_at[x.start], text.size()), end_at[x.end]});
    }

    Paragraph paragraph;
    const auto ranges = segment_sentence_ranges(text);
    std::vector<bool> assigned(xrefs.size(), false);
    for (auto [b, e] : ranges) {
      RawSentence sentence;
      sentence.text = text.substr(b, e - b);
      bool xref_attached = false;
      for (std::size_t k = 0; k < xrefs.size(); ++k) {
        // Markers in the whitespace gap before a sentence belong to it.
        if (assigned[k] || xrefs[k].start >= e) continue;
        const std::size_t rs = std::max(xrefs[k].start, b);
        const std::size_t re = std::clamp(xrefs[k].end, rs, e);
        sentence.citation_spans.push_back({rs - b, re - b});
        assigned[k] = true;
        xref_attached = true;
      }
      for (const auto& h : find_citation_hints(sentence.text)) {
        sentence.citation_spans.push_back(h);
      }
      std::sort(sentence.citation_spans.begin(), sentence.citation_spans.end(),
                [](const CitationSpan& l, const CitationSpan& r) { return l.start < r.start; });
      std::vector<CitationSpan> merged;
      for (const auto& s : sentence.citation_spans) {
        if (!merged.empty() && s.start < merged.back().end) {
          merged.back().end = std::max(merged.back().end, s.end);
        } else {
          merged.push_back(s);
        }
      }
      sentence.citation_spans = std::move(merged);
      sentence.has_citation = xref_attached || !sentence.citation_spans.empty();
      paragraph.sentences.push_back(std::move(sentence));
    }
    // A trailing empty marker lands past the last sentence.
    if (!paragraph.sentences.empty() &&
        std::find(assigned.begin(), assigned.end(), false) != assigned.end()) {
      RawSentence& last = paragraph.sentences.back();
      last.citation_spans.push_back({last.text.size(), last.text.size()});
      last.has_citation = true;
    }
    if (!paragraph.sentences.empty()) current_section().paragraphs.push_back(std::move(paragraph));
  }

  ArticleTree article_;
  std::vector<std::string> path_;
  std::vector<SecFrame> secs_;
  int front_depth_ = 0;
  int abstract_depth_ = 0;
  int excluded_depth_ = 0;
  int p_depth_ = 0;
  int abstract_section_ = -1;
  int body_section_ = -1;
  std::string raw_;
  std::vector<CitationSpan> xrefs_;
  std::vector<OpenXref> xref_stack_;
  bool capturing_title_ = false;
  std::string title_buffer_;
  bool capturing_id_ = false;
  bool id_is_pmc_ = false;
  bool have_id_ = false;
  bool have_pmc_id_ = false;
  std::string id_buffer_;
};

void XMLCALL on_start(void* data, const XML_Char* name, const XML_Char** atts) {
  static_cast<JatsBuilder*>(data)->start(name, atts);
}
void XMLCALL on_end(void* data, const XML_Char* name) {
  static_cast<JatsBuilder*>(data)->end(name);
}
void XMLCALL on_text(void* data, const XML_Char* s, int len) {
  static_cast<JatsBuilder*>(data)->text(s, len);
}

struct ParserHandle {
  XML_Parser parser = XML_ParserCreate("UTF-8");
  ~ParserHandle() { XML_ParserFree(parser); }
};

}  // namespace

ArticleTree parse_article(std::string_view xml_bytes, std::string_view fallback_id) {
  JatsBuilder builder(fallback_id);
  ParserHandle handle;
  if (handle.parser == nullptr) throw Error(ErrorCode::MalformedXml, "cannot create XML parser");
  XML_SetUserData(handle.parser, &builder);
  XML_SetElementHandler(handle.parser, on_start, on_end);
  XML_SetCharacterDataHandler(handle.parser, on_text);
  if (XML_Parse(handle.parser, xml_bytes.data(), static_cast<int>(xml_bytes.size()), 1) ==
      XML_STATUS_ERROR) {
    throw Error(ErrorCode::MalformedXml,
                std::string(XML_ErrorString(XML_GetErrorCode(handle.parser))) + " at line " +
                    std::to_string(XML_GetCurrentLineNumber(handle.parser)));
  }
  return builder.take();
}

std::string read_maybe_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (f == nullptr) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw Error(ErrorCode::Io, "read failed for " + path.string());
  return out;
}

std::vector<std::filesystem::path> list_article_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > 3 && name.ends_with(".gz")) name.resize(name.size() - 3);
    if (name.ends_with(".xml") || name.ends_with(".nxml")) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace citeworth::corpus
