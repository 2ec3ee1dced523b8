#include "citeworth/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "citeworth/error.hpp"
#include "citeworth/text_util.hpp"

namespace citeworth::io {

namespace fs = std::filesystem;
using corpus::LabeledSentence;
using nlohmann::json;

namespace {

const char* const kTsvColumns[] = {"id",          "article_id",        "section_index",
                                   "paragraph_index", "label",         "section_type",
                                   "char_len",    "word_len",          "prev_id",
                                   "next_id",     "prev_has_citation", "next_has_citation",
                                   "text"};

std::string tsv_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[++i];
      out.push_back(n == 't' ? '\t' : n == 'n' ? '\n' : n == 'r' ? '\r' : n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t b = 0;
  for (;;) {
    const std::size_t e = line.find('\t', b);
    out.push_back(line.substr(b, e == std::string::npos ? std::string::npos : e - b));
    if (e == std::string::npos) break;
    b = e + 1;
  }
  return out;
}

std::size_t parse_count(const std::string& s, const fs::path& path) {
  try {
    return static_cast<std::size_t>(std::stoull(s));
  } catch (const std::exception&) {
    throw Error(ErrorCode::FormatMismatch, "bad integer '" + s + "' in " + path.string());
  }
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  return out;
}

}  // namespace

DatasetFormat format_for(const fs::path& path) {
  return path.extension() == ".tsv" ? DatasetFormat::Tsv : DatasetFormat::JsonLines;
}

json to_json(const LabeledSentence& s) {
  json j;
  j["id"] = s.id;
  j["article_id"] = s.article_id;
  j["section_index"] = s.section_index;
  j["paragraph_index"] = s.paragraph_index;
  j["text"] = s.text;
  j["label"] = s.label;
  j["section_type"] = s.section_type;
  j["char_len"] = s.char_len;
  j["word_len"] = s.word_len;
  j["prev_id"] = s.prev_id ? json(*s.prev_id) : json(nullptr);
  j["next_id"] = s.next_id ? json(*s.next_id) : json(nullptr);
  j["prev_has_citation"] = s.prev_has_citation;
  j["next_has_citation"] = s.next_has_citation;
  return j;
}

LabeledSentence sentence_from_json(const json& j) {
  LabeledSentence s;
  try {
    s.id = j.at("id").get<std::string>();
    s.article_id = j.value("article_id", std::string());
    s.section_index = j.value("section_index", std::size_t{0});
    s.paragraph_index = j.value("paragraph_index", std::size_t{0});
    s.text = j.at("text").get<std::string>();
    const auto& label = j.at("label");
    s.label = label.is_boolean() ? label.get<bool>() : label.get<int>() != 0;
    s.section_type = j.value("section_type", std::string());
    s.char_len = j.value("char_len", char_length(s.text));
    s.word_len = j.value("word_len", word_length(s.text));
    if (j.contains("prev_id") && j["prev_id"].is_string()) s.prev_id = j["prev_id"].get<std::string>();
    if (j.contains("next_id") && j["next_id"].is_string()) s.next_id = j["next_id"].get<std::string>();
    s.prev_has_citation = j.value("prev_has_citation", false);
    s.next_has_citation = j.value("next_has_citation", false);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::FormatMismatch, std::string("bad sentence record: ") + e.what());
  }
  return s;
}

void write_dataset(const fs::path& path, const std::vector<LabeledSentence>& sentences) {
  auto out = open_out(path);
  if (format_for(path) == DatasetFormat::JsonLines) {
    for (const auto& s : sentences) out << to_json(s).dump() << '\n';
    return;
  }
  for (std::size_t c = 0; c < std::size(kTsvColumns); ++c) {
    out << (c ? "\t" : "") << kTsvColumns[c];
  }
  out << '\n';
  for (const auto& s : sentences) {
    out << tsv_escape(s.id) << '\t' << tsv_escape(s.article_id) << '\t' << s.section_index
        << '\t' << s.paragraph_index << '\t' << (s.label ? 1 : 0) << '\t'
        << tsv_escape(s.section_type) << '\t' << s.char_len << '\t' << s.word_len << '\t'
        << tsv_escape(s.prev_id.value_or("")) << '\t' << tsv_escape(s.next_id.value_or(""))
        << '\t' << (s.prev_has_citation ? 1 : 0) << '\t' << (s.next_has_citation ? 1 : 0)
        << '\t' << tsv_escape(s.text) << '\n';
  }
}

std::vector<LabeledSentence> read_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  std::vector<LabeledSentence> out;
  std::string line;
  if (format_for(path) == DatasetFormat::JsonLines) {
    while (std::getline(in, line)) {
      if (trim(line).empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::FormatMismatch, path.string() + ": " + e.what());
      }
      out.push_back(sentence_from_json(j));
    }
    return out;
  }
  if (!std::getline(in, line)) return out;
  const auto header = split_tabs(line);
  if (header.size() != std::size(kTsvColumns) || header.front() != "id") {
    throw Error(ErrorCode::FormatMismatch, "unexpected TSV header in " + path.string());
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != std::size(kTsvColumns)) {
      throw Error(ErrorCode::FormatMismatch, "wrong field count in " + path.string());
    }
    LabeledSentence s;
    s.id = tsv_unescape(f[0]);
    s.article_id = tsv_unescape(f[1]);
    s.section_index = parse_count(f[2], path);
    s.paragraph_index = parse_count(f[3], path);
    s.label = f[4] == "1";
    s.section_type = tsv_unescape(f[5]);
    s.char_len = parse_count(f[6], path);
    s.word_len = parse_count(f[7], path);
    if (!f[8].empty()) s.prev_id = tsv_unescape(f[8]);
    if (!f[9].empty()) s.next_id = tsv_unescape(f[9]);
    s.prev_has_citation = f[10] == "1";
    s.next_has_citation = f[11] == "1";
    s.text = tsv_unescape(f[12]);
    out.push_back(std::move(s));
  }
  return out;
}

void write_split(const fs::path& dir, const corpus::CorpusSplit& split, DatasetFormat format) {
  fs::create_directories(dir);
  const std::string ext = format == DatasetFormat::Tsv ? ".tsv" : ".jsonl";
  write_dataset(dir / ("train" + ext), split.train);
  write_dataset(dir / ("valid" + ext), split.validation);
  write_dataset(dir / ("test" + ext), split.test);

  json stats;
  stats["all"] = stats_to_json(corpus::corpus_stats(split));
  stats["train"] = stats_to_json(corpus::corpus_stats(split.train));
  stats["valid"] = stats_to_json(corpus::corpus_stats(split.validation));
  stats["test"] = stats_to_json(corpus::corpus_stats(split.test));
  stats["split_fractions"] = split.split_fractions;
  stats["seed"] = split.seed;
  auto out = open_out(dir / "stats.json");
  out << stats.dump(2) << '\n';
}

corpus::CorpusSplit read_split(const fs::path& dir) {
  auto pick = [&](const std::string& stem) {
    for (const char* ext : {".jsonl", ".tsv"}) {
      if (fs::exists(dir / (stem + ext))) return dir / (stem + ext);
    }
    throw Error(ErrorCode::Io, "missing " + stem + ".jsonl in " + dir.string());
  };
  corpus::CorpusSplit split;
  split.train = read_dataset(pick("train"));
  split.validation = read_dataset(pick("valid"));
  split.test = read_dataset(pick("test"));
  return split;
}

json stats_to_json(const corpus::StatsTable& t) {
  return json{{"articles", t.articles},
              {"sections", t.sections},
              {"paragraphs", t.paragraphs},
              {"sentences", t.sentences},
              {"sentences_without_citations", t.non_citing},
              {"sentences_with_citations", t.citing},
              {"average_characters_per_sentence", t.avg_chars},
              {"average_words_per_sentence", t.avg_words},
              {"non_citing_to_citing_ratio", t.ratio}};
}

std::string format_stats(const corpus::StatsTable& t) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "articles\t" << t.articles << '\n'
      << "sections\t" << t.sections << '\n'
      << "paragraphs\t" << t.paragraphs << '\n'
      << "sentences\t" << t.sentences << '\n'
      << "sentences without citations\t" << t.non_citing << '\n'
      << "sentences with citations\t" << t.citing << '\n'
      << "average characters per sentence\t" << t.avg_chars << '\n'
      << "average words per sentence\t" << t.avg_words << '\n'
      << "non-citing to citing ratio\t" << t.ratio << '\n';
  return out.str();
}

std::vector<corpus::ArticleTree> read_acl_arc(std::istream& in, const std::string& name,
                                              const AclArcOptions& options) {
  std::vector<std::vector<corpus::RawSentence>> docs(1);
  bool saw_blank_separator = false;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) {
      if (!docs.back().empty()) {
        docs.emplace_back();
        saw_blank_separator = true;
      }
      continue;
    }
    auto fields = split_tabs(line);
    if (fields.size() < 2) {
      throw Error(ErrorCode::FormatMismatch, name + ": expected a tab-separated 0/1 label column");
    }
    corpus::RawSentence s;
    auto is_label = [](const std::string& f) {
      const auto t = trim(f);
      return t == "0" || t == "1";
    };
    if (is_label(fields.back())) {
      s.has_citation = trim(fields.back()) == "1";
      fields.pop_back();
    } else if (is_label(fields.front())) {
      s.has_citation = trim(fields.front()) == "1";
      fields.erase(fields.begin());
    } else {
      throw Error(ErrorCode::FormatMismatch, name + ": no 0/1 label column in '" + line + "'");
    }
    std::string text;
    for (const auto& f : fields) text += (text.empty() ? "" : " ") + f;
    s.text = normalize_space(text);
    docs.back().push_back(std::move(s));
  }
  if (docs.back().empty()) docs.pop_back();

  if (!saw_blank_separator && options.chunk_lines > 0 && !docs.empty()) {
    std::vector<std::vector<corpus::RawSentence>> chunks;
    auto& all = docs.front();
    for (std::size_t i = 0; i < all.size(); i += options.chunk_lines) {
      const std::size_t e = std::min(all.size(), i + options.chunk_lines);
      chunks.emplace_back(std::make_move_iterator(all.begin() + static_cast<long>(i)),
                          std::make_move_iterator(all.begin() + static_cast<long>(e)));
    }
    docs = std::move(chunks);
  }

  std::vector<corpus::ArticleTree> out;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    corpus::ArticleTree a;
    a.article_id = name + "-" + std::to_string(d);
    corpus::Section section;
    section.section_type = "";
    section.paragraphs.push_back({std::move(docs[d])});
    a.sections.push_back(std::move(section));
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<corpus::ArticleTree> read_acl_arc(const fs::path& path, const AclArcOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
  return read_acl_arc(in, path.stem().string(), options);
}

}  // namespace citeworth::io
