#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "citeworth/corpus.hpp"

namespace citeworth::io {

enum class DatasetFormat { JsonLines, Tsv };

/// Picks the format from the extension (.tsv -> Tsv, anything else JSON lines).
DatasetFormat format_for(const std::filesystem::path& path);

nlohmann::json to_json(const corpus::LabeledSentence& s);
corpus::LabeledSentence sentence_from_json(const nlohmann::json& j);

void write_dataset(const std::filesystem::path& path,
                   const std::vector<corpus::LabeledSentence>& sentences);
std::vector<corpus::LabeledSentence> read_dataset(const std::filesystem::path& path);

/// Writes train/valid/test files (`.jsonl` or `.tsv`) plus stats.json into `dir`.
void write_split(const std::filesystem::path& dir, const corpus::CorpusSplit& split,
                 DatasetFormat format = DatasetFormat::JsonLines);

/// Reads a split directory written by write_split.
corpus::CorpusSplit read_split(const std::filesystem::path& dir);

nlohmann::json stats_to_json(const corpus::StatsTable& t);

/// Plain-text table with the row schema of the corpus characteristics table.
std::string format_stats(const corpus::StatsTable& t);

struct AclArcOptions {
  std::size_t chunk_lines = 200;  // pseudo-document size when no blank-line separators exist
};

/// Reads the pre-processed ACL-ARC distribution: one sentence per line with
/// a 0/1 label column (either first or last tab-separated field). Blank lines
/// separate documents; without them, consecutive runs of `chunk_lines`
/// sentences form pseudo-documents so neighbors stay meaningful.
std::vector<corpus::ArticleTree> read_acl_arc(std::istream& in, const std::string& name,
                                              const AclArcOptions& options = {});
std::vector<corpus::ArticleTree> read_acl_arc(const std::filesystem::path& path,
                                              const AclArcOptions& options = {});

}  // namespace citeworth::io
