#pragma once

#include <cstddef>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "graphmpa/backends.hpp"
#include "graphmpa/index.hpp"
#include "graphmpa/retrieve.hpp"

namespace graphmpa {

inline constexpr std::string_view kReasonMarker = "###Reason: ";
inline constexpr std::string_view kAnswerMarker = "\n###Answer: ";

struct PreferenceRecord {
  std::string query;
  std::vector<std::string> context;
  std::string chosen;    // reasoning and answer
  std::string rejected;  // bare answer
  std::size_t context_size = 0;
  std::string source_qa_id;

  friend bool operator==(const PreferenceRecord&, const PreferenceRecord&) = default;
};

struct QaPair {
  std::string id;
  std::string question;
  std::string answer;
  std::vector<std::string> options;
};

/// C_j = texts of the first j ranked entries, for j = 1..len(result).
std::vector<std::vector<std::string>> build_contexts(const RetrievalResult& result,
                                                     const HierarchicalIndex& index);

/// chosen = "###Reason: " + reasoning + "\n###Answer: " + answer; rejected = answer.
PreferenceRecord make_record(std::string query, std::vector<std::string> context,
                             const std::string& answer, const std::string& reasoning);

struct ChosenParts {
  std::string reasoning;
  std::string answer;
};

/// Inverse of the chosen format. Returns nullopt when the markers are missing.
std::optional<ChosenParts> parse_chosen(std::string_view chosen);

struct SynthesisConfig {
  /// Context sizes per QA pair; clamped to the retrieved count.
  std::vector<std::size_t> context_sizes{1, 2, 4, 10};
  /// Also emit a record with no context.
  bool include_empty_context = false;
  std::size_t top_k = 10;
  std::size_t max_concurrent = 1;
};

struct SynthesisResult {
  std::vector<PreferenceRecord> records;  // in QA order, then context-size order
  std::size_t skipped = 0;
};

/// For each QA pair: retrieve top_k, build nested contexts, ask a reasoning
/// backend (round-robin over records) for an explanation of the gold answer
/// and emit one record per context size. A failing backend call skips that
/// record only.
SynthesisResult synthesize_dataset(const std::vector<QaPair>& qa_pairs,
                                   const HierarchicalIndex& index, const SynthesisConfig& config,
                                   const Embedder& embedder,
                                   const std::vector<std::shared_ptr<ReasoningBackend>>& backends);

// Line-delimited JSON.
std::vector<QaPair> read_qa_pairs(std::istream& in);
void write_record(std::ostream& out, const PreferenceRecord& record);
PreferenceRecord parse_record(const std::string& line);

}  // namespace graphmpa
