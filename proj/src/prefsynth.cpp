#include "graphmpa/prefsynth.hpp"

#include <algorithm>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "graphmpa/error.hpp"
#include "graphmpa/parallel.hpp"

namespace graphmpa {

using nlohmann::json;

std::vector<std::vector<std::string>> build_contexts(const RetrievalResult& result,
                                                     const HierarchicalIndex& index) {
  std::vector<std::vector<std::string>> contexts;
  std::vector<std::string> running;
  for (const auto& entry : result.entries) {
    running.push_back(index.chunk(entry.chunk_id).text);
    contexts.push_back(running);
  }
  return contexts;
}

PreferenceRecord make_record(std::string query, std::vector<std::string> context,
                             const std::string& answer, const std::string& reasoning) {
  if (answer.empty()) throw InputError("make_record: empty answer");
  PreferenceRecord r;
  r.query = std::move(query);
  r.context_size = context.size();
  r.context = std::move(context);
  r.chosen.reserve(kReasonMarker.size() + reasoning.size() + kAnswerMarker.size() + answer.size());
  r.chosen.append(kReasonMarker).append(reasoning).append(kAnswerMarker).append(answer);
  r.rejected = answer;
  return r;
}

std::optional<ChosenParts> parse_chosen(std::string_view chosen) {
  if (!chosen.starts_with(kReasonMarker)) return std::nullopt;
  const auto split = chosen.rfind(kAnswerMarker);
  if (split == std::string_view::npos || split < kReasonMarker.size()) return std::nullopt;
  return ChosenParts{
      std::string(chosen.substr(kReasonMarker.size(), split - kReasonMarker.size())),
      std::string(chosen.substr(split + kAnswerMarker.size()))};
}

SynthesisResult synthesize_dataset(const std::vector<QaPair>& qa_pairs,
                                   const HierarchicalIndex& index, const SynthesisConfig& config,
                                   const Embedder& embedder,
                                   const std::vector<std::shared_ptr<ReasoningBackend>>& backends) {
  if (backends.empty()) throw InputError("synthesize_dataset: no reasoning backends");
  if (config.top_k == 0) throw InputError("synthesize_dataset: top_k must be positive");
  for (auto size : config.context_sizes)
    if (size == 0) throw InputError("context size 0 is selected with include_empty_context");

  std::vector<std::size_t> sizes;
  if (config.include_empty_context) sizes.push_back(0);
  sizes.insert(sizes.end(), config.context_sizes.begin(), config.context_sizes.end());
  const std::size_t per_pair = sizes.size();

  // Slot s holds record s of the full dataset; empty slots are skipped ones.
  std::vector<std::optional<PreferenceRecord>> slots(qa_pairs.size() * per_pair);
  bounded_parallel_for(qa_pairs.size(), config.max_concurrent, [&](std::size_t q) {
    const auto& qa = qa_pairs[q];
    const auto result = rank(index, qa.question, config.top_k, embedder);
    const auto contexts = build_contexts(result, index);
    for (std::size_t j = 0; j < per_pair; ++j) {
      const std::size_t slot = q * per_pair + j;
      const std::size_t size = std::min(sizes[j], contexts.size());
      std::vector<std::string> context =
          size == 0 ? std::vector<std::string>{} : contexts[size - 1];
      const auto& backend = backends[slot % backends.size()];
      try {
        const auto reasoning = backend->explain(ReasoningRequest{qa.question, context, qa.answer});
        auto record = make_record(qa.question, std::move(context), qa.answer, reasoning);
        record.source_qa_id = qa.id;
        slots[slot] = std::move(record);
      } catch (const BackendError& e) {
        spdlog::warn("qa {} context {}: {} failed: {}", qa.id, size, backend->name(), e.what());
      }
    }
  });

  SynthesisResult out;
  out.records.reserve(slots.size());
  for (auto& s : slots) {
    if (s)
      out.records.push_back(std::move(*s));
    else
      ++out.skipped;
  }
  return out;
}

std::vector<QaPair> read_qa_pairs(std::istream& in) {
  std::vector<QaPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(line);
      QaPair qa;
      qa.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>()
                                                      : j["id"].dump())
                               : std::to_string(line_no);
      qa.question = j.at("question").get<std::string>();
      qa.answer = j.at("answer").is_string() ? j["answer"].get<std::string>() : j["answer"].dump();
      if (j.contains("options")) qa.options = j["options"].get<std::vector<std::string>>();
      pairs.push_back(std::move(qa));
    } catch (const json::exception& e) {
      throw InputError("QA line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

void write_record(std::ostream& out, const PreferenceRecord& record) {
  const json j = {{"query", record.query},
                  {"context", record.context},
                  {"chosen", record.chosen},
                  {"rejected", record.rejected},
                  {"meta",
                   {{"context_size", record.context_size},
                    {"source_qa_id", record.source_qa_id}}}};
  out << j.dump() << '\n';
}

PreferenceRecord parse_record(const std::string& line) {
  try {
    const auto j = json::parse(line);
    PreferenceRecord r;
    r.query = j.at("query").get<std::string>();
    r.context = j.at("context").get<std::vector<std::string>>();
    r.chosen = j.at("chosen").get<std::string>();
    r.rejected = j.at("rejected").get<std::string>();
    r.context_size = j.at("meta").at("context_size").get<std::size_t>();
    r.source_qa_id = j.at("meta").at("source_qa_id").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("preference record: ") + e.what());
  }
}

}  // namespace graphmpa
