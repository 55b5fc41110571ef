#include "graphmpa/metrics.hpp"

#include <algorithm>

#include "graphmpa/docmodel.hpp"
#include "graphmpa/error.hpp"

namespace graphmpa {

std::size_t lcs_length(const std::vector<std::string_view>& a,
                       const std::vector<std::string_view>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::string_view prediction, std::string_view reference) {
  const auto& tok = default_tokenizer();
  const auto pred = tok.tokenize(prediction);
  const auto ref = tok.tokenize(reference);
  if (pred.empty() || ref.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(pred, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(pred.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

std::string normalize_choice(std::string_view s) {
  const auto& tok = default_tokenizer();
  const auto tokens = tok.tokenize(s);
  if (tokens.empty()) return {};
  // keep inner spacing as written
  const auto begin = tokens.front().data() - s.data();
  const auto end = tokens.back().data() + tokens.back().size() - s.data();
  std::string out(s.substr(begin, end - begin));
  for (char& c : out)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

double choice_accuracy(const std::vector<std::string>& predictions,
                       const std::vector<std::string>& golds) {
  if (predictions.size() != golds.size())
    throw InputError("choice_accuracy: " + std::to_string(predictions.size()) +
                     " predictions for " + std::to_string(golds.size()) + " golds");
  if (predictions.empty()) throw InputError("choice_accuracy: no items");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    hits += normalize_choice(predictions[i]) == normalize_choice(golds[i]);
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& references) {
  if (predictions.size() != references.size())
    throw InputError("evaluate: predictions and references differ in length");
  if (predictions.empty()) throw InputError("evaluate: no items");
  EvalReport report;
  report.item_count = predictions.size();
  double rouge_sum = 0.0, acc_sum = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    report.rouge_l_f1.push_back(rouge_l_f1(predictions[i], references[i]));
    report.accuracy.push_back(normalize_choice(predictions[i]) == normalize_choice(references[i]) ? 1.0 : 0.0);
    rouge_sum += report.rouge_l_f1.back();
    acc_sum += report.accuracy.back();
  }
  report.mean_rouge_l_f1 = rouge_sum / static_cast<double>(report.item_count);
  report.mean_accuracy = acc_sum / static_cast<double>(report.item_count);
  return report;
}

}  // namespace graphmpa
