#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace graphmpa {

/// LCS-based F1 over whitespace tokens (case-sensitive). 0 when either side
/// has no tokens.
double rouge_l_f1(std::string_view prediction, std::string_view reference);

/// Length of the longest common subsequence of two token lists.
std::size_t lcs_length(const std::vector<std::string_view>& a,
                       const std::vector<std::string_view>& b);

/// Trims surrounding whitespace and lowercases ASCII letters.
std::string normalize_choice(std::string_view s);

/// Fraction of exact matches after normalize_choice. Throws InputError on
/// empty input or a length mismatch.
double choice_accuracy(const std::vector<std::string>& predictions,
                       const std::vector<std::string>& golds);

struct EvalReport {
  std::vector<double> rouge_l_f1;  // per item
  std::vector<double> accuracy;    // per item, 0 or 1
  double mean_rouge_l_f1 = 0.0;
  double mean_accuracy = 0.0;
  std::size_t item_count = 0;
};

EvalReport evaluate(const std::vector<std::string>& predictions,
                    const std::vector<std::string>& references);

}  // namespace graphmpa
