#pragma once

// Symptom questionnaire and rule-table scoring.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ctrace::triage {

inline constexpr std::size_t kQuestionCount = 9;

struct Question {
  std::string id;
  std::string text;
};

/// The nine symptom questions in their fixed order.
const std::vector<Question> &questionnaire_schema();

/// Position of a question id in the schema; throws Error(Validation) if unknown.
std::size_t question_index(std::string_view id);

using Answers = std::array<bool, kQuestionCount>;

/// Throws Error(Validation) unless exactly nine answers are given.
Answers make_answers(const std::vector<bool> &answers);

enum class Recommendation { SelfMonitor, TestAdvised };
const char *to_string(Recommendation r) noexcept;

/// Fires when every id in `required_yes` is answered yes and at least
/// `min_yes` answers are yes. One of the two may be empty/zero.
struct Rule {
  std::string name;
  std::vector<std::string> required_yes;
  std::size_t min_yes = 0;
};

class RuleTable {
public:
  /// Throws Error(Validation) for unknown ids, empty rules, min_yes > 9.
  explicit RuleTable(std::vector<Rule> rules);

  /// fever with cough, shortness of breath or sore throat; or four symptoms.
  static RuleTable defaults();
  /// JSON: {"rules": [{"name": ..., "required_yes": [...], "min_yes": n}, ...]}
  static RuleTable from_json(std::string_view text);
  static RuleTable load(const std::filesystem::path &path);

  const std::vector<Rule> &rules() const noexcept { return rules_; }

private:
  std::vector<Rule> rules_;
};

struct TriageResult {
  Recommendation recommendation = Recommendation::SelfMonitor;
  std::size_t yes_count = 0;
  /// Name of the first matching rule, or "none".
  std::string rule_fired;

  friend bool operator==(const TriageResult &, const TriageResult &) = default;
};

TriageResult score_questionnaire(const Answers &answers, const RuleTable &rules = RuleTable::defaults());

} // namespace ctrace::triage
