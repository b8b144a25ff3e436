#include "ctrace/triage.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ctrace/error.hpp"

namespace ctrace::triage {

const std::vector<Question> &questionnaire_schema() {
  static const std::vector<Question> schema{
      {"cough", "New or worsening cough"},
      {"shortness_of_breath", "Shortness of breath"},
      {"sore_throat", "Sore throat"},
      {"runny_nose", "Runny nose, sneezing or nasal congestion"},
      {"hoarse_voice", "Hoarse voice"},
      {"difficulty_swallowing", "Difficulty swallowing"},
      {"gastrointestinal", "Nausea/vomiting/diarrhea/abdominal pain"},
      {"fatigue", "Unexpected fatigue"},
      {"fever", "Fever"},
  };
  return schema;
}

std::size_t question_index(std::string_view id) {
  const auto &schema = questionnaire_schema();
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (schema[i].id == id)
      return i;
  throw Error(ErrorKind::Validation, "unknown question id '" + std::string(id) + "'");
}

Answers make_answers(const std::vector<bool> &answers) {
  if (answers.size() != kQuestionCount)
    throw Error(ErrorKind::Validation, "expected 9 answers, got " + std::to_string(answers.size()));
  Answers a{};
  std::copy(answers.begin(), answers.end(), a.begin());
  return a;
}

const char *to_string(Recommendation r) noexcept {
  return r == Recommendation::TestAdvised ? "test_advised" : "self_monitor";
}

RuleTable::RuleTable(std::vector<Rule> rules) : rules_(std::move(rules)) {
  if (rules_.empty())
    throw Error(ErrorKind::Validation, "rule table is empty");
  for (const auto &r : rules_) {
    if (r.name.empty())
      throw Error(ErrorKind::Validation, "rule without a name");
    if (r.required_yes.empty() && r.min_yes == 0)
      throw Error(ErrorKind::Validation, "rule '" + r.name + "' matches every questionnaire");
    if (r.min_yes > kQuestionCount)
      throw Error(ErrorKind::Validation, "rule '" + r.name + "' needs more than 9 yes answers");
    for (const auto &id : r.required_yes)
      question_index(id);
  }
}

RuleTable RuleTable::defaults() {
  return RuleTable({
      {"fever_and_cough", {"fever", "cough"}, 0},
      {"fever_and_shortness_of_breath", {"fever", "shortness_of_breath"}, 0},
      {"fever_and_sore_throat", {"fever", "sore_throat"}, 0},
      {"four_or_more_symptoms", {}, 4},
  });
}

RuleTable RuleTable::from_json(std::string_view text) {
  using nlohmann::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::Validation, std::string("rule table is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("rules") || !j["rules"].is_array())
    throw Error(ErrorKind::Validation, "rule table needs a 'rules' array");

  std::vector<Rule> rules;
  std::size_t pos = 0;
  for (const auto &jr : j["rules"]) {
    const std::string where = "rule #" + std::to_string(pos++);
    if (!jr.is_object() || !jr.contains("name") || !jr["name"].is_string())
      throw Error(ErrorKind::Validation, where + ": missing string 'name'");
    Rule r;
    r.name = jr["name"].get<std::string>();
    if (jr.contains("required_yes")) {
      if (!jr["required_yes"].is_array())
        throw Error(ErrorKind::Validation, where + ": 'required_yes' must be an array");
      for (const auto &id : jr["required_yes"]) {
        if (!id.is_string())
          throw Error(ErrorKind::Validation, where + ": question ids must be strings");
        r.required_yes.push_back(id.get<std::string>());
      }
    }
    if (jr.contains("min_yes")) {
      if (!jr["min_yes"].is_number_unsigned())
        throw Error(ErrorKind::Validation, where + ": 'min_yes' must be a non-negative integer");
      r.min_yes = jr["min_yes"].get<std::size_t>();
    }
    rules.push_back(std::move(r));
  }
  return RuleTable(std::move(rules));
}

RuleTable RuleTable::load(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorKind::Io, "cannot read rule table " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return from_json(ss.str());
  } catch (const Error &e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

TriageResult score_questionnaire(const Answers &answers, const RuleTable &rules) {
  TriageResult result;
  result.yes_count = static_cast<std::size_t>(std::count(answers.begin(), answers.end(), true));
  result.rule_fired = "none";
  for (const auto &rule : rules.rules()) {
    const bool all_required = std::all_of(rule.required_yes.begin(), rule.required_yes.end(),
                                          [&](const std::string &id) {
                                            return answers[question_index(id)];
                                          });
    if (all_required && result.yes_count >= rule.min_yes) {
      result.recommendation = Recommendation::TestAdvised;
      result.rule_fired = rule.name;
      break;
    }
  }
  return result;
}

} // namespace ctrace::triage
