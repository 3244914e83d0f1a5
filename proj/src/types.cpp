#include "gistkit/types.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <utility>

#include "gistkit/errors.hpp"
#include "gistkit/text.hpp"

namespace gistkit {

namespace {

constexpr std::array<std::pair<TaskKind, std::string_view>, 12> kTaskNames{{
    {TaskKind::kLamp1, "lamp1"},
    {TaskKind::kLamp2, "lamp2"},
    {TaskKind::kLamp3, "lamp3"},
    {TaskKind::kLamp4, "lamp4"},
    {TaskKind::kLamp5, "lamp5"},
    {TaskKind::kLamp6, "lamp6"},
    {TaskKind::kLamp7, "lamp7"},
    {TaskKind::kUp0, "up0"},
    {TaskKind::kPsw1, "psw1"},
    {TaskKind::kPsw2, "psw2"},
    {TaskKind::kPsw3, "psw3"},
    {TaskKind::kPsw4, "psw4"},
}};

constexpr std::array<std::pair<Setting, std::string_view>, 3> kSettingNames{{
    {Setting::kZeroShot, "zero_shot"},
    {Setting::kSingleAuthor, "single_author"},
    {Setting::kMultiAuthor, "multi_author"},
}};

constexpr std::array<std::pair<Ablation, std::string_view>, 5> kAblationNames{{
    {Ablation::kNone, "none"},
    {Ablation::kSwapRandom, "swap_random"},
    {Ablation::kSwapFirst, "swap_first"},
    {Ablation::kProfileRemoved, "profile_removed"},
    {Ablation::kProfileRandom, "profile_random"},
}};

constexpr std::array<std::pair<AuthorRoleKind, std::string_view>, 4> kRoleNames{{
    {AuthorRoleKind::kFirstAuthor, "first_author"},
    {AuthorRoleKind::kMiddleAuthor, "middle_author"},
    {AuthorRoleKind::kLastAuthor, "last_author"},
    {AuthorRoleKind::kUnspecified, "unspecified"},
}};

template <typename Enum, std::size_t N>
std::string_view name_of(const std::array<std::pair<Enum, std::string_view>, N>& table, Enum value) {
  for (const auto& [key, name] : table) {
    if (key == value) return name;
  }
  return "unknown";
}

template <typename Enum, std::size_t N>
std::optional<Enum> value_of(const std::array<std::pair<Enum, std::string_view>, N>& table,
                             std::string_view text) {
  std::string lowered = to_lower(text);
  std::erase_if(lowered, [](char c) { return c == '-'; });
  for (const auto& [key, name] : table) {
    std::string candidate(name);
    std::erase_if(candidate, [](char c) { return c == '-'; });
    if (candidate == lowered) return key;
  }
  return std::nullopt;
}

std::string join_path(const std::string& base, const std::string& leaf) {
  return base.empty() ? leaf : base + "." + leaf;
}

const Json& require(const Json& object, const std::string& key, const std::string& path, long index) {
  if (!object.is_object()) throw LoadError(index, path, "expected an object");
  auto it = object.find(key);
  if (it == object.end()) throw LoadError(index, join_path(path, key), "missing field");
  return *it;
}

std::string require_string(const Json& object, const std::string& key, const std::string& path,
                           long index) {
  const Json& value = require(object, key, path, index);
  if (!value.is_string()) throw LoadError(index, join_path(path, key), "expected a string");
  return value.get<std::string>();
}

std::vector<std::string> string_list(const Json& value, const std::string& path, long index) {
  if (value.is_string()) return {value.get<std::string>()};
  if (!value.is_array()) throw LoadError(index, path, "expected a string or an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    const Json& item = value[i];
    if (item.is_string()) {
      out.push_back(item.get<std::string>());
    } else if (item.is_number()) {
      out.push_back(item.dump());
    } else {
      throw LoadError(index, path + "[" + std::to_string(i) + "]", "expected a string");
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(TaskKind task) { return name_of(kTaskNames, task); }

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  return value_of(kTaskNames, text);
}

std::vector<TaskKind> all_task_kinds() {
  std::vector<TaskKind> out;
  for (const auto& entry : kTaskNames) out.push_back(entry.first);
  return out;
}

TaskFamily family_of(TaskKind task) {
  switch (task) {
    case TaskKind::kUp0:
    case TaskKind::kPsw1:
    case TaskKind::kPsw2:
    case TaskKind::kPsw3:
    case TaskKind::kPsw4:
      return TaskFamily::kPsw;
    default:
      return TaskFamily::kLamp;
  }
}

std::string_view to_string(TaskFamily family) {
  return family == TaskFamily::kLamp ? "lamp" : "psw";
}

std::optional<TaskFamily> parse_task_family(std::string_view text) {
  std::string lowered = to_lower(text);
  if (lowered == "lamp") return TaskFamily::kLamp;
  if (lowered == "psw") return TaskFamily::kPsw;
  return std::nullopt;
}

bool is_classification(TaskKind task) {
  return task == TaskKind::kLamp1 || task == TaskKind::kLamp2;
}

bool is_rating(TaskKind task) { return task == TaskKind::kLamp3; }

bool is_collaborative(TaskKind task) {
  return task == TaskKind::kPsw1 || task == TaskKind::kPsw2 || task == TaskKind::kPsw3 ||
         task == TaskKind::kPsw4;
}

bool is_judged(TaskKind task) { return family_of(task) == TaskFamily::kPsw; }

std::string_view to_string(AuthorRoleKind role) { return name_of(kRoleNames, role); }

std::optional<AuthorRoleKind> parse_author_role(std::string_view text) {
  return value_of(kRoleNames, text);
}

std::string_view to_string(Setting setting) { return name_of(kSettingNames, setting); }

std::optional<Setting> parse_setting(std::string_view text) {
  return value_of(kSettingNames, text);
}

std::string_view to_string(Ablation ablation) { return name_of(kAblationNames, ablation); }

std::optional<Ablation> parse_ablation(std::string_view text) {
  return value_of(kAblationNames, text);
}

std::vector<Ablation> all_ablations() {
  std::vector<Ablation> out;
  for (const auto& entry : kAblationNames) out.push_back(entry.first);
  return out;
}

bool is_order_ablation(Ablation ablation) {
  return ablation == Ablation::kSwapRandom || ablation == Ablation::kSwapFirst;
}

bool is_profile_ablation(Ablation ablation) {
  return ablation == Ablation::kProfileRemoved || ablation == Ablation::kProfileRandom;
}

int default_k_retrieve(TaskKind task) { return family_of(task) == TaskFamily::kPsw ? 10 : 5; }

std::string target_text(const Target& target) {
  return std::visit(
      [](const auto& value) -> std::string {
        using T = std::decay_t<decltype(value)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return value;
        } else if constexpr (std::is_same_v<T, Label>) {
          return value.value;
        } else {
          return std::to_string(value.value);
        }
      },
      target);
}

std::vector<AuthorRole> TaskInstance::ordered_authors() const {
  std::vector<AuthorRole> out = authors;
  std::stable_sort(out.begin(), out.end(),
                   [](const AuthorRole& a, const AuthorRole& b) { return a.position < b.position; });
  return out;
}

std::string TaskInstance::context_value(const std::string& key) const {
  auto it = context.find(key);
  if (it == context.end()) return {};
  for (const auto& value : it->second) {
    if (!value.empty()) return value;
  }
  return {};
}

std::vector<std::string> validate_instance(const TaskInstance& instance) {
  std::vector<std::string> violations;
  if (instance.instance_id.empty()) violations.emplace_back("instance id is empty");
  if (trim(instance.input).empty()) violations.emplace_back("input is empty");

  const auto l = instance.authors.size();
  if (l == 0) violations.emplace_back("instance has no authors");
  if (is_collaborative(instance.task) && l < 2) {
    violations.emplace_back("PSW requires ≥2 authors");
  }

  std::vector<int> positions;
  std::set<std::string> seen;
  for (const auto& author : instance.authors) {
    positions.push_back(author.position);
    if (!seen.insert(author.user_id).second) {
      violations.push_back("duplicate author " + author.user_id);
    }
    if (!instance.histories.contains(author.user_id)) {
      violations.push_back("missing history for author " + author.user_id);
    }
  }
  std::sort(positions.begin(), positions.end());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] != static_cast<int>(i)) {
      violations.emplace_back("author positions are not a permutation of 0..l-1");
      break;
    }
  }

  for (const auto& [user_id, history] : instance.histories) {
    if (history.user_id != user_id) {
      violations.push_back("history key " + user_id + " does not match user id " + history.user_id);
    }
    for (std::size_t j = 0; j < history.entries.size(); ++j) {
      if (trim(history.entries[j].input).empty()) {
        violations.push_back("history entry " + std::to_string(j) + " of " + user_id +
                             " has empty input");
      }
    }
  }

  if (is_classification(instance.task)) {
    if (!std::holds_alternative<Label>(instance.target)) {
      violations.emplace_back("classification target must be a label");
    }
    if (!instance.candidates || instance.candidates->empty()) {
      violations.emplace_back("classification instance has no candidates");
    }
  }
  if (is_rating(instance.task)) {
    const auto* rating = std::get_if<Rating>(&instance.target);
    if (rating == nullptr || rating->value < 1 || rating->value > 5) {
      violations.emplace_back("rating target must be an integer in 1..5");
    }
  }
  return violations;
}

std::vector<std::string> validate_run_config(const RunConfig& config, TaskKind task) {
  std::vector<std::string> problems;
  if (is_order_ablation(config.ablation) && config.setting != Setting::kMultiAuthor) {
    problems.push_back(std::string(to_string(config.ablation)) + " requires setting multi_author");
  }
  if (config.setting == Setting::kZeroShot && config.ablation != Ablation::kNone) {
    problems.push_back(std::string(to_string(config.ablation)) +
                       " has no effect without profiles (setting zero_shot)");
  }
  if (task == TaskKind::kUp0 && config.setting != Setting::kSingleAuthor) {
    problems.emplace_back("up0 profiles one author at a time (setting single_author)");
  }
  if (task == TaskKind::kUp0 && config.ablation != Ablation::kNone) {
    problems.emplace_back("up0 takes no ablation");
  }
  if (config.k_retrieve && *config.k_retrieve < 0) problems.emplace_back("k_retrieve is negative");
  if (config.temperature < 0.0 || config.temperature > 2.0) {
    problems.emplace_back("temperature outside [0,2]");
  }
  if (config.judge_temperature < 0.0 || config.judge_temperature > 2.0) {
    problems.emplace_back("judge temperature outside [0,2]");
  }
  if (config.max_tokens <= 0 || config.judge_max_tokens <= 0) {
    problems.emplace_back("max_tokens must be positive");
  }
  if (config.judge_samples < 1) problems.emplace_back("judge_samples must be at least 1");
  if (config.max_gist_examples < 1) problems.emplace_back("max_gist_examples must be at least 1");
  if (config.max_in_flight < 1) problems.emplace_back("max_in_flight must be at least 1");
  if (config.failure_threshold < 0.0 || config.failure_threshold > 1.0) {
    problems.emplace_back("failure_threshold outside [0,1]");
  }
  return problems;
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const HistoryEntry& entry) {
  Json out = {{"input", entry.input}, {"output", entry.output}};
  out["meta"] = Json::object();
  for (const auto& [key, value] : entry.meta) out["meta"][key] = value;
  return out;
}

Json to_json(const UserHistory& history) {
  Json entries = Json::array();
  for (const auto& entry : history.entries) entries.push_back(to_json(entry));
  return entries;
}

Json to_json(const UserProfile& profile) {
  return {
      {"user_id", profile.user_id},
      {"keywords", profile.keywords},
      {"topics", profile.topics},
      {"writing_style", profile.writing_style},
      {"preferences", profile.preferences},
      {"research_interests", profile.research_interests},
      {"raw_text", profile.raw_text},
  };
}

Json to_json(const AuthorRole& author) {
  Json out = {{"id", author.user_id}, {"position", author.position}};
  if (author.role != AuthorRoleKind::kUnspecified) out["role"] = to_string(author.role);
  return out;
}

Json to_json(const TaskInstance& instance) {
  Json out;
  out["id"] = instance.instance_id;
  out["task"] = to_string(instance.task);
  out["input"] = instance.input;
  if (const auto* rating = std::get_if<Rating>(&instance.target)) {
    out["target"] = rating->value;
  } else {
    out["target"] = target_text(instance.target);
  }
  if (instance.candidates) out["candidates"] = *instance.candidates;
  out["authors"] = Json::array();
  for (const auto& author : instance.authors) out["authors"].push_back(to_json(author));
  out["histories"] = Json::object();
  for (const auto& [user_id, history] : instance.histories) {
    out["histories"][user_id] = to_json(history);
  }
  if (!instance.context.empty()) {
    out["context"] = Json::object();
    for (const auto& [key, values] : instance.context) out["context"][key] = values;
  }
  return out;
}

Json to_json(const RunConfig& config) {
  Json out = {
      {"setting", to_string(config.setting)},
      {"ablation", to_string(config.ablation)},
      {"seed", config.seed},
      {"model_id", config.model_id},
      {"judge_model_id", config.judge_model_id},
      {"temperature", config.temperature},
      {"judge_temperature", config.judge_temperature},
      {"max_tokens", config.max_tokens},
      {"judge_max_tokens", config.judge_max_tokens},
      {"judge_samples", config.judge_samples},
      {"max_gist_examples", config.max_gist_examples},
      {"max_in_flight", config.max_in_flight},
      {"failure_threshold", config.failure_threshold},
      {"render_roles", config.render_roles},
      {"stemming", config.stemming},
  };
  out["k_retrieve"] = config.k_retrieve ? Json(*config.k_retrieve) : Json(nullptr);
  if (!config.cache_dir.empty()) out["cache_dir"] = config.cache_dir;
  return out;
}

HistoryEntry history_entry_from_json(const Json& json, const std::string& path) {
  HistoryEntry entry;
  entry.input = require_string(json, "input", path, -1);
  entry.output = json.contains("output") && json["output"].is_string()
                     ? json["output"].get<std::string>()
                     : (json.contains("output") ? json["output"].dump() : std::string());
  if (json.contains("meta") && !json["meta"].is_null()) {
    const Json& meta = json["meta"];
    if (!meta.is_object()) throw LoadError(-1, join_path(path, "meta"), "expected an object");
    for (const auto& [key, value] : meta.items()) {
      entry.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return entry;
}

UserProfile user_profile_from_json(const Json& json) {
  UserProfile profile;
  profile.user_id = json.value("user_id", "");
  profile.keywords = json.value("keywords", std::vector<std::string>{});
  profile.topics = json.value("topics", std::vector<std::string>{});
  profile.writing_style = json.value("writing_style", std::vector<std::string>{});
  profile.preferences = json.value("preferences", std::vector<std::string>{});
  profile.research_interests = json.value("research_interests", std::vector<std::string>{});
  profile.raw_text = json.value("raw_text", "");
  return profile;
}

TaskInstance task_instance_from_json(const Json& json, long index) {
  if (!json.is_object()) throw LoadError(index, "", "instance must be an object");
  TaskInstance instance;
  instance.instance_id = require_string(json, "id", "", index);

  const std::string task_name = require_string(json, "task", "", index);
  auto task = parse_task_kind(task_name);
  if (!task) throw LoadError(index, "task", "unknown task '" + task_name + "'");
  instance.task = *task;

  instance.input = require_string(json, "input", "", index);

  const Json& target = require(json, "target", "", index);
  if (target.is_number_integer()) {
    instance.target = Rating{target.get<int>()};
  } else if (target.is_string()) {
    const std::string text = target.get<std::string>();
    if (is_rating(instance.task)) {
      try {
        std::size_t used = 0;
        int value = std::stoi(trim(text), &used);
        if (used != trim(text).size()) throw std::invalid_argument(text);
        instance.target = Rating{value};
      } catch (const std::exception&) {
        throw LoadError(index, "target", "rating target is not an integer: '" + text + "'");
      }
    } else if (is_classification(instance.task)) {
      instance.target = Label{text};
    } else {
      instance.target = text;
    }
  } else if (target.is_array()) {
    // List-valued gold (e.g. research interests) is stored as one line per item.
    std::string joined;
    for (const auto& item : string_list(target, "target", index)) {
      if (!joined.empty()) joined += "\n";
      joined += item;
    }
    instance.target = joined;
  } else {
    throw LoadError(index, "target", "expected a string, integer or array");
  }

  if (json.contains("candidates") && !json["candidates"].is_null()) {
    instance.candidates = string_list(json["candidates"], "candidates", index);
  }

  const Json& authors = require(json, "authors", "", index);
  if (!authors.is_array()) throw LoadError(index, "authors", "expected an array");
  for (std::size_t i = 0; i < authors.size(); ++i) {
    const std::string path = "authors[" + std::to_string(i) + "]";
    AuthorRole author;
    author.user_id = require_string(authors[i], "id", path, index);
    const Json& position = require(authors[i], "position", path, index);
    if (!position.is_number_integer()) {
      throw LoadError(index, path + ".position", "expected an integer");
    }
    author.position = position.get<int>();
    if (authors[i].contains("role")) {
      const Json& role_json = authors[i]["role"];
      auto role = role_json.is_string() ? parse_author_role(role_json.get<std::string>())
                                        : std::nullopt;
      if (!role) throw LoadError(index, path + ".role", "unknown author role");
      author.role = *role;
    }
    instance.authors.push_back(std::move(author));
  }

  const Json& histories = require(json, "histories", "", index);
  if (!histories.is_object()) throw LoadError(index, "histories", "expected an object");
  for (const auto& [user_id, entries] : histories.items()) {
    const std::string path = "histories." + user_id;
    if (!entries.is_array()) throw LoadError(index, path, "expected an array");
    UserHistory history{user_id, {}};
    for (std::size_t j = 0; j < entries.size(); ++j) {
      const std::string entry_path = path + "[" + std::to_string(j) + "]";
      try {
        history.entries.push_back(history_entry_from_json(entries[j], entry_path));
      } catch (const LoadError& error) {
        throw LoadError(index, error.field_path(), "malformed history entry");
      }
    }
    instance.histories.emplace(user_id, std::move(history));
  }

  if (json.contains("context") && !json["context"].is_null()) {
    const Json& context = json["context"];
    if (!context.is_object()) throw LoadError(index, "context", "expected an object");
    for (const auto& [key, value] : context.items()) {
      instance.context[key] = string_list(value, "context." + key, index);
    }
  }
  return instance;
}

RunConfig run_config_from_json(const Json& json) {
  RunConfig config;
  auto text = [&](const char* key) -> std::optional<std::string> {
    if (!json.contains(key) || json[key].is_null()) return std::nullopt;
    return json[key].get<std::string>();
  };
  if (auto value = text("setting")) {
    auto setting = parse_setting(*value);
    if (!setting) throw ContractViolation("unknown setting '" + *value + "'");
    config.setting = *setting;
  }
  if (auto value = text("ablation")) {
    auto ablation = parse_ablation(*value);
    if (!ablation) throw ContractViolation("unknown ablation '" + *value + "'");
    config.ablation = *ablation;
  }
  if (json.contains("k_retrieve") && !json["k_retrieve"].is_null()) {
    config.k_retrieve = json["k_retrieve"].get<int>();
  }
  config.seed = json.value("seed", config.seed);
  config.model_id = json.value("model_id", config.model_id);
  config.judge_model_id = json.value("judge_model_id", config.judge_model_id);
  config.cache_dir = json.value("cache_dir", config.cache_dir);
  config.temperature = json.value("temperature", config.temperature);
  config.judge_temperature = json.value("judge_temperature", config.judge_temperature);
  config.max_tokens = json.value("max_tokens", config.max_tokens);
  config.judge_max_tokens = json.value("judge_max_tokens", config.judge_max_tokens);
  config.judge_samples = json.value("judge_samples", config.judge_samples);
  config.max_gist_examples = json.value("max_gist_examples", config.max_gist_examples);
  config.max_in_flight = json.value("max_in_flight", config.max_in_flight);
  config.failure_threshold = json.value("failure_threshold", config.failure_threshold);
  config.render_roles = json.value("render_roles", config.render_roles);
  config.stemming = json.value("stemming", config.stemming);
  return config;
}

}  // namespace gistkit
