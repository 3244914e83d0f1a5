#pragma once

// Problem vocabulary shared by every module: histories, profiles, authors,
// benchmark instances and the run configuration.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace gistkit {

using Json = nlohmann::json;

enum class TaskKind {
  kLamp1,
  kLamp2,
  kLamp3,
  kLamp4,
  kLamp5,
  kLamp6,
  kLamp7,
  kUp0,
  kPsw1,
  kPsw2,
  kPsw3,
  kPsw4,
};

/// Which profile-generation prompt and profile grammar a task uses.
enum class TaskFamily { kLamp, kPsw };

std::string_view to_string(TaskKind task);
std::optional<TaskKind> parse_task_kind(std::string_view text);
std::vector<TaskKind> all_task_kinds();

TaskFamily family_of(TaskKind task);
std::string_view to_string(TaskFamily family);
std::optional<TaskFamily> parse_task_family(std::string_view text);

/// LaMP-1/LaMP-2: categorical label targets with candidate lists.
bool is_classification(TaskKind task);
/// LaMP-3: integer rating targets.
bool is_rating(TaskKind task);
/// PSW-1..4: collaborative tasks that need at least two authors.
bool is_collaborative(TaskKind task);
/// Tasks judged by the G-Eval rubric in addition to ROUGE.
bool is_judged(TaskKind task);

struct HistoryEntry {
  std::string input;
  std::string output;
  std::map<std::string, std::string> meta;

  bool operator==(const HistoryEntry&) const = default;
};

struct UserHistory {
  std::string user_id;
  std::vector<HistoryEntry> entries;

  bool operator==(const UserHistory&) const = default;
};

struct UserProfile {
  std::string user_id;
  std::vector<std::string> keywords;
  std::vector<std::string> topics;
  std::vector<std::string> writing_style;
  std::vector<std::string> preferences;
  std::vector<std::string> research_interests;
  std::string raw_text;  // the gist exactly as the model produced it

  bool operator==(const UserProfile&) const = default;
};

enum class AuthorRoleKind { kFirstAuthor, kMiddleAuthor, kLastAuthor, kUnspecified };

std::string_view to_string(AuthorRoleKind role);
std::optional<AuthorRoleKind> parse_author_role(std::string_view text);

struct AuthorRole {
  std::string user_id;
  AuthorRoleKind role = AuthorRoleKind::kUnspecified;
  int position = 0;

  bool operator==(const AuthorRole&) const = default;
};

struct Label {
  std::string value;
  bool operator==(const Label&) const = default;
};

struct Rating {
  int value = 0;
  bool operator==(const Rating&) const = default;
};

/// Free text, categorical label, or 1-5 rating.
using Target = std::variant<std::string, Label, Rating>;

/// Renders any target as the text a prediction is compared against.
std::string target_text(const Target& target);

/// Per-instance list-valued context, e.g. "references", "research_questions",
/// "title", "abstract", "reference_count".
using InstanceContext = std::map<std::string, std::vector<std::string>>;

struct TaskInstance {
  std::string instance_id;
  TaskKind task = TaskKind::kLamp5;
  std::string input;
  Target target;
  std::vector<AuthorRole> authors;
  std::map<std::string, UserHistory> histories;
  std::optional<std::vector<std::string>> candidates;
  InstanceContext context;

  bool operator==(const TaskInstance&) const = default;

  /// Authors sorted by position.
  std::vector<AuthorRole> ordered_authors() const;
  /// First non-empty value of a context key, or empty.
  std::string context_value(const std::string& key) const;
};

enum class Setting { kZeroShot, kSingleAuthor, kMultiAuthor };
enum class Ablation { kNone, kSwapRandom, kSwapFirst, kProfileRemoved, kProfileRandom };

std::string_view to_string(Setting setting);
std::optional<Setting> parse_setting(std::string_view text);
std::string_view to_string(Ablation ablation);
std::optional<Ablation> parse_ablation(std::string_view text);
std::vector<Ablation> all_ablations();

bool is_order_ablation(Ablation ablation);
bool is_profile_ablation(Ablation ablation);

/// Default retrieval depth: 5 for LaMP tasks, 10 for PSW tasks.
int default_k_retrieve(TaskKind task);

struct RunConfig {
  Setting setting = Setting::kMultiAuthor;
  Ablation ablation = Ablation::kNone;
  std::optional<int> k_retrieve;  // unset means default_k_retrieve(task)
  std::uint64_t seed = 0;
  std::string model_id = "gpt-3.5-turbo";
  std::string judge_model_id = "gpt-4-turbo";
  std::string cache_dir;

  double temperature = 0.0;
  double judge_temperature = 0.0;
  int max_tokens = 512;
  int judge_max_tokens = 512;
  int judge_samples = 1;
  int max_gist_examples = 10;
  int max_in_flight = 4;
  double failure_threshold = 0.05;
  bool render_roles = false;
  bool stemming = false;

  int k_for(TaskKind task) const { return k_retrieve.value_or(default_k_retrieve(task)); }

  bool operator==(const RunConfig&) const = default;
};

/// Every invariant violation of an instance; empty means valid.
std::vector<std::string> validate_instance(const TaskInstance& instance);

/// Every incompatible setting/ablation/task combination; empty means valid.
std::vector<std::string> validate_run_config(const RunConfig& config, TaskKind task);

// Canonical JSON encoding. Decoders throw LoadError naming the field path.
Json to_json(const HistoryEntry& entry);
Json to_json(const UserHistory& history);
Json to_json(const UserProfile& profile);
Json to_json(const AuthorRole& author);
Json to_json(const TaskInstance& instance);
Json to_json(const RunConfig& config);

HistoryEntry history_entry_from_json(const Json& json, const std::string& path = "");
UserProfile user_profile_from_json(const Json& json);
TaskInstance task_instance_from_json(const Json& json, long index = -1);
RunConfig run_config_from_json(const Json& json);

}  // namespace gistkit
