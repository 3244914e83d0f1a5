#pragma once

// Prompt templates and their renderer.
//
// Template sources live in prompts/src/<id>.tmpl and are compiled in. Source
// grammar, one directive per line:
//
//   @template <id>
//   @placeholders <name> ...          declared section placeholders
//   @item_fields <name> ?<name> ...   per-item fields; '?' marks optional
//   @section <Heading> [?<gate>]      section dropped when <gate> renders empty
//   @item                             per-item block for {{examples}}
//
// Body lines use {{name}} substitution. A line starting with {{?name}} is kept
// only when `name` is non-empty, one starting with {{!name}} only when it is
// empty. {{examples}} expands to the rendered item groups and {{index}} is the
// 1-based running item number.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gistkit/retrieval.hpp"
#include "gistkit/types.hpp"

namespace gistkit::prompt {

enum class TemplateId {
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
  kProfileGenLamp,
  kProfileGenPsw,
  kGeval,
};

std::string_view to_string(TemplateId id);
std::optional<TemplateId> parse_template_id(std::string_view text);
std::vector<TemplateId> all_template_ids();
TemplateId template_for(TaskKind task);
TemplateId profile_template_for(TaskFamily family);

struct Section {
  std::string name;
  std::string gate;  // empty: always rendered
  std::vector<std::string> lines;
};

struct ItemField {
  std::string name;
  bool optional = false;
};

struct PromptTemplate {
  TemplateId id = TemplateId::kLamp1;
  std::vector<Section> sections;
  std::set<std::string> placeholders;
  std::vector<ItemField> item_fields;
  std::vector<std::string> item_lines;

  bool has_items() const { return !item_lines.empty(); }

  /// Parses and validates a template source; throws ContractViolation on
  /// undeclared or unused placeholders and malformed directives.
  static PromptTemplate parse(std::string_view source);
};

/// The compiled-in template for an id.
const PromptTemplate& get_template(TemplateId id);

using Values = std::map<std::string, std::string>;

/// A run of items rendered under an optional label line ("Author 1 (u1):").
struct ItemGroup {
  std::string label;
  std::vector<Values> items;

  bool operator==(const ItemGroup&) const = default;
};

struct Binding {
  Values values;
  std::vector<ItemGroup> groups;

  bool operator==(const Binding&) const = default;
};

Json to_json(const Binding& binding);
Binding binding_from_json(const Json& json);

struct PromptBundle {
  std::optional<std::string> system;
  std::string user;
  TemplateId template_id = TemplateId::kLamp1;
  std::string binding_hash;
  std::vector<std::string> sections;  // headings actually rendered, in order
};

std::string binding_hash(TemplateId id, const Binding& binding);

/// Renders a template. Throws ContractViolation listing every missing
/// placeholder or required item field.
PromptBundle render(TemplateId id, const Binding& binding);

/// G-Eval judge prompt for one prediction against its references.
PromptBundle render_geval(std::string_view prediction, const std::vector<std::string>& references);

// ---------------------------------------------------------------------------
// Bindings for the task and gisting prompts.

struct SnippetGroup {
  std::string label;
  std::vector<retrieval::RetrievedSnippet> snippets;
};

struct TaskPromptInput {
  /// LaMP tasks: the single user's profile feeding the structured fields.
  std::optional<UserProfile> profile;
  /// PSW tasks: the composed multi-author profile block.
  std::optional<std::string> composed_profile;
  std::vector<SnippetGroup> snippets;
  /// History used for derived profile fields (LaMP-3 most common rating,
  /// LaMP-7 typical length). Null in zero-shot runs.
  const UserHistory* history = nullptr;
};

/// Per-item template fields for one history entry under a task's template.
Values item_values(TemplateId id, const HistoryEntry& entry);

Binding task_binding(const TaskInstance& instance, const TaskPromptInput& input);

/// Binding for the profile-generation prompt over already-selected entries.
Binding gist_binding(TaskFamily family, const std::vector<HistoryEntry>& entries);

/// Most frequent integer rating among history outputs; ties pick the lower.
std::optional<int> most_common_rating(const UserHistory& history);

}  // namespace gistkit::prompt
