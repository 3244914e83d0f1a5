#include "gistkit/prompt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "gistkit/errors.hpp"
#include "gistkit/hash.hpp"
#include "gistkit/text.hpp"

namespace gistkit::prompt {

namespace detail {
const std::map<std::string, std::string>& embedded_template_sources();
}

namespace {

constexpr std::array<std::pair<TemplateId, std::string_view>, 15> kTemplateNames{{
    {TemplateId::kLamp1, "lamp1"},
    {TemplateId::kLamp2, "lamp2"},
    {TemplateId::kLamp3, "lamp3"},
    {TemplateId::kLamp4, "lamp4"},
    {TemplateId::kLamp5, "lamp5"},
    {TemplateId::kLamp6, "lamp6"},
    {TemplateId::kLamp7, "lamp7"},
    {TemplateId::kUp0, "up0"},
    {TemplateId::kPsw1, "psw1"},
    {TemplateId::kPsw2, "psw2"},
    {TemplateId::kPsw3, "psw3"},
    {TemplateId::kPsw4, "psw4"},
    {TemplateId::kProfileGenLamp, "profile_gen_lamp"},
    {TemplateId::kProfileGenPsw, "profile_gen_psw"},
    {TemplateId::kGeval, "geval"},
}};

constexpr std::string_view kOpen = "{{";
constexpr std::string_view kClose = "}}";
constexpr std::string_view kExamples = "examples";
constexpr std::string_view kIndex = "index";

struct Token {
  std::string name;
  std::size_t begin;
  std::size_t end;  // one past the closing braces
};

std::vector<Token> scan_tokens(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t pos = 0;
  while ((pos = line.find(kOpen, pos)) != std::string_view::npos) {
    std::size_t close = line.find(kClose, pos + kOpen.size());
    if (close == std::string_view::npos) {
      throw ContractViolation("unterminated placeholder in template line: " + std::string(line));
    }
    tokens.push_back({std::string(line.substr(pos + 2, close - pos - 2)), pos, close + 2});
    pos = close + 2;
  }
  return tokens;
}

// Marker kind of a line: '?' keep-if-set, '!' keep-if-empty, 0 for none.
struct LineMarker {
  char kind = 0;
  std::string name;
  std::string_view rest;
};

LineMarker line_marker(std::string_view line) {
  if (line.size() > 4 && line.starts_with(kOpen) && (line[2] == '?' || line[2] == '!')) {
    std::size_t close = line.find(kClose);
    if (close != std::string_view::npos) {
      return {line[2], std::string(line.substr(3, close - 3)), line.substr(close + 2)};
    }
  }
  return {0, {}, line};
}

std::vector<std::string> split_words(std::string_view text) {
  std::istringstream stream{std::string(text)};
  std::vector<std::string> words;
  std::string word;
  while (stream >> word) words.push_back(word);
  return words;
}

void trim_trailing_blank(std::vector<std::string>& lines) {
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
}

// Values never reintroduce placeholder delimiters into the output.
std::string sanitize(std::string value) {
  for (std::string_view seq : {kOpen, kClose}) {
    std::size_t pos = 0;
    const std::string broken = std::string(1, seq[0]) + " " + std::string(1, seq[1]);
    while ((pos = value.find(seq, pos)) != std::string::npos) {
      value.replace(pos, seq.size(), broken);
      pos += broken.size();
    }
  }
  return value;
}

using Lookup = std::function<std::optional<std::string>(const std::string&)>;

std::string substitute(std::string_view line, const Lookup& lookup) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& token : scan_tokens(line)) {
    out.append(line.substr(cursor, token.begin - cursor));
    auto value = lookup(token.name);
    out += value ? *value : std::string();
    cursor = token.end;
  }
  out.append(line.substr(cursor));
  return out;
}

std::vector<std::string> render_lines(const std::vector<std::string>& lines, const Lookup& lookup) {
  std::vector<std::string> out;
  for (const auto& line : lines) {
    LineMarker marker = line_marker(line);
    if (marker.kind != 0) {
      auto value = lookup(marker.name);
      const bool set = value && !value->empty();
      if ((marker.kind == '?') != set) continue;
    }
    out.push_back(substitute(marker.rest, lookup));
  }
  return out;
}

std::string render_examples(const PromptTemplate& tmpl, const std::vector<ItemGroup>& groups) {
  std::vector<std::string> blocks;
  int index = 0;
  for (const auto& group : groups) {
    std::vector<std::string> items;
    for (const auto& item : group.items) {
      ++index;
      const std::string index_text = std::to_string(index);
      Lookup lookup = [&](const std::string& name) -> std::optional<std::string> {
        if (name == kIndex) return index_text;
        auto it = item.find(name);
        if (it == item.end()) return std::nullopt;
        return sanitize(it->second);
      };
      items.push_back(join(render_lines(tmpl.item_lines, lookup), "\n"));
    }
    if (items.empty()) continue;
    std::string block = group.label.empty() ? std::string() : sanitize(group.label) + "\n";
    block += join(items, "\n\n");
    blocks.push_back(std::move(block));
  }
  return join(blocks, "\n\n");
}

}  // namespace

std::string_view to_string(TemplateId id) {
  for (const auto& [key, name] : kTemplateNames) {
    if (key == id) return name;
  }
  return "unknown";
}

std::optional<TemplateId> parse_template_id(std::string_view text) {
  for (const auto& [key, name] : kTemplateNames) {
    if (name == text) return key;
  }
  return std::nullopt;
}

std::vector<TemplateId> all_template_ids() {
  std::vector<TemplateId> out;
  for (const auto& entry : kTemplateNames) out.push_back(entry.first);
  return out;
}

TemplateId template_for(TaskKind task) {
  switch (task) {
    case TaskKind::kLamp1: return TemplateId::kLamp1;
    case TaskKind::kLamp2: return TemplateId::kLamp2;
    case TaskKind::kLamp3: return TemplateId::kLamp3;
    case TaskKind::kLamp4: return TemplateId::kLamp4;
    case TaskKind::kLamp5: return TemplateId::kLamp5;
    case TaskKind::kLamp6: return TemplateId::kLamp6;
    case TaskKind::kLamp7: return TemplateId::kLamp7;
    case TaskKind::kUp0: return TemplateId::kUp0;
    case TaskKind::kPsw1: return TemplateId::kPsw1;
    case TaskKind::kPsw2: return TemplateId::kPsw2;
    case TaskKind::kPsw3: return TemplateId::kPsw3;
    case TaskKind::kPsw4: return TemplateId::kPsw4;
  }
  throw ContractViolation("no template for task");
}

TemplateId profile_template_for(TaskFamily family) {
  return family == TaskFamily::kLamp ? TemplateId::kProfileGenLamp : TemplateId::kProfileGenPsw;
}

PromptTemplate PromptTemplate::parse(std::string_view source) {
  PromptTemplate tmpl;
  bool have_id = false;
  bool in_item = false;
  std::set<std::string> item_names;

  for (const auto& line : split_lines(source)) {
    if (line.starts_with("@template")) {
      auto words = split_words(line);
      if (words.size() != 2) throw ContractViolation("malformed @template line");
      auto id = parse_template_id(words[1]);
      if (!id) throw ContractViolation("unknown template id '" + words[1] + "'");
      tmpl.id = *id;
      have_id = true;
    } else if (line.starts_with("@placeholders")) {
      auto words = split_words(line);
      tmpl.placeholders.insert(words.begin() + 1, words.end());
    } else if (line.starts_with("@item_fields")) {
      auto words = split_words(line);
      for (auto it = words.begin() + 1; it != words.end(); ++it) {
        bool optional = it->starts_with("?");
        std::string name = optional ? it->substr(1) : *it;
        tmpl.item_fields.push_back({name, optional});
        item_names.insert(name);
      }
    } else if (line.starts_with("@section")) {
      auto words = split_words(line.substr(8));
      Section section;
      if (!words.empty() && words.back().starts_with("?")) {
        section.gate = words.back().substr(1);
        words.pop_back();
      }
      section.name = join(words, " ");
      if (section.name.empty()) throw ContractViolation("section without a heading");
      tmpl.sections.push_back(std::move(section));
      in_item = false;
    } else if (line.starts_with("@item")) {
      if (tmpl.has_items()) throw ContractViolation("template declares more than one @item block");
      in_item = true;
    } else if (in_item) {
      tmpl.item_lines.push_back(line);
    } else {
      if (tmpl.sections.empty()) {
        if (trim(line).empty()) continue;
        throw ContractViolation("template text before the first @section");
      }
      tmpl.sections.back().lines.push_back(line);
    }
  }
  if (!have_id) throw ContractViolation("template source lacks @template");
  for (auto& section : tmpl.sections) trim_trailing_blank(section.lines);
  trim_trailing_blank(tmpl.item_lines);

  // Every placeholder used is declared, and every declared one is used.
  std::set<std::string> used;
  bool uses_examples = false;
  for (const auto& section : tmpl.sections) {
    if (!section.gate.empty()) {
      if (section.gate == kExamples) {
        uses_examples = true;
      } else if (!tmpl.placeholders.contains(section.gate)) {
        throw ContractViolation("undeclared gate placeholder '" + section.gate + "'");
      }
      used.insert(section.gate);
    }
    for (const auto& line : section.lines) {
      LineMarker marker = line_marker(line);
      if (marker.kind != 0) used.insert(marker.name);
      for (const auto& token : scan_tokens(marker.rest)) {
        if (token.name == kExamples) {
          uses_examples = true;
          continue;
        }
        if (!tmpl.placeholders.contains(token.name)) {
          throw ContractViolation("undeclared placeholder '" + token.name + "'");
        }
        used.insert(token.name);
      }
    }
  }
  for (const auto& name : tmpl.placeholders) {
    if (!used.contains(name)) throw ContractViolation("declared placeholder '" + name + "' is unused");
  }
  if (uses_examples != tmpl.has_items()) {
    throw ContractViolation("{{examples}} and @item must appear together");
  }
  for (const auto& line : tmpl.item_lines) {
    LineMarker marker = line_marker(line);
    if (marker.kind != 0 && !item_names.contains(marker.name)) {
      throw ContractViolation("undeclared item field '" + marker.name + "'");
    }
    for (const auto& token : scan_tokens(marker.rest)) {
      if (token.name != kIndex && !item_names.contains(token.name)) {
        throw ContractViolation("undeclared item field '" + token.name + "'");
      }
    }
  }
  return tmpl;
}

const PromptTemplate& get_template(TemplateId id) {
  static const std::map<TemplateId, PromptTemplate> templates = [] {
    std::map<TemplateId, PromptTemplate> out;
    for (const auto& [name, source] : detail::embedded_template_sources()) {
      PromptTemplate tmpl = PromptTemplate::parse(source);
      if (to_string(tmpl.id) != name) {
        throw ContractViolation("template file " + name + " declares id " +
                                std::string(to_string(tmpl.id)));
      }
      out.emplace(tmpl.id, std::move(tmpl));
    }
    return out;
  }();
  auto it = templates.find(id);
  if (it == templates.end()) {
    throw ContractViolation("template '" + std::string(to_string(id)) + "' is not compiled in");
  }
  return it->second;
}

Json to_json(const Binding& binding) {
  Json groups = Json::array();
  for (const auto& group : binding.groups) {
    groups.push_back({{"label", group.label}, {"items", group.items}});
  }
  return {{"values", binding.values}, {"groups", std::move(groups)}};
}

Binding binding_from_json(const Json& json) {
  Binding binding;
  if (json.contains("values")) binding.values = json.at("values").get<Values>();
  if (json.contains("groups")) {
    for (const auto& group : json.at("groups")) {
      binding.groups.push_back(
          {group.value("label", ""), group.at("items").get<std::vector<Values>>()});
    }
  }
  return binding;
}

std::string binding_hash(TemplateId id, const Binding& binding) {
  Json canonical = to_json(binding);
  canonical["template"] = to_string(id);
  return sha256_hex(canonical.dump());
}

PromptBundle render(TemplateId id, const Binding& binding) {
  const PromptTemplate& tmpl = get_template(id);

  std::vector<std::string> missing;
  for (const auto& name : tmpl.placeholders) {
    if (!binding.values.contains(name)) missing.push_back(name);
  }
  for (const auto& group : binding.groups) {
    for (const auto& item : group.items) {
      for (const auto& field : tmpl.item_fields) {
        if (!field.optional && !item.contains(field.name)) missing.push_back("item." + field.name);
      }
    }
  }
  if (!binding.groups.empty() && !tmpl.has_items()) {
    missing.emplace_back("(template " + std::string(to_string(id)) + " takes no items)");
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    throw ContractViolation("render " + std::string(to_string(id)) +
                            ": missing placeholders: " + join(missing, ", "));
  }

  const std::string examples = tmpl.has_items() ? render_examples(tmpl, binding.groups) : "";
  Lookup lookup = [&](const std::string& name) -> std::optional<std::string> {
    if (name == kExamples) return examples;
    auto it = binding.values.find(name);
    if (it == binding.values.end()) return std::nullopt;
    return sanitize(it->second);
  };

  PromptBundle bundle;
  bundle.template_id = id;
  std::vector<std::string> blocks;
  for (const auto& section : tmpl.sections) {
    if (!section.gate.empty()) {
      auto gate = lookup(section.gate);
      if (!gate || gate->empty()) continue;
    }
    std::vector<std::string> lines = render_lines(section.lines, lookup);
    trim_trailing_blank(lines);
    blocks.push_back("### " + section.name + "\n" + join(lines, "\n"));
    bundle.sections.push_back(section.name);
  }
  bundle.user = join(blocks, "\n\n") + "\n";
  bundle.binding_hash = binding_hash(id, binding);
  return bundle;
}

PromptBundle render_geval(std::string_view prediction, const std::vector<std::string>& references) {
  if (references.empty()) throw ContractViolation("render_geval: references must be non-empty");
  Binding binding;
  binding.values["prediction"] = std::string(prediction);
  binding.values["references"] = bracket_list(references);
  return render(TemplateId::kGeval, binding);
}

// ---------------------------------------------------------------------------

namespace {

std::string meta_value(const HistoryEntry& entry, const std::string& key) {
  auto it = entry.meta.find(key);
  return it == entry.meta.end() ? std::string() : it->second;
}

void put_optional(Values& values, const std::string& name, std::string value) {
  if (!value.empty()) values[name] = std::move(value);
}

std::string typical_length(const UserHistory& history) {
  if (history.entries.empty()) return {};
  std::size_t words = 0;
  for (const auto& entry : history.entries) words += tokenize(entry.output).size();
  const auto mean = static_cast<double>(words) / static_cast<double>(history.entries.size());
  return bracket_list({"about " + std::to_string(std::lround(mean)) + " words"});
}

}  // namespace

Values item_values(TemplateId id, const HistoryEntry& entry) {
  Values v;
  switch (id) {
    case TemplateId::kLamp1:
      v["title"] = entry.input;
      v["abstract"] = entry.output;
      put_optional(v, "reason", meta_value(entry, "reason"));
      put_optional(v, "citations", meta_value(entry, "citations"));
      break;
    case TemplateId::kLamp2:
      v["article"] = entry.input;
      v["category"] = entry.output;
      put_optional(v, "title", meta_value(entry, "title"));
      put_optional(v, "reason", meta_value(entry, "reason"));
      break;
    case TemplateId::kLamp3:
      v["review"] = entry.input;
      v["rating"] = entry.output;
      break;
    case TemplateId::kLamp4:
      v["article"] = entry.input;
      v["headline"] = entry.output;
      break;
    case TemplateId::kLamp5:
      v["abstract"] = entry.input;
      v["title"] = entry.output;
      break;
    case TemplateId::kLamp6:
      v["content"] = entry.input;
      v["subject"] = entry.output;
      put_optional(v, "style", meta_value(entry, "style"));
      break;
    case TemplateId::kLamp7:
      v["original"] = entry.input;
      v["paraphrased"] = entry.output;
      break;
    case TemplateId::kProfileGenLamp:
      v["input"] = entry.input;
      v["output"] = entry.output;
      break;
    case TemplateId::kUp0:
    case TemplateId::kPsw1:
    case TemplateId::kPsw2:
    case TemplateId::kPsw3:
    case TemplateId::kPsw4:
    case TemplateId::kProfileGenPsw:
      // PSW history entries are papers: input is the title, output the abstract.
      v["title"] = entry.input;
      v["abstract"] = entry.output;
      break;
    case TemplateId::kGeval:
      throw ContractViolation("geval takes no history items");
  }
  return v;
}

std::optional<int> most_common_rating(const UserHistory& history) {
  std::map<int, int> counts;
  for (const auto& entry : history.entries) {
    const std::string text = trim(entry.output);
    if (text.size() == 1 && text[0] >= '1' && text[0] <= '5') ++counts[text[0] - '0'];
  }
  std::optional<int> best;
  int best_count = 0;
  for (const auto& [rating, count] : counts) {
    if (count > best_count) {
      best = rating;
      best_count = count;
    }
  }
  return best;
}

Binding task_binding(const TaskInstance& instance, const TaskPromptInput& input) {
  const TemplateId id = template_for(instance.task);
  Binding binding;
  Values& v = binding.values;

  for (const auto& group : input.snippets) {
    ItemGroup items{group.label, {}};
    for (const auto& snippet : group.snippets) items.items.push_back(item_values(id, snippet.entry));
    binding.groups.push_back(std::move(items));
  }

  const UserProfile* profile = input.profile ? &*input.profile : nullptr;
  auto field = [&](const std::vector<std::string>& list) {
    return profile != nullptr ? bracket_list(list) : std::string();
  };
  const std::vector<std::string> candidates = instance.candidates.value_or(std::vector<std::string>{});

  switch (instance.task) {
    case TaskKind::kLamp1:
      v["keywords"] = field(profile ? profile->keywords : std::vector<std::string>{});
      v["topics"] = field(profile ? profile->topics : std::vector<std::string>{});
      v["input"] = instance.input;
      v["option_1"] = !candidates.empty() ? candidates[0] : "";
      v["option_2"] = candidates.size() > 1 ? candidates[1] : "";
      break;
    case TaskKind::kLamp2: {
      v["keywords"] = field(profile ? profile->keywords : std::vector<std::string>{});
      v["topics"] = field(profile ? profile->topics : std::vector<std::string>{});
      v["input"] = instance.input;
      v["title"] = instance.context_value("title");
      std::vector<std::string> lines;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        lines.push_back("Category " + std::to_string(i + 1) + ": " + candidates[i]);
      }
      v["categories"] = join(lines, "\n");
      break;
    }
    case TaskKind::kLamp3: {
      v["rating_patterns"] = field(profile ? profile->preferences : std::vector<std::string>{});
      std::optional<int> most = input.history ? most_common_rating(*input.history) : std::nullopt;
      v["score_most"] = most ? std::to_string(*most) : "";
      v["input"] = instance.input;
      break;
    }
    case TaskKind::kLamp4:
      v["writing_style"] = field(profile ? profile->writing_style : std::vector<std::string>{});
      v["content_patterns"] = field(profile ? profile->topics : std::vector<std::string>{});
      v["input"] = instance.input;
      break;
    case TaskKind::kLamp5:
      v["writing_style"] = field(profile ? profile->writing_style : std::vector<std::string>{});
      v["title_patterns"] = field(profile ? profile->preferences : std::vector<std::string>{});
      v["input"] = instance.input;
      break;
    case TaskKind::kLamp6:
      v["keywords"] = field(profile ? profile->keywords : std::vector<std::string>{});
      v["topics"] = field(profile ? profile->topics : std::vector<std::string>{});
      v["input"] = instance.input;
      break;
    case TaskKind::kLamp7:
      v["writing_style"] = field(profile ? profile->writing_style : std::vector<std::string>{});
      v["tone"] = field(profile ? profile->preferences : std::vector<std::string>{});
      v["length"] = profile != nullptr && input.history ? typical_length(*input.history) : "";
      if (profile != nullptr && v["length"].empty()) v["length"] = "[]";
      v["input"] = instance.input;
      break;
    case TaskKind::kUp0:
      break;
    case TaskKind::kPsw1: {
      v["profile"] = input.composed_profile.value_or("");
      std::vector<std::string> lines;
      int n = 0;
      for (const auto& title : split_lines(instance.input)) {
        if (trim(title).empty()) continue;
        lines.push_back("Reference " + std::to_string(++n) + ": " + trim(title));
      }
      v["references"] = join(lines, "\n");
      break;
    }
    case TaskKind::kPsw2:
      v["profile"] = input.composed_profile.value_or("");
      v["input"] = instance.input;
      break;
    case TaskKind::kPsw3:
    case TaskKind::kPsw4: {
      v["profile"] = input.composed_profile.value_or("");
      v["input"] = instance.input;
      auto it = instance.context.find("research_questions");
      v["research_questions"] =
          it == instance.context.end() || it->second.empty() ? "" : bracket_list(it->second);
      break;
    }
  }
  return binding;
}

Binding gist_binding(TaskFamily family, const std::vector<HistoryEntry>& entries) {
  const TemplateId id = profile_template_for(family);
  Binding binding;
  ItemGroup group;
  for (const auto& entry : entries) group.items.push_back(item_values(id, entry));
  binding.groups.push_back(std::move(group));
  return binding;
}

}  // namespace gistkit::prompt
