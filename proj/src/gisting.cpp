#include "gistkit/gisting.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "fs_util.hpp"
#include "gistkit/errors.hpp"
#include "gistkit/hash.hpp"
#include "gistkit/prompt.hpp"
#include "gistkit/random.hpp"
#include "gistkit/text.hpp"

namespace gistkit::gisting {

namespace {

std::string strip_decoration(std::string_view text) {
  std::string out = trim(text);
  while (!out.empty() && (out.front() == '*' || out.front() == '-' || out.front() == '#')) {
    out = trim(std::string_view(out).substr(1));
  }
  while (!out.empty() && out.back() == '*') out = trim(std::string_view(out).substr(0, out.size() - 1));
  return out;
}

struct ParsedLine {
  std::string name;  // lowercase
  std::vector<std::string> items;
};

std::optional<ParsedLine> parse_line(const std::string& line) {
  const auto colon = line.find(':');
  if (colon == std::string::npos) return std::nullopt;
  std::string name = to_lower(strip_decoration(std::string_view(line).substr(0, colon)));
  std::string rest = strip_decoration(std::string_view(line).substr(colon + 1));
  if (name.empty() || rest.size() < 2 || rest.front() != '[') return std::nullopt;
  const auto close = rest.rfind(']');
  if (close == std::string::npos || close == 0) return std::nullopt;

  ParsedLine parsed{name, {}};
  std::string_view body = std::string_view(rest).substr(1, close - 1);
  std::size_t start = 0;
  while (start <= body.size()) {
    auto comma = body.find(',', start);
    auto piece = trim(body.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start));
    if (!piece.empty()) parsed.items.push_back(std::move(piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parsed;
}

}  // namespace

std::vector<HistoryEntry> select_gist_entries(const UserHistory& history, int max_examples) {
  if (max_examples < 1) throw ContractViolation("max_gist_examples must be >= 1");
  std::vector<HistoryEntry> out;
  const auto& entries = history.entries;
  for (auto it = entries.rbegin();
       it != entries.rend() && out.size() < static_cast<std::size_t>(max_examples); ++it) {
    out.push_back(*it);
  }
  return out;
}

llm::CompletionRequest gist_request(const UserHistory& history, TaskFamily family,
                                    const RunConfig& config) {
  if (history.entries.empty()) throw EmptyHistory(history.user_id);
  auto entries = select_gist_entries(history, config.max_gist_examples);
  llm::CompletionRequest request;
  request.model_id = config.model_id;
  request.prompt = prompt::render(prompt::profile_template_for(family),
                                  prompt::gist_binding(family, entries));
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  return request;
}

GistResult parse_profile(const std::string& user_id, TaskFamily family, const std::string& text) {
  GistResult result;
  result.profile.user_id = user_id;
  result.profile.raw_text = text;

  std::map<std::string, std::vector<std::string>*> fields;
  if (family == TaskFamily::kLamp) {
    fields = {{"keywords", &result.profile.keywords},
              {"topics", &result.profile.topics},
              {"writing style", &result.profile.writing_style},
              {"preferences", &result.profile.preferences}};
  } else {
    fields = {{"research interests", &result.profile.research_interests}};
  }

  std::set<std::string> found;
  for (const auto& line : split_lines(text)) {
    auto parsed = parse_line(line);
    if (!parsed) continue;
    auto it = fields.find(parsed->name);
    if (it == fields.end() || found.contains(parsed->name)) continue;
    *it->second = std::move(parsed->items);
    found.insert(parsed->name);
  }
  if (trim(text).empty()) {
    result.warnings.push_back("ParsePartial: empty gist response for " + user_id);
    return result;
  }
  std::vector<std::string> missing;
  for (const auto& [name, _] : fields) {
    if (!found.contains(name)) missing.push_back(name);
  }
  if (!missing.empty()) {
    result.warnings.push_back("ParsePartial: " + user_id + " gist lacks " + join(missing, ", "));
  }
  return result;
}

GistResult gist(const UserHistory& history, TaskFamily family, llm::Gateway& gateway,
                const RunConfig& config) {
  auto request = gist_request(history, family, config);
  auto response = gateway.complete(request);
  return parse_profile(history.user_id, family, response.text);
}

ComposedProfile compose(const ProfileParts& parts, const std::vector<AuthorRole>* roles) {
  if (parts.empty()) throw ContractViolation("compose needs at least one profile");
  std::set<std::string> seen;
  std::vector<std::string> ids;
  for (const auto& [user_id, _] : parts) {
    if (!seen.insert(user_id).second) {
      throw ContractViolation("compose: duplicate user id " + user_id);
    }
    ids.push_back(user_id);
  }
  if (roles != nullptr && roles->size() != parts.size()) {
    throw ContractViolation("compose: roles and profiles differ in length");
  }

  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    std::string header = "Author " + std::to_string(i + 1) + " (" + parts[i].first;
    if (roles != nullptr) {
      const AuthorRole& role = (*roles)[i];
      if (role.user_id != parts[i].first) {
        throw ContractViolation("compose: role list order differs from profile order");
      }
      if (role.role != AuthorRoleKind::kUnspecified) {
        header += ", " + std::string(to_string(role.role));
      }
    }
    header += "):";
    blocks.push_back(header + "\n" + parts[i].second.raw_text);
  }
  return {join(blocks, "\n\n"), parts, sequence_fingerprint(ids)};
}

std::vector<AuthorRole> permute_authors(const std::vector<AuthorRole>& authors, Ablation ablation,
                                        std::uint64_t seed) {
  if (authors.empty()) throw ContractViolation("permute_authors needs at least one author");
  std::vector<AuthorRole> out = authors;
  if (ablation == Ablation::kSwapFirst) {
    std::rotate(out.begin(), out.begin() + 1, out.end());
  } else if (ablation == Ablation::kSwapRandom) {
    SeededRng rng(seed);
    rng.shuffle(out);
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].position = static_cast<int>(i);
  return out;
}

std::optional<ProfileParts> ablate_profiles(const ProfileParts& parts, Ablation ablation,
                                            const std::vector<UserProfile>& donor_pool,
                                            std::uint64_t seed) {
  if (ablation == Ablation::kProfileRemoved) return std::nullopt;
  if (ablation != Ablation::kProfileRandom) return parts;
  if (donor_pool.size() < parts.size()) {
    throw ContractViolation("profile_random needs " + std::to_string(parts.size()) +
                            " donor profiles, pool has " + std::to_string(donor_pool.size()));
  }
  std::vector<std::size_t> order(donor_pool.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(seed);
  rng.shuffle(order);
  ProfileParts out = parts;
  for (std::size_t i = 0; i < out.size(); ++i) out[i].second = donor_pool[order[i]];
  return out;
}

// --- profile store -----------------------------------------------------------

std::string ProfileStore::history_hash(const UserHistory& history) {
  return sha256_hex(to_json(history).dump());
}

std::string ProfileStore::path_for(const UserHistory& history, TaskFamily family) const {
  // User ids are opaque; hash them so any id maps to a safe file name.
  const std::string name = sha256_hex(history.user_id).substr(0, 16) + "-" +
                           history_hash(history).substr(0, 32) + ".json";
  return (std::filesystem::path(dir_) / std::string(to_string(family)) / name).string();
}

std::optional<GistResult> ProfileStore::load(const UserHistory& history, TaskFamily family,
                                             const std::string& model_id) const {
  std::ifstream in(path_for(history, family), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    Json json = Json::parse(in);
    if (json.at("model_id").get<std::string>() != model_id ||
        json.at("user_id").get<std::string>() != history.user_id) {
      return std::nullopt;
    }
    GistResult result;
    result.profile = user_profile_from_json(json.at("profile"));
    result.warnings = json.at("warnings").get<std::vector<std::string>>();
    return result;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ProfileStore::save(const UserHistory& history, TaskFamily family, const std::string& model_id,
                        const GistResult& result) const {
  Json json = {{"user_id", history.user_id},
               {"family", to_string(family)},
               {"history_hash", history_hash(history)},
               {"model_id", model_id},
               {"profile", to_json(result.profile)},
               {"warnings", result.warnings}};
  detail::write_file_atomic(path_for(history, family), json.dump(2) + "\n");
}

}  // namespace gistkit::gisting
