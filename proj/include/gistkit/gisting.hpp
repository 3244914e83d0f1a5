#pragma once

// Gist(H) -> profile, multi-author composition, and the ablation transforms.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gistkit/llm.hpp"
#include "gistkit/types.hpp"

namespace gistkit::gisting {

using ProfilePart = std::pair<std::string, UserProfile>;  // (author user_id, profile)
using ProfileParts = std::vector<ProfilePart>;

struct ComposedProfile {
  std::string text;
  ProfileParts parts;
  std::string order_fingerprint;
};

/// Profile plus anything the parse could not fill.
struct GistResult {
  UserProfile profile;
  std::vector<std::string> warnings;  // "ParsePartial: ..." entries
};

/// The last `max_examples` entries, most recent first.
std::vector<HistoryEntry> select_gist_entries(const UserHistory& history, int max_examples);

/// Profile-generation request for one user. Throws EmptyHistory.
llm::CompletionRequest gist_request(const UserHistory& history, TaskFamily family,
                                    const RunConfig& config);

/// Parses a gist response. Section headers are "<Name>:" (optionally wrapped
/// in '*'), case-insensitive, followed on the same line by a bracketed
/// comma-separated list. Unknown sections are ignored; missing expected
/// sections produce a ParsePartial warning and an empty list.
GistResult parse_profile(const std::string& user_id, TaskFamily family, const std::string& text);

/// gist_request + one backend call + parse_profile.
GistResult gist(const UserHistory& history, TaskFamily family, llm::Gateway& gateway,
                const RunConfig& config);

/// Joins "Author <n> (<id>):" blocks in the given order. With `roles`, the
/// header also names the author role. Throws ContractViolation on an empty
/// list or duplicate user ids.
ComposedProfile compose(const ProfileParts& parts, const std::vector<AuthorRole>* roles = nullptr);

/// Author-order ablations; profile ablations and none are the identity.
/// Positions are renumbered 0..l-1 in the returned order.
std::vector<AuthorRole> permute_authors(const std::vector<AuthorRole>& authors, Ablation ablation,
                                        std::uint64_t seed);

/// Profile ablations. Returns nullopt for profile_removed. profile_random
/// draws donors without replacement; a pool smaller than `parts` is a
/// ContractViolation.
std::optional<ProfileParts> ablate_profiles(const ProfileParts& parts, Ablation ablation,
                                            const std::vector<UserProfile>& donor_pool,
                                            std::uint64_t seed);

/// Persists profiles as JSON under <dir>/<family>/<user>-<history hash>.json.
class ProfileStore {
 public:
  explicit ProfileStore(std::string dir) : dir_(std::move(dir)) {}

  std::optional<GistResult> load(const UserHistory& history, TaskFamily family,
                                 const std::string& model_id) const;
  void save(const UserHistory& history, TaskFamily family, const std::string& model_id,
            const GistResult& result) const;

  static std::string history_hash(const UserHistory& history);

 private:
  std::string path_for(const UserHistory& history, TaskFamily family) const;

  std::string dir_;
};

}  // namespace gistkit::gisting
