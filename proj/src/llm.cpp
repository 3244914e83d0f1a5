#include "gistkit/llm.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "gistkit/hash.hpp"
#include "gistkit/random.hpp"
#include "gistkit/text.hpp"
#include "fs_util.hpp"

namespace gistkit::llm {

namespace fs = std::filesystem;

std::string CompletionRequest::key() const {
  Json canonical = {
      {"model_id", model_id},
      {"system", prompt.system ? Json(*prompt.system) : Json(nullptr)},
      {"user", prompt.user},
      {"temperature", temperature},
      {"max_tokens", max_tokens},
  };
  if (sample != 0) canonical["sample"] = sample;
  return sha256_hex(canonical.dump());
}

void validate_request(const CompletionRequest& request) {
  if (!(request.temperature >= 0.0 && request.temperature <= 2.0)) {
    throw ContractViolation("temperature must be in [0, 2], got " +
                            std::to_string(request.temperature));
  }
  if (request.max_tokens < 1) {
    throw ContractViolation("max_tokens must be positive, got " +
                            std::to_string(request.max_tokens));
  }
}

bool is_retryable_status(int status) { return status == 0 || status == 429 || status >= 500; }

// --- cache -----------------------------------------------------------------

namespace {

Json reply_to_json(const ProviderReply& reply) {
  return {{"text", reply.text},
          {"usage",
           {{"prompt_tokens", reply.usage.prompt_tokens},
            {"completion_tokens", reply.usage.completion_tokens}}}};
}

ProviderReply reply_from_json(const Json& json) {
  ProviderReply reply;
  reply.text = json.at("text").get<std::string>();
  const Json& usage = json.at("usage");
  reply.usage.prompt_tokens = usage.at("prompt_tokens").get<int>();
  reply.usage.completion_tokens = usage.at("completion_tokens").get<int>();
  return reply;
}

}  // namespace

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory " + dir_ + ": " + ec.message());
}

std::string ResponseCache::path_for(const std::string& key) const {
  return (fs::path(dir_) / (key + ".json")).string();
}

std::string ResponseCache::checksum(const Json& body) { return sha256_hex(body.dump()); }

std::optional<ProviderReply> ResponseCache::load(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    Json file = Json::parse(in);
    const Json& body = file.at("body");
    if (file.at("checksum").get<std::string>() != checksum(body)) return std::nullopt;
    return reply_from_json(body);
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::store(const std::string& key, const ProviderReply& reply) const {
  Json body = reply_to_json(reply);
  Json file = {{"key", key}, {"body", body}, {"checksum", checksum(body)}};
  detail::write_file_atomic(path_for(key), file.dump(2) + "\n");
}

// --- gateway ---------------------------------------------------------------

std::string BatchOutcome::summary() const {
  if (failures.empty()) return {};
  std::vector<std::string> parts;
  for (const auto& failure : failures) {
    parts.push_back(std::to_string(failure.index) + " (" + failure.message + ")");
  }
  return "failed requests: " + join(parts, "; ");
}

Gateway::Gateway(std::shared_ptr<Backend> backend, GatewayOptions options)
    : backend_(std::move(backend)), options_(std::move(options)) {
  if (!backend_) throw ContractViolation("gateway needs a backend");
  if (options_.max_attempts < 1) throw ContractViolation("max_attempts must be >= 1");
  if (!options_.cache_dir.empty()) disk_.emplace(options_.cache_dir);
}

CompletionResponse Gateway::fetch(const CompletionRequest& request) {
  int last_status = 0;
  std::string last_message;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    ++provider_calls_;
    const auto start = std::chrono::steady_clock::now();
    try {
      ProviderReply reply = backend_->call(request);
      CompletionResponse response;
      response.text = std::move(reply.text);
      response.usage = reply.usage;
      response.latency_ms = static_cast<long>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                                  std::chrono::steady_clock::now() - start)
                                                  .count());
      return response;
    } catch (const GatewayError& e) {
      last_status = e.last_status();
      last_message = e.what();
      if (!is_retryable_status(last_status)) break;
      if (attempt < options_.max_attempts) {
        std::this_thread::sleep_for(options_.base_delay * (1 << (attempt - 1)));
      }
    }
  }
  throw GatewayError(last_status, backend_->name() + " provider failed (status " +
                                      std::to_string(last_status) + "): " + last_message);
}

CompletionResponse Gateway::complete(const CompletionRequest& request) {
  validate_request(request);
  const std::string key = request.key();

  std::promise<ProviderReply> promise;
  std::shared_future<ProviderReply> follower;
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) {
      return {it->second.text, it->second.usage, true, 0};
    }
    if (auto it = in_flight_.find(key); it != in_flight_.end()) {
      follower = it->second;
    } else {
      in_flight_.emplace(key, promise.get_future().share());
    }
  }
  if (follower.valid()) {
    ProviderReply reply = follower.get();
    return {reply.text, reply.usage, false, 0};
  }

  auto finish = [&](const ProviderReply& reply) {
    std::lock_guard lock(mutex_);
    memory_[key] = reply;
    in_flight_.erase(key);
    promise.set_value(reply);
  };

  try {
    if (disk_) {
      if (auto hit = disk_->load(key)) {
        finish(*hit);
        return {hit->text, hit->usage, true, 0};
      }
    }
    CompletionResponse response = fetch(request);
    ProviderReply reply{response.text, response.usage};
    if (disk_) disk_->store(key, reply);
    finish(reply);
    return response;
  } catch (...) {
    {
      std::lock_guard lock(mutex_);
      in_flight_.erase(key);
    }
    promise.set_exception(std::current_exception());
    throw;
  }
}

BatchOutcome Gateway::complete_batch(const std::vector<CompletionRequest>& requests,
                                     int max_in_flight) {
  if (max_in_flight < 1) throw ContractViolation("max_in_flight must be >= 1");
  BatchOutcome outcome;
  outcome.responses.resize(requests.size());
  std::vector<std::optional<BatchFailure>> failures(requests.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        outcome.responses[i] = complete(requests[i]);
      } catch (const Error& e) {
        failures[i] = BatchFailure{i, e.code(), e.what()};
      } catch (const std::exception& e) {
        failures[i] = BatchFailure{i, ErrorCode::kGateway, e.what()};
      }
    }
  };

  const std::size_t threads =
      std::min<std::size_t>(static_cast<std::size_t>(max_in_flight), requests.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& thread : pool) thread.join();
  }
  for (auto& failure : failures) {
    if (failure) outcome.failures.push_back(std::move(*failure));
  }
  return outcome;
}

// --- mock ------------------------------------------------------------------

namespace {

struct PromptSection {
  std::string name;
  std::string body;
};

std::vector<PromptSection> prompt_sections(const std::string& text) {
  std::vector<PromptSection> sections;
  for (const auto& line : split_lines(text)) {
    if (line.starts_with("### ")) {
      sections.push_back({line.substr(4), {}});
    } else if (!sections.empty()) {
      sections.back().body += line + "\n";
    }
  }
  return sections;
}

// Distinct tokens of at least four characters, in first-seen order.
std::vector<std::string> content_words(const std::string& text) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto& token : tokenize(text)) {
    if (token.size() >= 4 && seen.insert(token).second) out.push_back(std::move(token));
  }
  return out;
}

// Text of every line in `text` that starts with one of the prefixes.
std::string field_lines(const std::string& text, const std::vector<std::string>& prefixes) {
  std::string out;
  for (const auto& line : split_lines(text)) {
    for (const auto& prefix : prefixes) {
      if (line.starts_with(prefix)) out += line.substr(prefix.size()) + "\n";
    }
  }
  return out;
}

std::vector<std::string> pick(std::vector<std::string> pool, std::size_t n, SeededRng& rng) {
  rng.shuffle(pool);
  if (pool.size() > n) pool.resize(n);
  return pool;
}

std::string pick_one(const std::vector<std::string>& pool, SeededRng& rng) {
  return pool[static_cast<std::size_t>(rng.below(pool.size()))];
}

std::string draw_sentence(const std::vector<std::string>& pool, std::size_t n, SeededRng& rng) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back(pick_one(pool, rng));
  std::string out = join(words, " ");
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

const std::vector<std::string> kStyles = {"concise", "formal", "technical", "descriptive",
                                          "plain", "enthusiastic"};
const std::vector<std::string> kFiller = {"approach", "method", "study", "analysis", "results",
                                          "framework"};

std::string mock_lamp_profile(const std::string& user, SeededRng& rng) {
  auto words = content_words(field_lines(user, {"Input: ", "Output: "}));
  if (words.empty()) words = kFiller;
  auto keywords = pick(words, 4, rng);
  auto topics = pick(words, 2, rng);
  auto preferences = pick(words, 2, rng);
  auto style = pick(kStyles, 2, rng);
  return "Keywords: " + bracket_list(keywords) + "\nTopics: " + bracket_list(topics) +
         "\nWriting Style: " + bracket_list(style) + "\nPreferences: " + bracket_list(preferences);
}

std::string mock_psw_profile(const std::string& user, SeededRng& rng) {
  auto words = content_words(field_lines(user, {"Title: "}));
  if (words.size() < 6) {
    for (const auto& w : kFiller) words.push_back(w);
  }
  std::vector<std::string> interests;
  auto chosen = pick(words, 6, rng);
  for (std::size_t i = 0; i + 1 < chosen.size(); i += 2) {
    interests.push_back(chosen[i] + " " + chosen[i + 1]);
  }
  return "Research Interests: " + bracket_list(interests);
}

std::string mock_generation(prompt::TemplateId id, const std::string& user, SeededRng& rng) {
  std::string source;
  for (const auto& section : prompt_sections(user)) {
    if (section.name.ends_with("Task") || section.name == "User Profile") source += section.body;
  }
  auto pool = content_words(source);
  if (pool.empty()) pool = kFiller;
  switch (id) {
    case prompt::TemplateId::kPsw2: {
      std::vector<std::string> lines;
      for (int i = 1; i <= 3; ++i) {
        lines.push_back(std::to_string(i) + ". " + draw_sentence(pool, 6 + rng.below(5), rng) + "?");
      }
      return join(lines, "\n");
    }
    case prompt::TemplateId::kPsw3:
      return draw_sentence(pool, 40 + rng.below(31), rng) + ".";
    default:
      return draw_sentence(pool, 6 + rng.below(7), rng);
  }
}

std::string mock_geval(SeededRng& rng) {
  Json scores = {
      {"consistency", 1 + rng.below(5)},
      {"fluency", 1 + rng.below(3)},
      {"relevance", 1 + rng.below(5)},
      {"novelty", 1 + rng.below(3)},
  };
  return "Comparing the prediction with the references criterion by criterion.\n" + scores.dump();
}

}  // namespace

std::uint64_t MockBackend::seed_of(const std::string& key) {
  if (key.size() < 16) throw ContractViolation("request key too short: " + key);
  return std::stoull(key.substr(0, 16), nullptr, 16);
}

ProviderReply MockBackend::call(const CompletionRequest& request) {
  ++calls_;
  const std::string& user = request.prompt.user;
  ProviderReply reply;
  reply.usage.prompt_tokens = static_cast<int>(tokenize(user).size());

  for (const auto& entry : overrides_) {
    if (user.find(entry.needle) != std::string::npos) {
      reply.text = entry.reply;
      reply.usage.completion_tokens = static_cast<int>(tokenize(reply.text).size());
      return reply;
    }
  }

  const std::uint64_t seed = seed_of(request.key());
  SeededRng rng(seed);
  using prompt::TemplateId;
  switch (request.prompt.template_id) {
    case TemplateId::kProfileGenLamp:
      reply.text = mock_lamp_profile(user, rng);
      break;
    case TemplateId::kProfileGenPsw:
    case TemplateId::kUp0:
      reply.text = mock_psw_profile(user, rng);
      break;
    case TemplateId::kLamp1:
      reply.text = seed % 2 == 0 ? "[1]" : "[2]";
      break;
    case TemplateId::kLamp2: {
      std::vector<std::string> categories;
      for (const auto& line : split_lines(user)) {
        if (!line.starts_with("Category ")) continue;
        auto colon = line.find(": ");
        if (colon != std::string::npos) categories.push_back(line.substr(colon + 2));
      }
      reply.text = categories.empty() ? "unknown" : categories[seed % categories.size()];
      break;
    }
    case TemplateId::kLamp3:
      reply.text = std::to_string(1 + seed % 5);
      break;
    case TemplateId::kGeval:
      reply.text = mock_geval(rng);
      break;
    default:
      reply.text = mock_generation(request.prompt.template_id, user, rng);
      break;
  }
  reply.usage.completion_tokens = static_cast<int>(tokenize(reply.text).size());
  return reply;
}

std::shared_ptr<Backend> make_backend(const std::string& kind) {
  if (kind == "mock") return std::make_shared<MockBackend>();
  if (kind == "remote") return std::make_shared<RemoteBackend>(RemoteBackend::options_from_env());
  throw ContractViolation("unknown backend '" + kind + "' (expected mock or remote)");
}

}  // namespace gistkit::llm
