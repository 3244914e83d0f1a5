#include "httplib.h"

#include <cstdlib>
#include <thread>

#include "gistkit/datasets.hpp"
#include "gistkit/errors.hpp"
#include "url.hpp"

namespace gistkit::datasets {

namespace {

constexpr const char* kPaperFields = "title,abstract,year,authors,referenceCount";
constexpr int kPageSize = 100;

std::string string_or_empty(const Json& json, const char* key) {
  if (!json.contains(key) || !json[key].is_string()) return {};
  return json[key].get<std::string>();
}

}  // namespace

SemanticScholarClient::SemanticScholarClient(Options options)
    : options_(std::move(options)), limiter_(options_.min_interval) {
  auto url = detail::split_url(options_.base_url);
  origin_ = url.origin;
  prefix_ = url.path;
}

SemanticScholarClient::Options SemanticScholarClient::options_from_env() {
  Options options;
  if (const char* key = std::getenv("S2_API_KEY")) options.api_key = key;
  if (const char* base = std::getenv("S2_BASE_URL"); base != nullptr && *base != '\0') {
    options.base_url = base;
  }
  return options;
}

Json SemanticScholarClient::get(const std::string& path,
                                const std::multimap<std::string, std::string>& params) {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(std::chrono::seconds(60));
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("x-api-key", options_.api_key);

  int status = 0;
  std::string message;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    limiter_.acquire();
    auto result = client.Get(prefix_ + path, params, headers);
    if (!result) {
      status = 0;
      message = "transport error: " + httplib::to_string(result.error());
    } else if (result->status == 200) {
      Json body = Json::parse(result->body, nullptr, false);
      if (body.is_discarded()) throw ProtocolError("scholarly API returned invalid JSON for " + path);
      return body;
    } else {
      status = result->status;
      message = "HTTP " + std::to_string(status) + ": " + result->body.substr(0, 200);
      if (status != 429 && status < 500) break;
    }
    if (attempt < options_.max_attempts) {
      std::this_thread::sleep_for(options_.base_delay * (1 << (attempt - 1)));
    }
  }
  throw GatewayError(status, "scholarly API " + path + " failed: " + message);
}

PaperRecord SemanticScholarClient::parse_paper(const Json& json) {
  if (!json.is_object()) throw ProtocolError("paper record is not an object");
  PaperRecord paper;
  paper.paper_id = string_or_empty(json, "paperId");
  paper.title = string_or_empty(json, "title");
  paper.abstract = string_or_empty(json, "abstract");
  if (json.contains("year") && json["year"].is_number_integer()) paper.year = json["year"].get<int>();
  if (json.contains("referenceCount") && json["referenceCount"].is_number_integer()) {
    paper.reference_count = json["referenceCount"].get<std::size_t>();
  }
  if (json.contains("authors") && json["authors"].is_array()) {
    for (const auto& author : json["authors"]) {
      std::string id = string_or_empty(author, "authorId");
      if (id.empty()) id = "name:" + string_or_empty(author, "name");
      paper.authors.push_back({id, string_or_empty(author, "name")});
    }
  }
  if (json.contains("references") && json["references"].is_array()) {
    for (const auto& ref : json["references"]) {
      auto title = string_or_empty(ref, "title");
      if (!title.empty()) paper.reference_titles.push_back(title);
    }
  }
  return paper;
}

std::vector<PaperRecord> SemanticScholarClient::search(const std::string& query, int year_from,
                                                       int limit) {
  std::vector<PaperRecord> out;
  for (int offset = 0; offset < limit;) {
    const int page = std::min(kPageSize, limit - offset);
    Json body = get("/paper/search", {{"query", query},
                                      {"year", std::to_string(year_from) + "-"},
                                      {"fields", kPaperFields},
                                      {"offset", std::to_string(offset)},
                                      {"limit", std::to_string(page)}});
    if (!body.contains("data") || !body["data"].is_array()) {
      throw ProtocolError("paper search response lacks a data array");
    }
    for (const auto& item : body["data"]) out.push_back(parse_paper(item));
    if (body["data"].size() < static_cast<std::size_t>(page) || !body.contains("next")) break;
    offset = body["next"].get<int>();
  }
  return out;
}

std::vector<PaperRecord> SemanticScholarClient::author_papers(const std::string& author_id, int limit) {
  Json body = get("/author/" + author_id + "/papers",
                  {{"fields", "title,abstract,year"}, {"limit", std::to_string(limit)}});
  if (!body.contains("data") || !body["data"].is_array()) {
    throw ProtocolError("author papers response lacks a data array");
  }
  std::vector<PaperRecord> out;
  for (const auto& item : body["data"]) out.push_back(parse_paper(item));
  return out;
}

std::vector<std::string> SemanticScholarClient::reference_titles(const std::string& paper_id) {
  Json body = get("/paper/" + paper_id + "/references", {{"fields", "title"}, {"limit", "1000"}});
  if (!body.contains("data") || !body["data"].is_array()) {
    throw ProtocolError("references response lacks a data array");
  }
  std::vector<std::string> out;
  for (const auto& item : body["data"]) {
    if (item.contains("citedPaper")) {
      auto title = string_or_empty(item["citedPaper"], "title");
      if (!title.empty()) out.push_back(std::move(title));
    }
  }
  return out;
}

}  // namespace gistkit::datasets
