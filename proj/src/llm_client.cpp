#include "taillight/llm_client.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "taillight/error.hpp"

namespace taillight {

using json = nlohmann::json;

FixtureLlmClient FixtureLlmClient::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open fixture " + path.string(), path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("fixture: ") + e.what(), path.string());
    }
    if (!doc.is_object()) throw Error(ErrorCode::InvalidConfig, "fixture must be a JSON object", path.string());
    std::map<std::string, std::vector<std::string>> answers;
    for (const auto& [prompt, value] : doc.items()) {
        if (value.is_string())
            answers[prompt] = {value.get<std::string>()};
        else if (value.is_array())
            answers[prompt] = value.get<std::vector<std::string>>();
        else
            throw Error(ErrorCode::InvalidConfig, "fixture entry for \"" + prompt + "\" is not a list", path.string());
    }
    return FixtureLlmClient(std::move(answers));
}

void FixtureLlmClient::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write fixture " + path.string(), path.string());
    out << json(answers_).dump(2) << '\n';
}

std::vector<std::string> FixtureLlmClient::query(const std::string& prompt, std::size_t max_phrases) {
    ++calls_;
    auto it = answers_.find(prompt);
    if (it == answers_.end()) throw Error(ErrorCode::LlmUnavailable, "fixture has no answer for \"" + prompt + "\"");
    std::vector<std::string> out = it->second;
    if (max_phrases > 0 && out.size() > max_phrases) out.resize(max_phrases);
    return out;
}

HttpLlmClient::HttpLlmClient(std::string url, std::chrono::milliseconds timeout) : timeout_(timeout) {
    // Split "scheme://host[:port]/path" into origin and path.
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        origin_ = url;
        path_ = "/";
    } else {
        origin_ = url.substr(0, path_start);
        path_ = url.substr(path_start);
    }
}

HttpLlmClient HttpLlmClient::from_env() {
    const char* url = std::getenv("TAILLIGHT_LLM_URL");
    if (url == nullptr || *url == '\0') throw Error(ErrorCode::LlmUnavailable, "TAILLIGHT_LLM_URL is not set");
    long timeout_ms = 30000;
    if (const char* t = std::getenv("TAILLIGHT_LLM_TIMEOUT_MS"); t != nullptr && *t != '\0') {
        char* end = nullptr;
        timeout_ms = std::strtol(t, &end, 10);
        if (end == t || timeout_ms <= 0)
            throw Error(ErrorCode::InvalidConfig, "TAILLIGHT_LLM_TIMEOUT_MS must be a positive integer");
    }
    return HttpLlmClient(url, std::chrono::milliseconds(timeout_ms));
}

std::vector<std::string> HttpLlmClient::query(const std::string& prompt, std::size_t max_phrases) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    const json body = {{"prompt", prompt}, {"max_phrases", max_phrases}};
    auto res = client.Post(path_, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::LlmUnavailable, "request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw Error(ErrorCode::LlmUnavailable, "endpoint returned status " + std::to_string(res->status));
    try {
        auto doc = json::parse(res->body);
        auto phrases = doc.at("phrases").get<std::vector<std::string>>();
        if (max_phrases > 0 && phrases.size() > max_phrases) phrases.resize(max_phrases);
        return phrases;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::LlmUnavailable, std::string("malformed response body: ") + e.what());
    }
}

}  // namespace taillight
