#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace taillight {

/// Source of phrase lists for rendered prompts. Implementations throw
/// Error{LlmUnavailable} when no usable answer can be produced.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    virtual std::vector<std::string> query(const std::string& prompt, std::size_t max_phrases) = 0;
};

/// Scripted answers: exact prompt text -> phrase list (or a raw response string).
class FixtureLlmClient final : public LlmClient {
public:
    FixtureLlmClient() = default;
    explicit FixtureLlmClient(std::map<std::string, std::vector<std::string>> answers)
        : answers_(std::move(answers)) {}

    static FixtureLlmClient from_file(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    void set(const std::string& prompt, std::vector<std::string> phrases) {
        answers_[prompt] = std::move(phrases);
    }
    std::vector<std::string> query(const std::string& prompt, std::size_t max_phrases) override;

    std::size_t call_count() const noexcept { return calls_; }
    const std::map<std::string, std::vector<std::string>>& answers() const noexcept { return answers_; }

private:
    std::map<std::string, std::vector<std::string>> answers_;
    std::size_t calls_ = 0;
};

/// POST {"prompt", "max_phrases"} -> {"phrases": [...]}.
class HttpLlmClient final : public LlmClient {
public:
    HttpLlmClient(std::string url, std::chrono::milliseconds timeout);

    /// Reads TAILLIGHT_LLM_URL and TAILLIGHT_LLM_TIMEOUT_MS (default 30000).
    static HttpLlmClient from_env();

    std::vector<std::string> query(const std::string& prompt, std::size_t max_phrases) override;

private:
    std::string origin_;
    std::string path_;
    std::chrono::milliseconds timeout_;
};

}  // namespace taillight
