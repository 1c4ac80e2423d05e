#pragma once
// Summarizer backed by an HTTP service that fronts a chat-completion model.
//
// Request body:  {"good_summaries": [...], "bad_summaries": [...], "categories": [...]}
// Response body: {"success_strategies": [...], "pitfalls_to_avoid": [...], "reasoning_guidelines": [...]}
//
// Transport or protocol failures surface as SummarizerUnavailable.

#include <chrono>
#include <string>

#include "searchlab/experience.hpp"

namespace searchlab {

inline constexpr const char* kSummarizerEndpointEnv = "SEARCHLAB_SUMMARIZER_ENDPOINT";

struct RemoteSummarizerConfig {
    // e.g. http://127.0.0.1:8080/v1/experience
    std::string endpoint;
    std::chrono::milliseconds timeout{10000};
};

nlohmann::json make_summarizer_request(const std::vector<TrajectorySummary>& good,
                                       const std::vector<TrajectorySummary>& bad);

// Parses a reply body; throws SummarizerUnavailable on malformed replies.
ExperienceDelta parse_summarizer_reply(const std::string& body);

class RemoteSummarizer final : public Summarizer {
public:
    explicit RemoteSummarizer(RemoteSummarizerConfig cfg);

    ExperienceDelta generate(const std::vector<TrajectorySummary>& good,
                             const std::vector<TrajectorySummary>& bad) override;

    const RemoteSummarizerConfig& config() const { return cfg_; }

private:
    RemoteSummarizerConfig cfg_;
    std::string base_;  // scheme://host[:port]
    std::string path_;
};

}  // namespace searchlab
