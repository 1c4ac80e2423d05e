#include "searchlab/remote_summarizer.hpp"

#include <httplib.h>

namespace searchlab {

nlohmann::json make_summarizer_request(const std::vector<TrajectorySummary>& good,
                                       const std::vector<TrajectorySummary>& bad) {
    nlohmann::json req;
    req["good_summaries"] = good;
    req["bad_summaries"] = bad;
    req["categories"] = {category_key(GuidelineCategory::SuccessStrategies),
                         category_key(GuidelineCategory::PitfallsToAvoid),
                         category_key(GuidelineCategory::ReasoningGuidelines)};
    return req;
}

ExperienceDelta parse_summarizer_reply(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        if (!j.is_object()) throw SummarizerUnavailable("summarizer reply is not an object");
        return j.get<ExperienceDelta>();
    } catch (const SummarizerUnavailable&) {
        throw;
    } catch (const std::exception& e) {
        throw SummarizerUnavailable(std::string("malformed summarizer reply: ") + e.what());
    }
}

RemoteSummarizer::RemoteSummarizer(RemoteSummarizerConfig cfg) : cfg_(std::move(cfg)) {
    const auto scheme_end = cfg_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("summarizer.endpoint must be an http(s) URL");
    const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
    base_ = cfg_.endpoint.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
}

ExperienceDelta RemoteSummarizer::generate(const std::vector<TrajectorySummary>& good,
                                           const std::vector<TrajectorySummary>& bad) {
    httplib::Client client(base_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    const auto res = client.Post(path_, make_summarizer_request(good, bad).dump(), "application/json");
    if (!res) throw SummarizerUnavailable("summarizer unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw SummarizerUnavailable("summarizer returned HTTP " + std::to_string(res->status));
    return parse_summarizer_reply(res->body);
}

}  // namespace searchlab
