#include "searchlab/synth_env.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "searchlab/jsonl.hpp"
#include "searchlab/rng.hpp"

namespace searchlab {

namespace {

constexpr int kMaxPairOccurrences = 3;
constexpr int kQueryAttempts = 400;
constexpr int kDistractorAttempts = 60;

const std::set<std::string, std::less<>>& reserved_words() {
    static const std::set<std::string, std::less<>> words = {"a",  "an", "the",   "of",    "what", "is",
                                                              "given", "that", "who", "which", "and"};
    return words;
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> make_entity_names(int count, Rng& rng) {
    static constexpr std::string_view kOnsets = "bdfgklmnprstvz";
    static constexpr std::string_view kVowels = "aeiou";
    static constexpr std::string_view kCodas = "lnrsx";
    std::set<std::string, std::less<>> seen;
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(count));
    while (static_cast<int>(names.size()) < count) {
        const std::size_t syllables = 2 + rng.below(2);
        std::string name;
        for (std::size_t i = 0; i < syllables; ++i) {
            name += kOnsets[rng.below(kOnsets.size())];
            name += kVowels[rng.below(kVowels.size())];
        }
        if (rng.bernoulli(0.5)) name += kCodas[rng.below(kCodas.size())];
        if (reserved_words().count(name) != 0 || !seen.insert(name).second) continue;
        names.push_back(std::move(name));
    }
    return names;
}

// Incrementally built fact base that enforces the generation constraints:
// (subject, relation) determines the object, and no (entity, relation) token
// pair occurs in more than kMaxPairOccurrences facts. The second rule keeps
// every "entity relation" search within the top-3 results.
class FactBuilder {
public:
    std::optional<std::string> object_of(const std::string& subject, const std::string& relation) const {
        auto it = by_subject_.find({subject, relation});
        if (it == by_subject_.end()) return std::nullopt;
        return facts_[it->second].object;
    }

    bool can_add(const std::string& s, const std::string& r, const std::string& o) const {
        if (s == o) return false;
        if (by_subject_.count({s, r}) != 0) return false;
        return pair_count(s, r) < kMaxPairOccurrences && pair_count(o, r) < kMaxPairOccurrences;
    }

    bool add(const std::string& s, const std::string& r, const std::string& o) {
        if (!can_add(s, r, o)) return false;
        Fact f;
        f.id = fmt::format("f{:05d}", facts_.size());
        f.subject = s;
        f.relation = r;
        f.object = o;
        f.text = render_fact_text(s, r, o);
        by_subject_[{s, r}] = facts_.size();
        ++pairs_[{s, r}];
        ++pairs_[{o, r}];
        used_entities_.insert(s);
        used_entities_.insert(o);
        facts_.push_back(std::move(f));
        return true;
    }

    const std::set<std::string>& used_entities() const { return used_entities_; }
    std::vector<Fact> take() { return std::move(facts_); }

private:
    int pair_count(const std::string& e, const std::string& r) const {
        auto it = pairs_.find({e, r});
        return it == pairs_.end() ? 0 : it->second;
    }

    std::vector<Fact> facts_;
    std::map<std::pair<std::string, std::string>, std::size_t> by_subject_;
    std::map<std::pair<std::string, std::string>, int> pairs_;
    std::set<std::string> used_entities_;
};

int sample_hops(const std::vector<HopWeight>& dist, Rng& rng) {
    double total = 0.0;
    for (const auto& hw : dist) total += hw.weight;
    double u = rng.uniform() * total;
    for (const auto& hw : dist) {
        if (u < hw.weight) return hw.hops;
        u -= hw.weight;
    }
    return dist.back().hops;
}

std::string strip_trailing(std::string s, std::string_view chars) {
    while (!s.empty() && chars.find(s.back()) != std::string_view::npos) s.pop_back();
    return s;
}

}  // namespace

std::string render_fact_text(std::string_view subject, std::string_view relation, std::string_view object) {
    return fmt::format("{} {} {}", subject, relation, object);
}

KnowledgeBase::KnowledgeBase(std::vector<Fact> facts) : facts_(std::move(facts)) {
    std::set<std::string, std::less<>> ids;
    for (std::size_t i = 0; i < facts_.size(); ++i) {
        if (!ids.insert(facts_[i].id).second) throw std::invalid_argument("duplicate fact id: " + facts_[i].id);
        for (const auto& term : search_terms(facts_[i].text)) index_[term].push_back(i);
    }
}

const Fact* KnowledgeBase::find(std::string_view fact_id) const {
    auto it = std::find_if(facts_.begin(), facts_.end(), [&](const Fact& f) { return f.id == fact_id; });
    return it == facts_.end() ? nullptr : &*it;
}

std::vector<std::string> search_terms(std::string_view text) {
    auto tokens = split_ws(lowercase(text));
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

SearchResult search(const KnowledgeBase& kb, std::string_view query_text, int k) {
    SearchResult result;
    const auto terms = search_terms(query_text);
    if (terms.empty() || k <= 0) return result;

    std::map<std::size_t, int> overlap;
    for (const auto& term : terms) {
        auto it = kb.index().find(term);
        if (it == kb.index().end()) continue;
        for (std::size_t pos : it->second) ++overlap[pos];
    }

    const double denom = static_cast<double>(terms.size());
    std::vector<SearchHit> hits;
    hits.reserve(overlap.size());
    for (const auto& [pos, count] : overlap) {
        const Fact& f = kb.facts()[pos];
        hits.push_back({f.id, f.text, static_cast<double>(count) / denom});
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.fact_id < b.fact_id;
    });
    if (hits.size() > static_cast<std::size_t>(k)) hits.resize(static_cast<std::size_t>(k));
    result.hits = std::move(hits);
    return result;
}

void WorldConfig::validate() const {
    if (num_entities <= 0) throw std::invalid_argument("world.num_entities must be > 0");
    if (num_queries <= 0) throw std::invalid_argument("world.num_queries must be > 0");
    if (distractor_facts < 0) throw std::invalid_argument("world.distractor_facts must be >= 0");
    if (hop_distribution.empty()) throw std::invalid_argument("world.hop_distribution must not be empty");
    std::set<int> seen;
    for (const auto& hw : hop_distribution) {
        if (hw.hops < 0 || hw.hops > 3) throw std::invalid_argument("world.hop_distribution.hops must be in 0..3");
        if (!(hw.weight > 0.0)) throw std::invalid_argument("world.hop_distribution.weight must be > 0");
        if (!seen.insert(hw.hops).second) throw std::invalid_argument("world.hop_distribution.hops must be distinct");
    }
}

const Query* World::find_query(std::string_view id) const {
    auto it = std::find_if(queries.begin(), queries.end(), [&](const Query& q) { return q.id == id; });
    return it == queries.end() ? nullptr : &*it;
}

const std::vector<std::string>& relation_vocabulary() {
    static const std::vector<std::string> relations = {
        "born-in",   "capital-of", "founded-by", "located-in", "spouse-of",  "member-of",
        "works-for", "author-of",  "child-of",   "mentor-of",  "rival-of",   "neighbor-of",
        "ruled-by",  "named-after", "part-of",   "allied-with"};
    return relations;
}

World generate_world(const WorldConfig& cfg) {
    cfg.validate();
    int max_hops = 0;
    for (const auto& hw : cfg.hop_distribution) max_hops = std::max(max_hops, hw.hops);
    // A chain of h hops visits h + 1 distinct entities; a stated fact needs two.
    if (cfg.num_entities < std::max(2, max_hops + 1)) {
        throw InfeasibleConfig(fmt::format("world.num_entities={} cannot realize {}-hop queries", cfg.num_entities,
                                           max_hops));
    }

    Rng rng(cfg.seed);
    const auto entities = make_entity_names(cfg.num_entities, rng);
    const auto& relations = relation_vocabulary();
    auto pick_entity = [&] { return entities[rng.below(entities.size())]; };
    auto pick_relation = [&] { return relations[rng.below(relations.size())]; };

    FactBuilder builder;
    std::vector<Query> queries;
    std::set<std::string, std::less<>> texts;

    for (int qi = 0; qi < cfg.num_queries; ++qi) {
        const int hops = sample_hops(cfg.hop_distribution, rng);
        bool made = false;
        for (int attempt = 0; attempt < kQueryAttempts && !made; ++attempt) {
            QuestionPlan plan;
            std::string answer;
            if (hops == 0) {
                const std::string s = pick_entity();
                const std::string r = pick_relation();
                std::string o;
                if (auto existing = builder.object_of(s, r)) {
                    o = *existing;
                } else {
                    o = pick_entity();
                    if (!builder.add(s, r, o)) continue;
                }
                plan.start_entity = s;
                plan.relations = {};
                plan.embedded_fact = Fact{"", s, r, o, render_fact_text(s, r, o)};
                answer = o;
            } else {
                std::vector<std::string> chain{pick_entity()};
                bool ok = true;
                for (int h = 0; h < hops && ok; ++h) {
                    std::string r = pick_relation();
                    if (!plan.relations.empty() && r == plan.relations.back()) {
                        ok = false;
                        break;
                    }
                    std::string o;
                    if (auto existing = builder.object_of(chain.back(), r)) {
                        o = *existing;
                    } else {
                        o = pick_entity();
                        if (std::find(chain.begin(), chain.end(), o) != chain.end()) {
                            ok = false;
                            break;
                        }
                        ok = builder.add(chain.back(), r, o);
                    }
                    if (std::find(chain.begin(), chain.end(), o) != chain.end()) ok = false;
                    plan.relations.push_back(r);
                    chain.push_back(o);
                }
                if (!ok) continue;
                plan.start_entity = chain.front();
                answer = chain.back();
            }
            std::string text = render_question(plan);
            if (!texts.insert(text).second) continue;
            queries.push_back(Query{fmt::format("q{:04d}", qi), std::move(text), {answer}, hops});
            made = true;
        }
        if (!made) {
            throw InfeasibleConfig(fmt::format(
                "could not generate {} distinct queries with hops={} from world.num_entities={}", cfg.num_queries, hops,
                cfg.num_entities));
        }
    }

    // Distractors reuse names already present in the fact base under other relations.
    const std::vector<std::string> used(builder.used_entities().begin(), builder.used_entities().end());
    for (int d = 0; d < cfg.distractor_facts; ++d) {
        for (int attempt = 0; attempt < kDistractorAttempts; ++attempt) {
            const std::string& s = used[rng.below(used.size())];
            if (builder.add(s, pick_relation(), pick_entity())) break;
        }
    }

    World world;
    world.config = cfg;
    world.kb = KnowledgeBase(builder.take());
    world.queries = std::move(queries);
    return world;
}

int oracle_min_tools(const Query& q) { return q.required_hops; }

std::string render_question(const QuestionPlan& plan) {
    if (plan.embedded_fact) {
        const Fact& f = *plan.embedded_fact;
        return fmt::format("given that {} {} {}, what is the {} of {}?", f.subject, f.relation, f.object, f.relation,
                           f.subject);
    }
    std::string text = "what is";
    for (auto it = plan.relations.rbegin(); it != plan.relations.rend(); ++it) text += fmt::format(" the {} of", *it);
    text += fmt::format(" {}?", plan.start_entity);
    return text;
}

std::optional<QuestionPlan> parse_question(std::string_view text) {
    auto tokens = split_ws(lowercase(text));
    for (auto& t : tokens) t = strip_trailing(t, "?,.");
    QuestionPlan plan;
    std::size_t pos = 0;
    if (tokens.size() >= 5 && tokens[0] == "given" && tokens[1] == "that") {
        Fact f;
        f.subject = tokens[2];
        f.relation = tokens[3];
        f.object = tokens[4];
        f.text = render_fact_text(f.subject, f.relation, f.object);
        plan.embedded_fact = f;
        pos = 5;
    }
    if (pos + 2 > tokens.size() || tokens[pos] != "what" || tokens[pos + 1] != "is") return std::nullopt;
    pos += 2;
    std::vector<std::string> outer_first;
    while (pos + 2 < tokens.size() && tokens[pos] == "the" && tokens[pos + 2] == "of") {
        outer_first.push_back(tokens[pos + 1]);
        pos += 3;
    }
    if (pos + 1 != tokens.size() || outer_first.empty()) return std::nullopt;
    plan.start_entity = tokens[pos];
    plan.relations.assign(outer_first.rbegin(), outer_first.rend());

    if (plan.embedded_fact) {
        // The stated fact answers the question only if it names the asked
        // relation of the asked entity.
        if (plan.relations.size() != 1 || plan.embedded_fact->relation != plan.relations[0] ||
            plan.embedded_fact->subject != plan.start_entity) {
            return std::nullopt;
        }
        plan.relations.clear();
    }
    return plan;
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
    nlohmann::json dist = nlohmann::json::array();
    for (const auto& hw : c.hop_distribution) dist.push_back({{"hops", hw.hops}, {"weight", hw.weight}});
    j = nlohmann::json{{"num_entities", c.num_entities},
                       {"num_queries", c.num_queries},
                       {"hop_distribution", dist},
                       {"seed", c.seed},
                       {"distractor_facts", c.distractor_facts}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
    c = WorldConfig{};
    if (j.contains("num_entities")) j.at("num_entities").get_to(c.num_entities);
    if (j.contains("num_queries")) j.at("num_queries").get_to(c.num_queries);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("distractor_facts")) j.at("distractor_facts").get_to(c.distractor_facts);
    if (j.contains("hop_distribution")) {
        c.hop_distribution.clear();
        for (const auto& item : j.at("hop_distribution")) {
            c.hop_distribution.push_back({item.at("hops").get<int>(), item.at("weight").get<double>()});
        }
    }
}

void to_json(nlohmann::json& j, const Fact& f) {
    j = nlohmann::json{
        {"id", f.id}, {"subject", f.subject}, {"relation", f.relation}, {"object", f.object}, {"text", f.text}};
}

void from_json(const nlohmann::json& j, Fact& f) {
    j.at("id").get_to(f.id);
    j.at("subject").get_to(f.subject);
    j.at("relation").get_to(f.relation);
    j.at("object").get_to(f.object);
    j.at("text").get_to(f.text);
}

void save_world(const World& world, const std::filesystem::path& path) {
    jsonl::Writer w(path);
    nlohmann::json cfg = world.config;
    cfg["record"] = "config";
    w.write(cfg);
    for (const auto& f : world.kb.facts()) {
        nlohmann::json j = f;
        j["record"] = "fact";
        w.write(j);
    }
    for (const auto& q : world.queries) {
        nlohmann::json j = q;
        j["record"] = "query";
        w.write(j);
    }
}

World load_world(const std::filesystem::path& path) {
    World world;
    std::vector<Fact> facts;
    bool have_config = false;
    for (const auto& rec : jsonl::read_all(path)) {
        const std::string kind = rec.value("record", "");
        if (kind == "config") {
            world.config = rec.get<WorldConfig>();
            have_config = true;
        } else if (kind == "fact") {
            facts.push_back(rec.get<Fact>());
        } else if (kind == "query") {
            world.queries.push_back(rec.get<Query>());
        } else {
            throw std::runtime_error(path.string() + ": unknown record kind '" + kind + "'");
        }
    }
    if (!have_config) throw std::runtime_error(path.string() + ": world dump has no config record");
    for (const auto& f : facts) {
        if (f.text != render_fact_text(f.subject, f.relation, f.object)) {
            throw std::runtime_error(path.string() + ": fact " + f.id + " text does not match its triple");
        }
    }
    world.kb = KnowledgeBase(std::move(facts));
    return world;
}

}  // namespace searchlab
