#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "searchlab/reward.hpp"
#include "searchlab/synth_env.hpp"

using namespace searchlab;

namespace {

WorldConfig small_config(std::uint64_t seed = 1) {
    WorldConfig c;
    c.num_entities = 50;
    c.num_queries = 100;
    c.hop_distribution = {{0, 0.5}, {2, 0.5}};
    c.seed = seed;
    return c;
}

struct OracleQuestion {
    std::string start;
    std::vector<std::string> relations;  // innermost first
    std::optional<std::string> stated_answer;
};

// Reads the question templates with regular expressions, independently of
// the library's own parser.
OracleQuestion oracle_read(const std::string& text) {
    static const std::regex stated(R"(^given that (\S+) (\S+) (\S+), what is the (\S+) of (\S+)\?$)");
    static const std::regex chain_head(R"(^what is (.*) (\S+)\?$)");
    static const std::regex chain_part(R"(the (\S+) of)");
    std::smatch m;
    OracleQuestion q;
    if (std::regex_match(text, m, stated)) {
        REQUIRE(m[2] == m[4]);
        REQUIRE(m[1] == m[5]);
        q.start = m[1];
        q.stated_answer = m[3];
        return q;
    }
    REQUIRE(std::regex_match(text, m, chain_head));
    q.start = m[2];
    const std::string body = m[1];
    std::vector<std::string> outer_first;
    for (auto it = std::sregex_iterator(body.begin(), body.end(), chain_part); it != std::sregex_iterator(); ++it) {
        outer_first.push_back((*it)[1]);
    }
    q.relations.assign(outer_first.rbegin(), outer_first.rend());
    return q;
}

std::string dump(const World& w) {
    std::stringstream ss;
    for (const auto& f : w.kb.facts()) ss << nlohmann::json(f).dump() << '\n';
    for (const auto& q : w.queries) ss << nlohmann::json(q).dump() << '\n';
    return ss.str();
}

}  // namespace

TEST_CASE("generate_world is deterministic for a fixed seed") {
    const auto a = generate_world(small_config(7));
    const auto b = generate_world(small_config(7));
    CHECK(dump(a) == dump(b));
    CHECK(a.kb == b.kb);
    CHECK(dump(a) != dump(generate_world(small_config(8))));
}

TEST_CASE("hop distribution with all weight on zero gives only hop-0 queries") {
    auto c = small_config();
    c.hop_distribution = {{0, 1.0}};
    for (const auto& q : generate_world(c).queries) CHECK(q.required_hops == 0);
}

TEST_CASE("reference split for (50 entities, 100 queries, 0:0.5 / 2:0.5, seed 1) is frozen") {
    std::map<int, int> by_hops;
    for (const auto& q : generate_world(small_config(1)).queries) ++by_hops[q.required_hops];
    CHECK(by_hops.size() == 2);
    CHECK(by_hops[0] == 46);
    CHECK(by_hops[2] == 54);
}

TEST_CASE("queries satisfy the Query invariants and have unique ids and texts") {
    auto c = small_config(3);
    c.hop_distribution = {{0, 1}, {1, 1}, {2, 1}, {3, 1}};
    const auto w = generate_world(c);
    std::set<std::string> ids, texts;
    for (const auto& q : w.queries) {
        CHECK(ids.insert(q.id).second);
        CHECK(texts.insert(q.text).second);
        REQUIRE_FALSE(q.gold_answers.empty());
        for (const auto& g : q.gold_answers) CHECK_FALSE(normalize_answer(g).empty());
        CHECK(q.required_hops >= 0);
        CHECK(q.required_hops <= 3);
    }
}

TEST_CASE("scripted perfect agent with oracle_min_tools searches answers every query") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        auto c = small_config(seed);
        c.hop_distribution = {{0, 1}, {1, 1}, {2, 1}, {3, 1}};
        const auto w = generate_world(c);
        for (const auto& q : w.queries) {
            const auto plan = oracle_read(q.text);
            std::string answer;
            int searches = 0;
            if (plan.stated_answer) {
                answer = *plan.stated_answer;
            } else {
                std::string entity = plan.start;
                for (const auto& rel : plan.relations) {
                    const auto res = search(w.kb, entity + " " + rel, 3);
                    ++searches;
                    std::vector<std::string> objects;
                    for (const auto& h : res.hits) {
                        const Fact* f = w.kb.find(h.fact_id);
                        REQUIRE(f != nullptr);
                        if (f->subject == entity && f->relation == rel) objects.push_back(f->object);
                    }
                    REQUIRE_MESSAGE(objects.size() == 1, q.id << " hop " << rel << " of " << entity);
                    entity = objects.front();
                }
                answer = entity;
            }
            CHECK(searches == oracle_min_tools(q));
            CHECK(static_cast<int>(plan.relations.size()) == q.required_hops);
            CHECK_MESSAGE(exact_match(answer, q.gold_answers) == 1, q.id);
        }
    }
}

TEST_CASE("hop-0 questions state their own answer") {
    const auto w = generate_world(small_config(2));
    for (const auto& q : w.queries) {
        if (q.required_hops != 0) continue;
        const auto plan = oracle_read(q.text);
        REQUIRE(plan.stated_answer.has_value());
        CHECK(*plan.stated_answer == q.gold_answers.front());
    }
}

TEST_CASE("parse_question and render_question agree with the templates") {
    const auto w = generate_world(small_config(4));
    for (const auto& q : w.queries) {
        const auto plan = parse_question(q.text);
        REQUIRE(plan.has_value());
        CHECK(render_question(*plan) == q.text);
        CHECK(plan->hops() == q.required_hops);
        const auto oracle = oracle_read(q.text);
        CHECK(plan->start_entity == oracle.start);
        CHECK(plan->relations == oracle.relations);
    }
    CHECK_FALSE(parse_question("who wrote hamlet?").has_value());
    CHECK_FALSE(parse_question("").has_value());
}

TEST_CASE("search scores by overlap over the rendered hyphenated text") {
    KnowledgeBase kb({{"f1", "paris", "capital-of", "france", render_fact_text("paris", "capital-of", "france")}});
    const auto res = search(kb, "capital of france", 3);
    REQUIRE(res.hits.size() == 1);
    CHECK(res.hits[0].fact_id == "f1");
    // Terms {capital, of, france}; only "france" occurs in "paris capital-of france".
    CHECK(res.hits[0].score == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const auto exact = search(kb, "capital-of france", 3);
    CHECK(exact.hits[0].score == doctest::Approx(1.0));
}

TEST_CASE("search edge cases and tie-breaking") {
    KnowledgeBase kb({{"f2", "a", "r", "b", "a r b"}, {"f1", "a", "s", "c", "a s c"}, {"f3", "d", "r", "e", "d r e"}});
    CHECK(search(kb, "zzz", 3).hits.empty());
    CHECK(search(kb, "", 3).hits.empty());
    CHECK(search(kb, "   ", 3).hits.empty());

    const auto res = search(kb, "a", 3);
    REQUIRE(res.hits.size() == 2);
    CHECK(res.hits[0].fact_id == "f1");
    CHECK(res.hits[1].fact_id == "f2");

    const auto k1 = search(kb, "a r", 1);
    REQUIRE(k1.hits.size() == 1);
    CHECK(k1.hits[0].fact_id == "f2");
    CHECK(search(kb, "A R", 3) == search(kb, "a r", 3));
}

TEST_CASE("search results are sorted, bounded by k, scored in [0,1] and pure") {
    const auto w = generate_world(small_config(5));
    for (const auto& q : w.queries) {
        for (int k : {1, 3, 5}) {
            const auto res = search(w.kb, q.text, k);
            CHECK(res.hits.size() <= static_cast<std::size_t>(k));
            for (std::size_t i = 0; i < res.hits.size(); ++i) {
                CHECK(res.hits[i].score > 0.0);
                CHECK(res.hits[i].score <= 1.0);
                if (i > 0) {
                    const auto& p = res.hits[i - 1];
                    const auto& h = res.hits[i];
                    CHECK((p.score > h.score || (p.score == h.score && p.fact_id < h.fact_id)));
                }
            }
            CHECK(search(w.kb, q.text, k) == res);
        }
    }
}

TEST_CASE("knowledge base index is rebuildable and ids are unique") {
    const auto w = generate_world(small_config(6));
    const KnowledgeBase rebuilt(w.kb.facts());
    CHECK(rebuilt == w.kb);
    for (const auto& [term, positions] : w.kb.index()) {
        for (auto p : positions) {
            const auto terms = search_terms(w.kb.facts()[p].text);
            CHECK(std::find(terms.begin(), terms.end(), term) != terms.end());
        }
    }
    for (const auto& f : w.kb.facts()) CHECK(f.text == render_fact_text(f.subject, f.relation, f.object));
    CHECK_THROWS_AS(KnowledgeBase({{"f1", "a", "r", "b", "a r b"}, {"f1", "c", "r", "d", "c r d"}}),
                    std::invalid_argument);
}

TEST_CASE("infeasible and invalid configs are rejected") {
    auto c = small_config();
    c.num_entities = 3;
    c.hop_distribution = {{3, 1.0}};
    CHECK_THROWS_AS(generate_world(c), InfeasibleConfig);

    c = small_config();
    c.num_entities = 1;
    c.hop_distribution = {{0, 1.0}};
    CHECK_THROWS_AS(generate_world(c), InfeasibleConfig);

    c = small_config();
    c.hop_distribution = {{0, 1.0}, {0, 2.0}};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.hop_distribution = {{4, 1.0}};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.hop_distribution = {{1, 0.0}};
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = small_config();
    c.num_queries = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("world dump reloads to an identical world") {
    const auto w = generate_world(small_config(9));
    const auto path = std::filesystem::temp_directory_path() / "searchlab_world_roundtrip.jsonl";
    save_world(w, path);
    const auto back = load_world(path);
    CHECK(back.kb == w.kb);
    CHECK(dump(back) == dump(w));
    CHECK(nlohmann::json(back.config) == nlohmann::json(w.config));

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(nlohmann::json::parse(line).at("record") == "config");
    std::filesystem::remove(path);
}
