#pragma once
// Synthetic multi-hop QA world: a fact base, templated questions with known
// hop counts, and a lexical-overlap search tool over the facts.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "searchlab/core_types.hpp"

namespace searchlab {

struct Fact {
    std::string id;
    std::string subject;
    std::string relation;
    std::string object;
    std::string text;

    bool operator==(const Fact&) const = default;
};

std::string render_fact_text(std::string_view subject, std::string_view relation, std::string_view object);

class KnowledgeBase {
public:
    KnowledgeBase() = default;
    // Throws std::invalid_argument on duplicate fact ids.
    explicit KnowledgeBase(std::vector<Fact> facts);

    const std::vector<Fact>& facts() const { return facts_; }
    const std::map<std::string, std::vector<std::size_t>>& index() const { return index_; }
    const Fact* find(std::string_view fact_id) const;

    bool operator==(const KnowledgeBase& other) const { return facts_ == other.facts_ && index_ == other.index_; }

private:
    std::vector<Fact> facts_;
    // Lowercase term -> positions in facts_, ascending.
    std::map<std::string, std::vector<std::size_t>> index_;
};

inline constexpr int kDefaultTopK = 3;

// Lowercased, whitespace-split, deduplicated terms.
std::vector<std::string> search_terms(std::string_view text);

// Top-k facts by |query terms ∩ fact terms| / |query terms|; zero scores are
// excluded; ties are broken by ascending fact id.
SearchResult search(const KnowledgeBase& kb, std::string_view query_text, int k = kDefaultTopK);

struct HopWeight {
    int hops = 0;
    double weight = 0.0;
};

struct WorldConfig {
    int num_entities = 60;
    int num_queries = 200;
    std::vector<HopWeight> hop_distribution{{0, 0.5}, {2, 0.5}};
    std::uint64_t seed = 1;
    int distractor_facts = 150;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

class InfeasibleConfig : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct World {
    WorldConfig config;
    KnowledgeBase kb;
    std::vector<Query> queries;

    const Query* find_query(std::string_view id) const;
};

World generate_world(const WorldConfig& cfg);

// Ground-truth minimal tool count: one search per hop.
int oracle_min_tools(const Query& q);

// Structure recovered from a question's template.
struct QuestionPlan {
    std::string start_entity;
    // Relations in resolution order (innermost first).
    std::vector<std::string> relations;
    // Set for questions that state their own answer.
    std::optional<Fact> embedded_fact;

    int hops() const { return static_cast<int>(relations.size()); }
};

std::optional<QuestionPlan> parse_question(std::string_view text);

std::string render_question(const QuestionPlan& plan);

const std::vector<std::string>& relation_vocabulary();

void save_world(const World& world, const std::filesystem::path& path);
World load_world(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);
void to_json(nlohmann::json& j, const Fact& f);
void from_json(const nlohmann::json& j, Fact& f);

}  // namespace searchlab
