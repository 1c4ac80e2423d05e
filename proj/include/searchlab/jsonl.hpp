#pragma once
// Line-delimited JSON object files (one record per line).

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace searchlab::jsonl {

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
    }

    void write(const nlohmann::json& record) { out_ << record.dump() << '\n'; }

private:
    std::ofstream out_;
};

inline std::vector<nlohmann::json> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<nlohmann::json> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

template <typename T>
void write_all(const std::filesystem::path& path, const std::vector<T>& items) {
    Writer w(path);
    for (const auto& item : items) w.write(nlohmann::json(item));
}

}  // namespace searchlab::jsonl
