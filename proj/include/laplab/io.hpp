#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace laplab::io
{
    // Shortest decimal form that round-trips.
    std::string format_number(double x);

    std::string read_text(const std::string& path);
    void write_text(const std::string& path, const std::string& content);

    nlohmann::json read_json(const std::string& path);
    // Two-space indent plus trailing newline.
    void write_json(const std::string& path, const nlohmann::json& j);

    std::string csv_row(const std::vector<std::string>& cells);
}
