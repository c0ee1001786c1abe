#include "laplab/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "laplab/errors.hpp"

namespace laplab::io
{
    std::string format_number(double x)
    {
        char buf[64];
        const auto res = std::to_chars(buf, buf + sizeof buf, x);
        return {buf, res.ptr};
    }

    std::string read_text(const std::string& path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw Error("cannot open " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    void write_text(const std::string& path, const std::string& content)
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write " + path);
        out << content;
        if (!out)
            throw Error("write failed: " + path);
    }

    nlohmann::json read_json(const std::string& path)
    {
        const auto text = read_text(path);
        try
        {
            return nlohmann::json::parse(text);
        }
        catch (const nlohmann::json::parse_error& e)
        {
            throw ValidationError({"malformed JSON in " + path + ": " + e.what()});
        }
    }

    void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

    std::string csv_row(const std::vector<std::string>& cells)
    {
        std::string out;
        for (std::size_t k = 0; k < cells.size(); ++k)
        {
            if (k)
                out += ',';
            out += cells[k];
        }
        out += '\n';
        return out;
    }
}
