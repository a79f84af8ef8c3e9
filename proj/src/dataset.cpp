#include "dynscale/dataset.hpp"

#include <fstream>
#include <string>

#include "dynscale/error.hpp"
#include "dynscale/serialization.hpp"

namespace dynscale {

QuerySet read_query_set(std::istream& in, const std::string& source)
{
    QuerySet out;
    std::string line;
    for (int line_no = 1; std::getline(in, line); ++line_no) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto where = source + ":" + std::to_string(line_no) + ": ";
        try {
            out.push_back(json::parse(line).get<Query>());
        } catch (const Error& e) {
            throw Error(ErrorCode::schema_invalid, where + e.what());
        } catch (const json::exception& e) {
            throw Error(ErrorCode::schema_invalid, where + e.what());
        }
    }
    try {
        validate_query_set(out);
    } catch (const Error& e) {
        throw Error(ErrorCode::schema_invalid, source + ": " + e.what());
    }
    return out;
}

QuerySet load_query_set(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io_error, "cannot open dataset '" + path.string() + "'");
    return read_query_set(in, path.string());
}

void write_query_set(std::ostream& out, const QuerySet& queries)
{
    for (const auto& q : queries) out << json(q).dump() << '\n';
}

}  // namespace dynscale
