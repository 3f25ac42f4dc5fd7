#include "frachardy/csv.hpp"

#include "frachardy/errors.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace frachardy {

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

void write_csv(const std::vector<CsvRow>& rows, const std::vector<std::string>& schema,
               const std::string& path) {
    if (schema.empty()) throw SchemaError("empty CSV schema");
    for (std::size_t i = 0; i < rows.size(); ++i)
        if (rows[i].size() != schema.size())
            throw SchemaError("row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                              " fields, schema has " + std::to_string(schema.size()));
    std::ostringstream os;
    for (std::size_t k = 0; k < schema.size(); ++k) os << (k ? "," : "") << schema[k];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
        os << '\n';
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": " + std::strerror(errno));
    const std::string text = os.str();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw IoError(path + ": " + std::strerror(errno));
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": " + std::strerror(errno));
    auto split = [](const std::string& line) {
        CsvRow out;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) out.push_back(field);
        if (!line.empty() && line.back() == ',') out.emplace_back();
        return out;
    };
    CsvTable t;
    std::string line;
    if (std::getline(in, line)) t.schema = split(line);
    while (std::getline(in, line)) t.rows.push_back(split(line));
    return t;
}

} // namespace frachardy
