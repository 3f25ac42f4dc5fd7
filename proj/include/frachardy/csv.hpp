#pragma once

#include <string>
#include <vector>

namespace frachardy {

/// Shortest round-trip-safe text with 17 significant digits, independent of locale.
std::string format_number(double x);

using CsvRow = std::vector<std::string>;

struct CsvTable {
    std::vector<std::string> schema;
    std::vector<CsvRow> rows;
};

/// Header exactly `schema`; '\n' line endings. Throws SchemaError before writing if any row's
/// width differs from the schema, IoError with the system message on failure.
void write_csv(const std::vector<CsvRow>& rows, const std::vector<std::string>& schema,
               const std::string& path);
CsvTable read_csv(const std::string& path);

} // namespace frachardy
