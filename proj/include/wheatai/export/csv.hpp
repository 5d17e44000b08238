#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace wheatai::exporter {

/// Absent values are monostate and render as empty fields.
using Cell = std::variant<std::monostate, std::string, std::int64_t, double, bool>;
using CsvRow = std::vector<Cell>;

struct CsvSchema {
    std::string name;  // file stem, e.g. "fdk" or "fdk_summary"
    std::vector<std::string> columns;
};

/// Main schema for each pipeline id.
const std::map<std::string, CsvSchema, std::less<>>& csv_schemas();
/// Per-image summary schema, for pipelines that have one.
const std::map<std::string, CsvSchema, std::less<>>& csv_summary_schemas();

/// Decimals with up to 6 significant digits, integers verbatim, booleans as
/// true/false, strings quoted only when they contain a comma, quote or
/// newline.
std::string format_cell(const Cell& cell);

/// Stem of `filename` up to the first underscore, or the whole stem.
std::string plot_id(std::string_view filename);

/// Header plus one line per row, "\n" terminated.
/// Throws Error(schema_mismatch) when a row's width differs from the schema.
std::string render_csv(const CsvSchema& schema, const std::vector<CsvRow>& rows);

/// Writes render_csv() to `path` and returns the row count.
std::size_t write_csv(const std::filesystem::path& path, const CsvSchema& schema,
                      const std::vector<CsvRow>& rows);

}  // namespace wheatai::exporter
