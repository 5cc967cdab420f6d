#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace chb {

/// Rectangular numeric table with a header row.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    explicit Table(std::vector<std::string> columns = {}) : header(std::move(columns)) {}
    /// Throws ContractViolation if the row width differs from the header.
    void add_row(std::vector<double> row);
    std::size_t column(const std::string& name) const;
};

/// Shortest round-trip-safe text for a double: 17 significant digits,
/// "nan", "inf", "-inf".
std::string format_double(double x);

/// Comma separated, '\n' line ends, header first, rows in insertion order.
/// Header fields containing ',', '"' or newlines are quoted.
std::string to_csv(const Table& table);
/// Throws std::runtime_error naming the path on I/O failure.
void write_csv(const Table& table, const std::filesystem::path& path);

/// Reads a file written by write_csv (numeric body, quoted header allowed).
Table read_csv(const std::filesystem::path& path);

}  // namespace chb
