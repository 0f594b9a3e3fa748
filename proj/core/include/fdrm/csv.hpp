#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fdrm {

/// RFC 4180 conventions throughout: CRLF record separators, fields quoted
/// only when they contain a comma, quote, or line break, embedded quotes
/// doubled. Numbers are written in scientific notation with 17 significant
/// digits, so reading them back reproduces the double exactly.

std::string csv_escape(std::string_view field);
std::string csv_number(double value);
std::string csv_number(std::optional<double> value);  // empty cell when absent
std::string csv_field(std::size_t value);
std::string csv_field(bool verdict);  // "pass" / "fail"

/// Header plus rows, each terminated by CRLF; every row must match the
/// header width.
std::string csv_document(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows);

/// Write-to-temporary-then-rename, so concurrent readers never observe a
/// partial file and a crashed run leaves no half-written report.
void write_text_atomic(const std::string& path, std::string_view content);

}  // namespace fdrm
