#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace promptprobe::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

/// RFC-4180 reader: quoted fields may contain commas, doubled quotes and line
/// breaks. Blank lines are skipped. Throws kParse on an unterminated quote.
std::vector<Row> parse(std::string_view content);

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string quote(std::string_view field);

}  // namespace promptprobe::csv
