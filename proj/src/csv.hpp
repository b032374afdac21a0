#pragma once

// Minimal RFC 4180 reader/writer shared by the CSV-backed formats.

#include <string>
#include <string_view>
#include <vector>

namespace histofilter::csv {

struct Row {
  std::size_t line = 0;  // 1-based line where the row starts
  std::vector<std::string> fields;
};

/// Splits text into rows. Quoted fields may contain commas, quotes ("") and
/// newlines. Blank lines are skipped. Returns false on an unterminated quote.
bool parse(std::string_view text, std::vector<Row>& rows, std::string& error);

std::string escape(std::string_view field);

inline void append_row(std::string& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out.push_back('\n');
}

}  // namespace histofilter::csv
