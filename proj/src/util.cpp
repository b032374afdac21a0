#include <fstream>
#include <iterator>
#include <system_error>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "io_util.hpp"

namespace histofilter {

namespace csv {

bool parse(std::string_view text, std::vector<Row>& rows, std::string& error) {
  rows.clear();
  std::size_t line = 1;
  std::size_t i = 0;
  // Skip UTF-8 BOM.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;

  while (i < text.size()) {
    Row row;
    row.line = line;
    std::string field;
    bool in_quotes = false;
    bool row_done = false;
    bool any_content = false;
    while (i < text.size() && !row_done) {
      char c = text[i];
      if (in_quotes) {
        if (c == '"') {
          if (i + 1 < text.size() && text[i + 1] == '"') {
            field.push_back('"');
            i += 2;
            continue;
          }
          in_quotes = false;
          ++i;
          continue;
        }
        if (c == '\n') ++line;
        field.push_back(c);
        ++i;
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          any_content = true;
          ++i;
          break;
        case ',':
          row.fields.push_back(std::move(field));
          field.clear();
          any_content = true;
          ++i;
          break;
        case '\r':
          ++i;
          break;
        case '\n':
          ++line;
          ++i;
          row_done = true;
          break;
        default:
          field.push_back(c);
          any_content = true;
          ++i;
      }
    }
    if (in_quotes) {
      error = "unterminated quoted field starting on line " + std::to_string(row.line);
      return false;
    }
    if (!any_content) continue;  // blank line
    row.fields.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return true;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

namespace io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::IoError, "read failed for " + path.string());
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::IoError, "cannot rename into " + path.string());
  }
}

}  // namespace io

}  // namespace histofilter
