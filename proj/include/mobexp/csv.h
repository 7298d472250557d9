// Copyright 2026 The mobexp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MOBEXP_CSV_H_
#define MOBEXP_CSV_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mobexp::csv {

// Splits one CSV record. Double-quoted fields may contain commas and "".
std::vector<std::string> SplitRecord(std::string_view line);

// Line-oriented reader over a headered CSV file. Rows are exposed with their
// 1-based line number so errors can carry file:line context.
class Reader {
 public:
  // Throws DataError if the file cannot be opened or has no header.
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  // Column index or nullopt.
  std::optional<std::size_t> Column(std::string_view name) const;
  // Column index; throws DataError naming the file when absent.
  std::size_t RequireColumn(std::string_view name) const;

  // Reads the next non-empty record. Returns false at end of file.
  bool Next(std::vector<std::string>& fields);
  std::size_t line() const { return line_; }
  std::string Where() const;

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

// Buffered writer. Doubles are written in shortest round-trip form so a
// re-read reproduces the exact value.
class Writer {
 public:
  Writer(const std::filesystem::path& path,
         const std::vector<std::string>& header);
  ~Writer();
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  Writer& Field(std::string_view s);
  Writer& Field(double v);
  Writer& Field(std::int64_t v);
  Writer& Field(int v) { return Field(static_cast<std::int64_t>(v)); }
  Writer& Field(std::size_t v) { return Field(static_cast<std::int64_t>(v)); }
  Writer& Empty() { return Field(std::string_view{}); }
  void EndRow();
  void Close();

 private:
  std::filesystem::path path_;
  std::string buf_;
  bool row_started_ = false;
  bool closed_ = false;
};

std::string FormatDouble(double v);
// Strict parsers; throw DataError with `what` in the message.
double ParseDouble(std::string_view s, std::string_view what);
std::int64_t ParseInt(std::string_view s, std::string_view what);

}  // namespace mobexp::csv

#endif  // MOBEXP_CSV_H_
