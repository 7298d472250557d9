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

#include "mobexp/csv.h"

#include <charconv>
#include <cmath>
#include <system_error>

#include "mobexp/core.h"

namespace mobexp::csv {

std::vector<std::string> SplitRecord(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

Reader::Reader(const std::filesystem::path& path) : path_(path), in_(path) {
  if (!in_) throw DataError("cannot open " + path.string());
  std::vector<std::string> header;
  if (!Next(header)) throw DataError(path.string() + ": missing header row");
  header_ = std::move(header);
}

std::optional<std::size_t> Reader::Column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Reader::RequireColumn(std::string_view name) const {
  if (auto c = Column(name)) return *c;
  throw DataError(path_.string() + ": missing column '" + std::string(name) +
                  "'");
}

bool Reader::Next(std::vector<std::string>& fields) {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fields = SplitRecord(line);
    return true;
  }
  return false;
}

std::string Reader::Where() const {
  return path_.string() + ":" + std::to_string(line_);
}

Writer::Writer(const std::filesystem::path& path,
               const std::vector<std::string>& header)
    : path_(path) {
  for (const auto& h : header) Field(h);
  EndRow();
}

Writer::~Writer() {
  if (!closed_) {
    try {
      Close();
    } catch (...) {
    }
  }
}

Writer& Writer::Field(std::string_view s) {
  if (row_started_) buf_.push_back(',');
  row_started_ = true;
  if (s.find_first_of(",\"\n") != std::string_view::npos) {
    buf_.push_back('"');
    for (char c : s) {
      if (c == '"') buf_.push_back('"');
      buf_.push_back(c);
    }
    buf_.push_back('"');
  } else {
    buf_.append(s);
  }
  return *this;
}

Writer& Writer::Field(double v) { return Field(FormatDouble(v)); }

Writer& Writer::Field(std::int64_t v) { return Field(std::to_string(v)); }

void Writer::EndRow() {
  buf_.push_back('\n');
  row_started_ = false;
}

void Writer::Close() {
  closed_ = true;
  std::ofstream out(path_, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path_.string());
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw DataError("write failed for " + path_.string());
}

std::string FormatDouble(double v) {
  if (v == 0.0) return "0";  // also folds -0
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double ParseDouble(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size() ||
      !std::isfinite(v)) {
    throw DataError("bad number for " + std::string(what) + ": '" +
                    std::string(s) + "'");
  }
  return v;
}

std::int64_t ParseInt(std::string_view s, std::string_view what) {
  std::int64_t v = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw DataError("bad integer for " + std::string(what) + ": '" +
                    std::string(s) + "'");
  }
  return v;
}

}  // namespace mobexp::csv
