#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "adgan/attributes.hpp"
#include "adgan/errors.hpp"

namespace adgan {

/// One image row of an attribute file; values already mapped -1 -> 0, +1 -> 1.
struct AttrRow {
  std::string filename;
  std::vector<std::uint8_t> values;
};

/// Contents of a CelebA-style attribute file: image count line, header line
/// of column names, then one "filename v1 ... vK" row per image with ±1 values.
struct AttrTable {
  std::size_t count = 0;
  std::vector<std::string> columns;
  std::vector<AttrRow> rows;

  std::size_t column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return i;
    }
    throw ContractError("attribute file has no column '" + name + "'");
  }
};

inline AttrTable parse_attr_stream(std::istream& in) {
  AttrTable table;
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.find_first_not_of(" \t") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError("missing image count line", line_no + 1);
  {
    std::istringstream ls(line);
    long long count = -1;
    std::string extra;
    if (!(ls >> count) || count < 0 || (ls >> extra)) {
      throw ParseError("image count must be a non-negative integer", line_no);
    }
    table.count = static_cast<std::size_t>(count);
  }
  if (!next_line()) throw ParseError("missing header line", line_no + 1);
  {
    std::istringstream ls(line);
    std::string name;
    while (ls >> name) table.columns.push_back(name);
  }
  table.rows.reserve(table.count);
  while (next_line()) {
    std::istringstream ls(line);
    AttrRow row;
    ls >> row.filename;
    row.values.reserve(table.columns.size());
    std::string token;
    while (ls >> token) {
      if (token == "1" || token == "+1") {
        row.values.push_back(1);
      } else if (token == "-1") {
        row.values.push_back(0);
      } else {
        throw ParseError("value '" + token + "' is not -1 or 1", line_no);
      }
    }
    if (row.values.size() != table.columns.size()) {
      throw ParseError("expected " + std::to_string(table.columns.size()) + " values, found " +
                           std::to_string(row.values.size()),
                       line_no);
    }
    table.rows.push_back(std::move(row));
  }
  if (table.rows.size() != table.count) {
    throw ParseError("header announces " + std::to_string(table.count) + " images but " +
                         std::to_string(table.rows.size()) + " rows follow",
                     line_no);
  }
  return table;
}

inline AttrTable parse_attr_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open attribute file " + path);
  return parse_attr_stream(in);
}

/// Writes the table in the CelebA layout (values right-aligned, "-1" / " 1").
inline void write_attr_stream(std::ostream& out, const AttrTable& table) {
  out << table.rows.size() << '\n';
  for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? " " : "") << table.columns[i];
  out << '\n';
  for (const auto& row : table.rows) {
    out << row.filename;
    for (auto v : row.values) out << (v ? "  1" : " -1");
    out << '\n';
  }
}

inline void write_attr_file(const std::string& path, const AttrTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write attribute file " + path);
  write_attr_stream(out, table);
  if (!out) throw IoError("write failed for " + path);
}

/// Train/test partition as row indices.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline constexpr std::size_t kCelebaTrainCount = 182000;

/// Deterministic file-order prefix split: the first train_count rows train,
/// the remainder test.
inline DatasetSplit make_split(std::size_t row_count, std::size_t train_count = kCelebaTrainCount) {
  if (row_count < train_count) {
    throw ContractError("make_split: " + std::to_string(row_count) + " rows, need at least " +
                        std::to_string(train_count));
  }
  DatasetSplit split;
  split.train.resize(train_count);
  split.test.resize(row_count - train_count);
  std::iota(split.train.begin(), split.train.end(), std::size_t{0});
  std::iota(split.test.begin(), split.test.end(), train_count);
  return split;
}

/// Attribute vector of `row` restricted to the schema's columns.
inline AttributeVector row_attributes(const AttrTable& table, const AttrRow& row,
                                      const SchemaPtr& schema) {
  std::vector<double> values;
  values.reserve(schema->size());
  for (const auto& column : schema->columns) values.push_back(row.values[table.column_index(column)]);
  return AttributeVector(schema, std::move(values));
}

}  // namespace adgan
