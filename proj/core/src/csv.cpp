#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "glassbox/data.hpp"
#include "glassbox/error.hpp"

namespace glassbox {
namespace {

// One RFC-4180 record per call; returns false at end of input. Quoted fields
// may contain separators, doubled quotes and line breaks.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line) {
  fields.clear();
  std::string field;
  bool in_quotes = false, any = false, was_quoted = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          field.push_back('"');
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && field.empty() && !was_quoted) {
      in_quotes = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else if (c == '\r') {
      if (in.peek() == '\n') continue;
      break;
    } else if (c == '\n') {
      break;
    } else {
      field.push_back(c);
    }
  }
  if (!any) return false;
  if (in_quotes) throw ValidationError("unterminated quoted field starting before line " + std::to_string(line));
  fields.push_back(std::move(field));
  ++line;
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

std::string format_double(double v) {
  char buffer[64];
  auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), v);
  return std::string(buffer, end);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::optional<std::string>& category_column) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV file " + path.string());
  const std::string where = path.string();

  std::vector<std::string> header;
  std::size_t line = 1;
  if (!read_record(in, header, line)) throw ValidationError(where + ": empty file (header required)");
  for (auto& h : header) h = trim(h);

  std::optional<std::size_t> label_at, category_at;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_at = c;
    if (category_column && header[c] == *category_column) category_at = c;
  }
  if (!label_at) throw ValidationError(where + ": missing label column \"" + label_column + "\"");
  if (category_column && !category_at) {
    throw ValidationError(where + ": missing category column \"" + *category_column + "\"");
  }

  Dataset data;
  data.id = "csv:" + path.filename().string();
  data.label_name = label_column;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == *label_at || (category_at && c == *category_at)) continue;
    feature_cols.push_back(c);
    data.feature_names.push_back(header[c]);
  }
  data.num_features = feature_cols.size();

  std::vector<std::string> fields;
  std::size_t row = 0;
  std::size_t max_label = 0;
  while (read_record(in, fields, line)) {
    if (fields.size() == 1 && trim(fields[0]).empty()) continue;  // blank line
    ++row;
    if (fields.size() != header.size()) {
      throw ValidationError(where + ": row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    auto parse = [&](std::size_t c) {
      const std::string cell = trim(fields[c]);
      double value = 0.0;
      auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size() ||
          !std::isfinite(value)) {
        throw ValidationError(where + ": non-numeric value \"" + cell + "\" at row " +
                              std::to_string(row) + ", column \"" + header[c] + "\"");
      }
      return value;
    };
    for (std::size_t c : feature_cols) data.features.push_back(parse(c));
    const double label = parse(*label_at);
    if (label < 0 || label != std::floor(label)) {
      throw ValidationError(where + ": label \"" + fields[*label_at] + "\" at row " +
                            std::to_string(row) + " is not a class index");
    }
    data.labels.push_back(static_cast<std::size_t>(label));
    max_label = std::max(max_label, data.labels.back());
    if (category_at) data.categories.push_back(trim(fields[*category_at]));
  }
  data.num_rows = row;
  data.num_classes = std::max<std::size_t>(2, max_label + 1);
  data.validate();
  return data;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write CSV file " + path.string());
  for (std::size_t j = 0; j < data.num_features; ++j) {
    out << quote_if_needed(j < data.feature_names.size() ? data.feature_names[j]
                                                        : "x" + std::to_string(j))
        << ',';
  }
  out << quote_if_needed(data.label_name);
  if (data.has_categories()) out << ",category";
  out << '\n';
  for (std::size_t i = 0; i < data.num_rows; ++i) {
    for (double v : data.row(i)) out << format_double(v) << ',';
    out << data.labels[i];
    if (data.has_categories()) out << ',' << quote_if_needed(data.categories[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing CSV file " + path.string());
}

}  // namespace glassbox
