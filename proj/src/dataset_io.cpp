#include "lingame/dataset_io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "lingame/error.hpp"

namespace lingame {

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  std::size_t line = 1;

  const auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  const auto end_row = [&] {
    end_field();
    if (row_has_content || row.size() > 1 || !row.front().empty()) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += c;
    }
  }
  if (in_quotes) {
    throw Error(ErrorCode::ParseError, "unterminated quoted field near line " + std::to_string(line));
  }
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

std::string where(std::size_t row, std::string_view column) {
  return "row " + std::to_string(row) + ", column " + std::string(column);
}

std::optional<double> parse_number(const std::string& cell, std::size_t row,
                                   std::string_view column) {
  if (cell.empty()) return std::nullopt;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw Error(ErrorCode::ParseError, where(row, column) + ": '" + cell + "' is not a number");
  }
  return v;
}

std::optional<SentimentScore> parse_score_cell(const std::string& cell, std::size_t row,
                                               std::string_view column) {
  const auto v = parse_number(cell, row, column);
  if (!v) return std::nullopt;
  if (!(*v >= SentimentScore::kMin && *v <= SentimentScore::kMax)) {
    throw Error(ErrorCode::ParseError,
                where(row, column) + ": score " + cell + " outside the [1, 7] scale");
  }
  return SentimentScore(*v);
}

std::string number_text(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::vector<Study> parse_dataset(std::string_view csv_text) {
  const auto rows = parse_csv(csv_text);
  if (rows.empty()) throw Error(ErrorCode::SchemaError, "dataset has no header row");

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    std::string name = rows[0][i];
    if (i == 0 && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
    bool known = false;
    for (auto c : kDatasetColumns) known = known || c == name;
    if (!known) throw Error(ErrorCode::SchemaError, "unknown column '" + name + "'");
    if (!index.emplace(name, i).second) {
      throw Error(ErrorCode::SchemaError, "duplicate column '" + name + "'");
    }
  }
  for (auto c : kDatasetColumns) {
    if (!index.count(std::string(c))) {
      throw Error(ErrorCode::SchemaError, "missing column '" + std::string(c) + "'");
    }
  }

  std::vector<Study> studies;
  std::map<std::string, std::size_t> study_pos;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != rows[0].size()) {
      throw Error(ErrorCode::ParseError, "row " + std::to_string(line) + ": expected " +
                                             std::to_string(rows[0].size()) + " fields, got " +
                                             std::to_string(row.size()));
    }
    const auto cell = [&](std::string_view name) -> const std::string& {
      return row[index.at(std::string(name))];
    };

    Condition c;
    c.study_id = cell("study_id");
    c.condition_id = cell("condition_id");
    if (c.study_id.empty()) throw Error(ErrorCode::ParseError, where(line, "study_id") + ": empty");
    if (c.condition_id.empty()) {
      throw Error(ErrorCode::ParseError, where(line, "condition_id") + ": empty");
    }
    c.label = cell("label");
    c.country = cell("country");
    c.sentiments.s_zero = parse_score_cell(cell("s_zero"), line, "s_zero");
    c.sentiments.s_half = parse_score_cell(cell("s_half"), line, "s_half");
    c.sentiments.s_all = parse_score_cell(cell("s_all"), line, "s_all");
    c.prosocial_rate = parse_number(cell("prosocial_rate"), line, "prosocial_rate");
    if (c.prosocial_rate && !(*c.prosocial_rate >= 0.0 && *c.prosocial_rate <= 1.0)) {
      throw Error(ErrorCode::ParseError,
                  where(line, "prosocial_rate") + ": rate outside [0, 1]");
    }
    c.action_texts = {cell("text_keep"), cell("text_half"), cell("text_all")};

    auto [it, fresh] = study_pos.emplace(c.study_id, studies.size());
    if (fresh) studies.push_back(Study{c.study_id, c.study_id, {}});
    auto& study = studies[it->second];
    for (const auto& existing : study.conditions) {
      if (existing.condition_id == c.condition_id) {
        throw Error(ErrorCode::ParseError, where(line, "condition_id") + ": duplicate '" +
                                               c.condition_id + "' in study '" + c.study_id + "'");
      }
    }
    study.conditions.push_back(std::move(c));
  }
  return studies;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

std::vector<Study> ingest(const std::filesystem::path& path) { return parse_dataset(read_file(path)); }

std::string serialize_dataset(std::span<const Study> dataset) {
  std::string out;
  for (std::size_t i = 0; i < kDatasetColumns.size(); ++i) {
    if (i) out += ',';
    out += kDatasetColumns[i];
  }
  out += '\n';
  const auto score = [](const std::optional<SentimentScore>& s) {
    return s ? number_text(s->value()) : std::string{};
  };
  for (const auto& study : dataset) {
    for (const auto& c : study.conditions) {
      out += csv_escape(c.study_id) + ',' + csv_escape(c.condition_id) + ',' +
             csv_escape(c.label) + ',' + csv_escape(c.country) + ',' + score(c.sentiments.s_zero) +
             ',' + score(c.sentiments.s_half) + ',' + score(c.sentiments.s_all) + ',' +
             (c.prosocial_rate ? number_text(*c.prosocial_rate) : std::string{}) + ',' +
             csv_escape(c.action_texts[0]) + ',' + csv_escape(c.action_texts[1]) + ',' +
             csv_escape(c.action_texts[2]) + '\n';
    }
  }
  return out;
}

std::string dataset_digest(std::span<const Study> dataset) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_dataset(dataset)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void merge_rates(std::vector<Study>& dataset, std::string_view rates_csv) {
  const auto rows = parse_csv(rates_csv);
  if (rows.empty()) throw Error(ErrorCode::SchemaError, "rates file has no header row");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < rows[0].size(); ++i) index[rows[0][i]] = i;
  for (auto c : {"study_id", "condition_id", "prosocial_rate"}) {
    if (!index.count(c)) throw Error(ErrorCode::SchemaError, std::string("rates file lacks ") + c);
  }
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t line = r + 1;
    if (row.size() != rows[0].size()) {
      throw Error(ErrorCode::ParseError, "rates row " + std::to_string(line) + ": wrong field count");
    }
    const auto& sid = row[index["study_id"]];
    const auto& cid = row[index["condition_id"]];
    const auto rate = parse_number(row[index["prosocial_rate"]], line, "prosocial_rate");
    if (rate && !(*rate >= 0.0 && *rate <= 1.0)) {
      throw Error(ErrorCode::ParseError, where(line, "prosocial_rate") + ": rate outside [0, 1]");
    }
    Condition* target = nullptr;
    for (auto& s : dataset) {
      if (s.study_id != sid) continue;
      for (auto& c : s.conditions) {
        if (c.condition_id == cid) target = &c;
      }
    }
    if (!target) {
      throw Error(ErrorCode::ParseError,
                  "rates row " + std::to_string(line) + ": unknown condition " + sid + "/" + cid);
    }
    target->prosocial_rate = rate;
  }
}

}  // namespace lingame
