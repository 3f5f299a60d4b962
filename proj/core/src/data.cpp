#include "metabayes/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "metabayes/error.hpp"

namespace metabayes {

namespace {

std::string trim(std::string_view s) {
  auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::optional<double> parse_number(std::string_view s) {
  std::string t = trim(s);
  if (t.empty()) return std::nullopt;
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

// RFC 4180-style record splitter: quoted fields, doubled quotes, CRLF.
struct RawRecord {
  std::vector<std::string> fields;
  std::vector<bool> quoted;
  long line = 0;
};

std::vector<RawRecord> split_records(std::string_view text) {
  std::vector<RawRecord> records;
  RawRecord current;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool record_has_content = false;
  long line = 1;
  current.line = line;

  auto finish_field = [&] {
    current.fields.push_back(field);
    current.quoted.push_back(field_quoted);
    field.clear();
    field_quoted = false;
  };
  auto finish_record = [&] {
    finish_field();
    bool blank = current.fields.size() == 1 && trim(current.fields[0]).empty() && !current.quoted[0];
    if (!blank) records.push_back(std::move(current));
    current = RawRecord{};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!trim(field).empty()) {
          throw ParseError("unexpected quote inside unquoted field at line " + std::to_string(line), line);
        }
        field.clear();
        in_quotes = true;
        field_quoted = true;
        record_has_content = true;
        break;
      case ',':
        finish_field();
        record_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        finish_record();
        ++line;
        current.line = line;
        break;
      default:
        field.push_back(c);
        record_has_content = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field starting before line " + std::to_string(line), line);
  if (record_has_content || !field.empty()) finish_record();
  return records;
}

std::string study_name(const WideTable& wide, std::size_t row) {
  if (wide.has_column("study")) {
    std::string label = wide.text(row, "study");
    if (!label.empty()) return label;
  }
  return "row " + std::to_string(row + 1);
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Endpoint endpoint) {
  switch (endpoint) {
    case Endpoint::binary: return "binary";
    case Endpoint::continuous: return "continuous";
    case Endpoint::count: return "count";
  }
  return "?";
}

Endpoint endpoint_from_string(std::string_view name) {
  if (name == "binary" || name == "binomial") return Endpoint::binary;
  if (name == "continuous" || name == "normal") return Endpoint::continuous;
  if (name == "count" || name == "poisson") return Endpoint::count;
  throw ConfigError("unknown endpoint '" + std::string(name) + "' (expected binary, continuous or count)");
}

Endpoint endpoint_of(const Outcome& outcome) {
  return static_cast<Endpoint>(outcome.index());
}

Dataset::Dataset(Endpoint endpoint, std::vector<ArmRecord> arms, std::vector<std::string> study_labels)
    : endpoint_(endpoint), labels_(std::move(study_labels)) {
  std::stable_sort(arms.begin(), arms.end(),
                   [](const ArmRecord& a, const ArmRecord& b) { return a.study < b.study; });
  arms_ = std::move(arms);

  int expected_study = 1;
  for (std::size_t k = 0; k < arms_.size(); ++k) {
    const ArmRecord& a = arms_[k];
    if (k == 0 || a.study != arms_[k - 1].study) {
      if (a.study != expected_study) {
        throw ValidationError("study indices must be contiguous from 1; found study " +
                              std::to_string(a.study) + " where " + std::to_string(expected_study) +
                              " was expected");
      }
      study_offsets_.push_back(k);
      ++expected_study;
    }
  }
  if (!arms_.empty()) study_offsets_.push_back(arms_.size());

  if (!labels_.empty() && labels_.size() != n_studies()) {
    throw ValidationError("study label count " + std::to_string(labels_.size()) +
                          " does not match study count " + std::to_string(n_studies()));
  }

  for (std::size_t s = 0; s < n_studies(); ++s) {
    auto study = study_arms(s);
    const std::string name = study_label(s);
    if (study.size() < 2) throw ValidationError("study " + name + " has fewer than 2 arms");
    std::set<int> seen;
    for (const ArmRecord& a : study) {
      if (a.arm < 0) throw ValidationError("study " + name + " has a negative arm index");
      if (!seen.insert(a.arm).second) {
        throw ValidationError("study " + name + " repeats arm index " + std::to_string(a.arm));
      }
      if (endpoint_of(a.outcome) != endpoint_) {
        throw ValidationError("study " + name + " has an outcome that does not match the " +
                              std::string(to_string(endpoint_)) + " endpoint");
      }
      if (a.dose && (*a.dose < 0.0 || !std::isfinite(*a.dose))) {
        throw ValidationError("study " + name + " has a negative or non-finite dose");
      }
      std::visit(
          [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, BinaryOutcome>) {
              if (o.sample_size < 1) throw ValidationError("study " + name + " has sampleSize < 1");
              if (o.responders < 0) throw ValidationError("study " + name + " has negative responders");
              if (o.responders > o.sample_size) {
                throw ValidationError("study " + name + " has responders (" + std::to_string(o.responders) +
                                      ") > sampleSize (" + std::to_string(o.sample_size) + ")");
              }
            } else if constexpr (std::is_same_v<T, ContinuousOutcome>) {
              if (!(o.std_err > 0.0) || !std::isfinite(o.mean)) {
                throw ValidationError("study " + name + " needs a finite mean and std_err > 0");
              }
            } else {
              if (o.events < 0) throw ValidationError("study " + name + " has a negative count");
              if (!(o.exposure > 0.0)) throw ValidationError("study " + name + " needs exposure > 0");
            }
          },
          a.outcome);
    }
    std::stable_sort(arms_.begin() + static_cast<std::ptrdiff_t>(study_offsets_[s]),
                     arms_.begin() + static_cast<std::ptrdiff_t>(study_offsets_[s + 1]),
                     [](const ArmRecord& a, const ArmRecord& b) { return a.arm < b.arm; });
  }

  if (has_doses()) {
    for (const ArmRecord& a : arms_) {
      if (!a.dose) throw ValidationError("study " + study_label(a.study - 1) + " is missing a dose");
      if (a.arm == 0 && *a.dose != 0.0) {
        throw ValidationError("study " + study_label(a.study - 1) + " has a non-zero dose on its control arm");
      }
    }
  }
}

std::vector<std::size_t> Dataset::arms_per_study() const {
  std::vector<std::size_t> counts;
  for (std::size_t s = 0; s < n_studies(); ++s) counts.push_back(study_offsets_[s + 1] - study_offsets_[s]);
  return counts;
}

std::span<const ArmRecord> Dataset::study_arms(std::size_t index) const {
  if (index >= n_studies()) throw ConfigError("study index out of range");
  return std::span<const ArmRecord>(arms_).subspan(study_offsets_[index],
                                                   study_offsets_[index + 1] - study_offsets_[index]);
}

std::string Dataset::study_label(std::size_t index) const {
  if (index < labels_.size() && !labels_[index].empty()) return labels_[index];
  return std::to_string(index + 1);
}

bool Dataset::has_doses() const {
  return std::any_of(arms_.begin(), arms_.end(), [](const ArmRecord& a) { return a.dose.has_value(); });
}

double Dataset::max_dose() const {
  double best = 0.0;
  for (const ArmRecord& a : arms_) best = std::max(best, a.dose.value_or(0.0));
  return best;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> WideTable::column_index(std::string_view name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return c;
  }
  return std::nullopt;
}

std::vector<std::size_t> WideTable::arm_columns(std::string_view prefix) const {
  std::vector<std::pair<int, std::size_t>> found;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    std::string_view name = columns[c];
    if (name.size() <= prefix.size() || name.substr(0, prefix.size()) != prefix) continue;
    std::string_view suffix = name.substr(prefix.size());
    if (!std::all_of(suffix.begin(), suffix.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      continue;
    }
    found.emplace_back(std::stoi(std::string(suffix)), c);
  }
  std::sort(found.begin(), found.end());
  for (std::size_t k = 0; k < found.size(); ++k) {
    if (found[k].first != static_cast<int>(k) + 1) {
      throw ConfigError("arm columns for prefix '" + std::string(prefix) + "' must be numbered 1.." +
                        std::to_string(found.size()));
    }
  }
  std::vector<std::size_t> result;
  for (auto& f : found) result.push_back(f.second);
  return result;
}

std::size_t WideTable::present_arm_count(std::size_t row, std::string_view prefix) const {
  std::size_t n = 0;
  for (std::size_t c : arm_columns(prefix)) {
    if (!std::holds_alternative<std::monostate>(rows.at(row).at(c))) ++n;
  }
  return n;
}

std::optional<double> WideTable::number(std::size_t row, std::string_view column) const {
  auto c = column_index(column);
  if (!c) throw ConfigError("missing column '" + std::string(column) + "'");
  const Cell& cell = rows.at(row).at(*c);
  if (const double* v = std::get_if<double>(&cell)) return *v;
  if (std::holds_alternative<std::monostate>(cell)) return std::nullopt;
  throw ParseError("non-numeric value in column '" + std::string(column) + "' at row " +
                       std::to_string(row + 2),
                   static_cast<long>(row + 2));
}

std::string WideTable::text(std::size_t row, std::string_view column) const {
  auto c = column_index(column);
  if (!c) throw ConfigError("missing column '" + std::string(column) + "'");
  const Cell& cell = rows.at(row).at(*c);
  if (const std::string* s = std::get_if<std::string>(&cell)) return *s;
  if (const double* v = std::get_if<double>(&cell)) {
    std::ostringstream out;
    out << *v;
    return out.str();
  }
  return {};
}

WideTable parse_csv(std::string_view text, const CsvSchema& schema) {
  auto records = split_records(text);
  if (records.empty()) throw ParseError("CSV input has no header row", 1);

  WideTable table;
  for (const auto& name : records.front().fields) table.columns.push_back(trim(name));
  for (const auto& [name, type] : schema) {
    if (!table.has_column(name)) throw ConfigError("missing column '" + name + "'");
  }

  const std::size_t width = table.columns.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != width) {
      throw ParseError("row at line " + std::to_string(records[r].line) + " has " +
                           std::to_string(records[r].fields.size()) + " fields, header has " +
                           std::to_string(width),
                       records[r].line);
    }
  }

  std::vector<ColumnType> types(width, ColumnType::numeric);
  for (std::size_t c = 0; c < width; ++c) {
    auto it = schema.find(table.columns[c]);
    if (it != schema.end()) {
      types[c] = it->second;
      continue;
    }
    for (std::size_t r = 1; r < records.size(); ++r) {
      const std::string& raw = records[r].fields[c];
      if (records[r].quoted[c] || (!trim(raw).empty() && !parse_number(raw))) {
        types[c] = ColumnType::text;
        break;
      }
    }
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    std::vector<Cell> row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& raw = records[r].fields[c];
      std::string t = records[r].quoted[c] ? raw : trim(raw);
      if (t.empty()) {
        row.emplace_back(std::monostate{});
      } else if (types[c] == ColumnType::text) {
        row.emplace_back(t);
      } else if (auto v = parse_number(t)) {
        row.emplace_back(*v);
      } else {
        throw ParseError("non-numeric value '" + t + "' in column '" + table.columns[c] + "' at row " +
                             std::to_string(records[r].line),
                         records[r].line);
      }
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

WideTable read_csv_file(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), schema);
}

// ---------------------------------------------------------------------------

std::string_view to_string(ArmRole role) {
  switch (role) {
    case ArmRole::responders: return "responders";
    case ArmRole::sample_size: return "sampleSize";
    case ArmRole::mean: return "mean";
    case ArmRole::std_err: return "std.err";
    case ArmRole::count: return "count";
    case ArmRole::exposure: return "exposure";
    case ArmRole::dose: return "dose";
  }
  return "?";
}

ArmRole arm_role_from_string(std::string_view name) {
  if (name == "responders") return ArmRole::responders;
  if (name == "sampleSize" || name == "sample_size") return ArmRole::sample_size;
  if (name == "mean") return ArmRole::mean;
  if (name == "std.err" || name == "std_err") return ArmRole::std_err;
  if (name == "count") return ArmRole::count;
  if (name == "exposure") return ArmRole::exposure;
  if (name == "dose") return ArmRole::dose;
  throw ConfigError("unknown arm role '" + std::string(name) + "'");
}

ArmVars ArmVars::parse(std::string_view text) {
  ArmVars vars;
  std::string s(text);
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("arm variable '" + item + "' must look like role=prefix");
    std::string role = trim(item.substr(0, eq));
    std::string prefix = trim(item.substr(eq + 1));
    if (prefix.empty()) throw ConfigError("arm variable '" + role + "' has an empty prefix");
    vars.prefixes[arm_role_from_string(role)] = prefix;
  }
  return vars;
}

std::vector<ArmRole> required_roles(Endpoint endpoint) {
  switch (endpoint) {
    case Endpoint::binary: return {ArmRole::responders, ArmRole::sample_size};
    case Endpoint::continuous: return {ArmRole::mean, ArmRole::std_err};
    case Endpoint::count: return {ArmRole::count, ArmRole::exposure};
  }
  return {};
}

Dataset convert_wide_to_long(const WideTable& wide, const ArmVars& arm_vars, Endpoint endpoint) {
  std::vector<ArmRole> roles = required_roles(endpoint);
  const bool dosed = arm_vars.prefixes.count(ArmRole::dose) > 0;
  if (dosed) roles.push_back(ArmRole::dose);

  std::map<ArmRole, std::vector<std::size_t>> columns;
  std::size_t n_groups = 0;
  bool first = true;
  for (ArmRole role : roles) {
    auto it = arm_vars.prefixes.find(role);
    if (it == arm_vars.prefixes.end()) {
      throw ConfigError("arm variables lack the '" + std::string(to_string(role)) + "' role required for the " +
                        std::string(to_string(endpoint)) + " endpoint");
    }
    auto cols = wide.arm_columns(it->second);
    if (cols.empty()) throw ConfigError("missing column '" + it->second + "1' for role " + std::string(to_string(role)));
    if (first) {
      n_groups = cols.size();
      first = false;
    } else if (cols.size() != n_groups) {
      throw ConfigError("prefix '" + it->second + "' has " + std::to_string(cols.size()) +
                        " arm columns, expected " + std::to_string(n_groups));
    }
    columns[role] = std::move(cols);
  }
  if (arm_vars.n_arms_column && !wide.has_column(*arm_vars.n_arms_column)) {
    throw ConfigError("missing column '" + *arm_vars.n_arms_column + "'");
  }

  auto cell_number = [&](std::size_t row, std::size_t col) -> std::optional<double> {
    const Cell& cell = wide.rows[row][col];
    if (const double* v = std::get_if<double>(&cell)) return *v;
    if (std::holds_alternative<std::monostate>(cell)) return std::nullopt;
    throw ParseError("non-numeric value in column '" + wide.columns[col] + "' at row " + std::to_string(row + 2),
                     static_cast<long>(row + 2));
  };
  auto as_count = [&](double v, std::size_t row, std::size_t col) -> long {
    if (v != std::floor(v) || std::abs(v) > 1e15) {
      throw ValidationError("study " + study_name(wide, row) + " has a non-integer count in column '" +
                            wide.columns[col] + "'");
    }
    return static_cast<long>(v);
  };

  std::vector<ArmRecord> arms;
  std::vector<std::string> labels;
  for (std::size_t row = 0; row < wide.n_rows(); ++row) {
    const int study = static_cast<int>(row) + 1;
    const std::string name = study_name(wide, row);
    labels.push_back(wide.has_column("study") ? wide.text(row, "study") : std::string{});

    std::vector<ArmRecord> study_arms;
    for (std::size_t g = 0; g < n_groups; ++g) {
      std::map<ArmRole, std::optional<double>> values;
      std::size_t present = 0;
      for (ArmRole role : roles) {
        values[role] = cell_number(row, columns[role][g]);
        if (values[role]) ++present;
      }
      if (present == 0) continue;
      if (present != roles.size()) {
        throw ValidationError("study " + name + " has a partially filled arm " + std::to_string(g + 1));
      }
      ArmRecord arm;
      arm.study = study;
      if (dosed) arm.dose = *values[ArmRole::dose];
      switch (endpoint) {
        case Endpoint::binary: {
          BinaryOutcome o;
          o.responders = as_count(*values[ArmRole::responders], row, columns[ArmRole::responders][g]);
          o.sample_size = as_count(*values[ArmRole::sample_size], row, columns[ArmRole::sample_size][g]);
          if (o.responders > o.sample_size) {
            throw ValidationError("study " + name + " has responders (" + std::to_string(o.responders) +
                                  ") > sampleSize (" + std::to_string(o.sample_size) + ")");
          }
          arm.outcome = o;
          break;
        }
        case Endpoint::continuous:
          arm.outcome = ContinuousOutcome{*values[ArmRole::mean], *values[ArmRole::std_err]};
          break;
        case Endpoint::count:
          arm.outcome = CountOutcome{as_count(*values[ArmRole::count], row, columns[ArmRole::count][g]),
                                     *values[ArmRole::exposure]};
          break;
      }
      study_arms.push_back(arm);
    }

    if (arm_vars.n_arms_column) {
      auto declared = wide.number(row, *arm_vars.n_arms_column);
      if (!declared || static_cast<std::size_t>(*declared) != study_arms.size()) {
        throw ValidationError("study " + name + " declares " + (declared ? std::to_string(static_cast<long>(*declared)) : std::string("no")) +
                              " arms in '" + *arm_vars.n_arms_column + "' but has " +
                              std::to_string(study_arms.size()));
      }
    }

    // Control first: for dosed data the dose-0 arm, otherwise column order.
    if (dosed) {
      auto control = std::find_if(study_arms.begin(), study_arms.end(),
                                  [](const ArmRecord& a) { return *a.dose == 0.0; });
      if (control == study_arms.end()) throw ValidationError("study " + name + " has no dose-0 (control) arm");
      std::rotate(study_arms.begin(), control, control + 1);
    }
    for (std::size_t k = 0; k < study_arms.size(); ++k) study_arms[k].arm = static_cast<int>(k);
    arms.insert(arms.end(), study_arms.begin(), study_arms.end());
  }

  bool any_label = std::any_of(labels.begin(), labels.end(), [](const std::string& l) { return !l.empty(); });
  return Dataset(endpoint, std::move(arms), any_label ? std::move(labels) : std::vector<std::string>{});
}

// ---------------------------------------------------------------------------

std::string write_long_csv(const Dataset& dataset) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  out << "study,arm,dose,responders,sampleSize,mean,std_err,count,exposure\n";
  for (const ArmRecord& a : dataset.arms()) {
    out << a.study << ',' << a.arm << ',';
    if (a.dose) out << *a.dose;
    out << ',';
    std::visit(
        [&](const auto& o) {
          using T = std::decay_t<decltype(o)>;
          if constexpr (std::is_same_v<T, BinaryOutcome>) {
            out << o.responders << ',' << o.sample_size << ",,,,";
          } else if constexpr (std::is_same_v<T, ContinuousOutcome>) {
            out << ",," << o.mean << ',' << o.std_err << ",,";
          } else {
            out << ",,,," << o.events << ',' << o.exposure;
          }
        },
        a.outcome);
    out << '\n';
  }
  return out.str();
}

Dataset read_long_csv(std::string_view text, std::optional<Endpoint> expected) {
  WideTable table = parse_csv(text, {{"study", ColumnType::numeric}, {"arm", ColumnType::numeric}});
  auto populated = [&](std::string_view column) {
    if (!table.has_column(column)) return false;
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
      if (table.number(r, column)) return true;
    }
    return false;
  };

  std::vector<Endpoint> candidates;
  if (populated("responders") || populated("sampleSize")) candidates.push_back(Endpoint::binary);
  if (populated("mean") || populated("std_err")) candidates.push_back(Endpoint::continuous);
  if (populated("count") || populated("exposure")) candidates.push_back(Endpoint::count);
  if (candidates.size() > 1) throw ValidationError("long-format data mixes outcome columns of several endpoints");

  Endpoint endpoint = expected.value_or(candidates.empty() ? Endpoint::binary : candidates.front());
  if (!candidates.empty() && candidates.front() != endpoint) {
    throw ConfigError("likelihood expects a " + std::string(to_string(endpoint)) + " endpoint but the data has " +
                      std::string(to_string(candidates.front())) + " columns");
  }

  auto need = [&](std::size_t r, std::string_view column) {
    auto v = table.has_column(column) ? table.number(r, column) : std::nullopt;
    if (!v) {
      throw ValidationError("row " + std::to_string(r + 2) + " is missing '" + std::string(column) + "'");
    }
    return *v;
  };

  std::vector<ArmRecord> arms;
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    ArmRecord a;
    a.study = static_cast<int>(need(r, "study"));
    a.arm = static_cast<int>(need(r, "arm"));
    if (table.has_column("dose")) a.dose = table.number(r, "dose");
    switch (endpoint) {
      case Endpoint::binary:
        a.outcome = BinaryOutcome{static_cast<long>(need(r, "responders")), static_cast<long>(need(r, "sampleSize"))};
        break;
      case Endpoint::continuous:
        a.outcome = ContinuousOutcome{need(r, "mean"), need(r, "std_err")};
        break;
      case Endpoint::count:
        a.outcome = CountOutcome{static_cast<long>(need(r, "count")), need(r, "exposure")};
        break;
    }
    arms.push_back(a);
  }
  return Dataset(endpoint, std::move(arms));
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::string_view kBoucherPairwise =
    "study,duration,r1,n1,r2,n2\n"
    "Edwards (2000),short,4,73,63,140\n"
    "Storey (2001),short,8,116,53,113\n"
    "Brandes (2004),long,9,143,81,144\n"
    "Diener (2004),long,5,113,57,117\n"
    "Silberstein (2004),long,4,21,13,19\n"
    "Silberstein (2006),short,4,15,9,15\n";

// Dose columns d1..d4 = 0, 50, 100, 200 mg; blank cells are doses a study did not run.
constexpr std::string_view kBoucherFull =
    "study,duration,nd,d1,r1,n1,d2,r2,n2,d3,r3,n3,d4,r4,n4\n"
    "Edwards (2000),short,2,0,4,73,,,,,,,200,63,140\n"
    "Storey (2001),short,4,0,8,116,50,43,118,100,59,126,200,53,113\n"
    "Brandes (2004),long,3,0,9,143,,,,100,77,141,200,81,144\n"
    "Diener (2004),long,4,0,5,113,50,40,117,100,59,119,200,57,117\n"
    "Silberstein (2004),long,2,0,4,21,,,,,,,200,13,19\n"
    "Silberstein (2006),short,2,0,4,15,,,,,,,200,9,15\n";

}  // namespace

BuiltinDataset builtin_from_string(std::string_view name) {
  if (name == "boucher2016_pairwise") return BuiltinDataset::boucher2016_pairwise;
  if (name == "boucher2016_full") return BuiltinDataset::boucher2016_full;
  throw ConfigError("unknown builtin dataset '" + std::string(name) +
                    "' (expected boucher2016_pairwise or boucher2016_full)");
}

WideTable builtin_table(BuiltinDataset name) {
  const CsvSchema schema{{"study", ColumnType::text}, {"duration", ColumnType::text}};
  return parse_csv(name == BuiltinDataset::boucher2016_pairwise ? kBoucherPairwise : kBoucherFull, schema);
}

ArmVars builtin_arm_vars(BuiltinDataset name) {
  ArmVars vars;
  vars.prefixes = {{ArmRole::responders, "r"}, {ArmRole::sample_size, "n"}};
  if (name == BuiltinDataset::boucher2016_full) {
    vars.prefixes[ArmRole::dose] = "d";
    vars.n_arms_column = "nd";
  }
  return vars;
}

Dataset builtin_dataset(BuiltinDataset name) {
  return convert_wide_to_long(builtin_table(name), builtin_arm_vars(name), Endpoint::binary);
}

std::vector<std::vector<double>> extract_covariates(const WideTable& wide, std::span<const CovariateColumn> columns) {
  std::vector<std::vector<double>> x(wide.n_rows(), std::vector<double>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const CovariateColumn& spec = columns[j];
    if (!wide.has_column(spec.column)) throw ConfigError("missing covariate column '" + spec.column + "'");
    for (std::size_t r = 0; r < wide.n_rows(); ++r) {
      if (spec.equals) {
        x[r][j] = wide.text(r, spec.column) == *spec.equals ? 1.0 : 0.0;
        continue;
      }
      auto v = wide.number(r, spec.column);
      if (!v) {
        throw ValidationError("covariate '" + spec.column + "' is blank for study " + study_name(wide, r));
      }
      x[r][j] = *v;
    }
  }
  return x;
}

}  // namespace metabayes
