#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace metabayes {

enum class Endpoint { binary, continuous, count };

std::string_view to_string(Endpoint endpoint);
Endpoint endpoint_from_string(std::string_view name);

struct BinaryOutcome {
  long responders = 0;
  long sample_size = 1;
};

struct ContinuousOutcome {
  double mean = 0.0;
  double std_err = 1.0;
};

struct CountOutcome {
  long events = 0;
  double exposure = 1.0;
};

using Outcome = std::variant<BinaryOutcome, ContinuousOutcome, CountOutcome>;

/// One arm of one study in long (one-arm-per-row) format.
///
/// `study` is 1-based; `arm` is 0 for the control/placebo arm. `dose` is only
/// populated for dose-response datasets and is 0 on the control arm.
struct ArmRecord {
  int study = 1;
  int arm = 0;
  std::optional<double> dose;
  Outcome outcome;
};

Endpoint endpoint_of(const Outcome& outcome);

/// Long-format meta-analysis dataset. Arms are stored grouped by study in
/// ascending study order; construction validates every structural invariant
/// and throws ValidationError otherwise.
class Dataset {
 public:
  Dataset() = default;
  Dataset(Endpoint endpoint, std::vector<ArmRecord> arms,
          std::vector<std::string> study_labels = {});

  Endpoint endpoint() const noexcept { return endpoint_; }
  std::span<const ArmRecord> arms() const noexcept { return arms_; }
  std::size_t n_arms() const noexcept { return arms_.size(); }
  std::size_t n_studies() const noexcept { return study_offsets_.empty() ? 0 : study_offsets_.size() - 1; }
  std::vector<std::size_t> arms_per_study() const;

  /// Arms of study `index` (0-based), control arm first.
  std::span<const ArmRecord> study_arms(std::size_t index) const;
  std::size_t study_offset(std::size_t index) const { return study_offsets_.at(index); }

  /// Human-readable study label; falls back to the 1-based index.
  std::string study_label(std::size_t index) const;
  const std::vector<std::string>& study_labels() const noexcept { return labels_; }

  bool has_doses() const;
  double max_dose() const;

 private:
  Endpoint endpoint_ = Endpoint::binary;
  std::vector<ArmRecord> arms_;
  std::vector<std::size_t> study_offsets_;
  std::vector<std::string> labels_;
};

// ---------------------------------------------------------------------------
// Wide (one-study-per-row) tables
// ---------------------------------------------------------------------------

enum class ColumnType { numeric, text };

/// Empty optional-like cell: absent (blank), number, or text.
using Cell = std::variant<std::monostate, double, std::string>;

struct WideTable {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t n_rows() const noexcept { return rows.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;
  bool has_column(std::string_view name) const { return column_index(name).has_value(); }

  /// Columns named `<prefix><k>` for k = 1, 2, ..., in ascending k.
  std::vector<std::size_t> arm_columns(std::string_view prefix) const;

  /// Number of arm groups in `row` whose `prefix` cell is present.
  std::size_t present_arm_count(std::size_t row, std::string_view prefix) const;

  std::optional<double> number(std::size_t row, std::string_view column) const;
  std::string text(std::size_t row, std::string_view column) const;
};

/// Column name -> expected type. Columns not listed are inferred: numeric if
/// every non-blank cell parses as a number, text otherwise.
using CsvSchema = std::map<std::string, ColumnType, std::less<>>;

WideTable parse_csv(std::string_view text, const CsvSchema& schema = {});
WideTable read_csv_file(const std::string& path, const CsvSchema& schema = {});

// ---------------------------------------------------------------------------
// Wide -> long conversion
// ---------------------------------------------------------------------------

enum class ArmRole { responders, sample_size, mean, std_err, count, exposure, dose };

std::string_view to_string(ArmRole role);
ArmRole arm_role_from_string(std::string_view name);

/// Which column prefix carries each per-arm role, e.g. responders -> "r".
struct ArmVars {
  std::map<ArmRole, std::string> prefixes;
  std::optional<std::string> n_arms_column;

  /// Parses "responders=r,sampleSize=n[,dose=d]".
  static ArmVars parse(std::string_view text);
};

/// Roles an endpoint requires (binary: responders + sampleSize, ...).
std::vector<ArmRole> required_roles(Endpoint endpoint);

Dataset convert_wide_to_long(const WideTable& wide, const ArmVars& arm_vars, Endpoint endpoint);

// ---------------------------------------------------------------------------
// Long-format CSV
// ---------------------------------------------------------------------------

/// Columns: study, arm, dose, responders, sampleSize, mean, std_err, count,
/// exposure; inapplicable cells are left empty.
std::string write_long_csv(const Dataset& dataset);

/// Reads the long format back. The endpoint is inferred from which outcome
/// columns are populated; passing `expected` turns a mismatch into ConfigError.
Dataset read_long_csv(std::string_view text, std::optional<Endpoint> expected = std::nullopt);

// ---------------------------------------------------------------------------
// Bundled datasets and study-level covariates
// ---------------------------------------------------------------------------

enum class BuiltinDataset { boucher2016_pairwise, boucher2016_full };

BuiltinDataset builtin_from_string(std::string_view name);
/// The bundled one-study-per-row table, including the `duration` column.
WideTable builtin_table(BuiltinDataset name);
ArmVars builtin_arm_vars(BuiltinDataset name);
Dataset builtin_dataset(BuiltinDataset name);

/// Extraction rule for one covariate column: numeric columns are taken as-is;
/// text columns become 0/1 indicators of `equals`.
struct CovariateColumn {
  std::string column;
  std::optional<std::string> equals;
};

/// n_rows x p row-major covariate matrix.
std::vector<std::vector<double>> extract_covariates(const WideTable& wide,
                                                    std::span<const CovariateColumn> columns);

}  // namespace metabayes
