#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace ice_search {

enum class ColumnKind { numeric, categorical };

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

// Tabular binary-classification data. X is row-major with one row per sample.
// Categorical columns hold integer codes 0..k-1 indexing category_labels[col].
struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<ColumnKind> columns;
  std::vector<std::vector<std::string>> category_labels;
  std::vector<double> X;
  std::vector<int> y;
  std::string task_description;
  // Original target values mapped to 0 and 1.
  std::array<std::string, 2> class_labels{"0", "1"};

  std::size_t n_rows() const noexcept { return y.size(); }
  std::size_t n_features() const noexcept { return feature_names.size(); }

  double at(std::size_t row, std::size_t col) const { return X[row * n_features() + col]; }
  double& at(std::size_t row, std::size_t col) { return X[row * n_features() + col]; }

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(X).subspan(r * n_features(), n_features());
  }

  std::array<std::size_t, 2> class_counts() const {
    std::array<std::size_t, 2> c{0, 0};
    for (int v : y) ++c[static_cast<std::size_t>(v)];
    return c;
  }

  bool has_missing() const {
    return std::any_of(X.begin(), X.end(), [](double v) { return is_missing(v); });
  }

  // Copy of the dataset restricted to the given rows, in the given order.
  Dataset select_rows(std::span<const std::size_t> rows) const {
    Dataset out;
    out.feature_names = feature_names;
    out.columns = columns;
    out.category_labels = category_labels;
    out.task_description = task_description;
    out.class_labels = class_labels;
    const std::size_t d = n_features();
    out.X.reserve(rows.size() * d);
    out.y.reserve(rows.size());
    for (std::size_t r : rows) {
      auto src = row(r);
      out.X.insert(out.X.end(), src.begin(), src.end());
      out.y.push_back(y[r]);
    }
    return out;
  }

  // Throws DataError when a structural invariant is broken.
  void validate() const {
    const std::size_t d = n_features();
    if (columns.size() != d || category_labels.size() != d)
      throw DataError("column metadata does not match feature count");
    if (X.size() != y.size() * d) throw DataError("feature matrix is not rows x features");
    for (int v : y)
      if (v != 0 && v != 1) throw DataError("labels must be 0 or 1");
    std::unordered_set<std::string> seen;
    for (const auto& n : feature_names)
      if (!seen.insert(n).second) throw DataError("duplicate feature name '" + n + "'");
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Splits one CSV record. Handles double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = was_quoted = true;
    } else if (c == ',') {
      cells.push_back(was_quoted ? cur : trim(cur));
      cur.clear();
      was_quoted = false;
    } else {
      cur += c;
    }
  }
  cells.push_back(was_quoted ? cur : trim(cur));
  return cells;
}

inline bool is_missing_token(const std::string& s) {
  if (s.empty() || s == "NA" || s == "N/A") return true;
  return s.size() == 3 && (s[0] == 'n' || s[0] == 'N') && (s[1] == 'a' || s[1] == 'A') &&
         (s[2] == 'n' || s[2] == 'N');
}

inline bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace detail

// Parses CSV text. The first record is the header. Non-numeric feature columns
// are integer-coded by first appearance; the target's lexicographically
// smaller value becomes class 0.
inline Dataset parse_csv(std::istream& in, const std::string& target_column,
                         std::span<const std::string> drop_columns = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  const auto header = detail::split_csv_line(line);

  std::size_t target = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == target_column) target = i;
  if (target == header.size()) throw DataError("target column '" + target_column + "' not found");

  std::vector<std::vector<std::string>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    rows.push_back(std::move(cells));
  }

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target) continue;
    if (std::find(drop_columns.begin(), drop_columns.end(), header[c]) != drop_columns.end()) continue;
    feature_cols.push_back(c);
  }

  Dataset ds;
  std::map<std::string, int> target_values;
  for (const auto& r : rows) {
    if (detail::is_missing_token(r[target])) throw DataError("target column has a missing value");
    target_values.emplace(r[target], 0);
  }
  if (target_values.size() != 2)
    throw DataError("target column must hold exactly 2 distinct values, found " +
                    std::to_string(target_values.size()));
  int code = 0;
  for (auto& [value, c] : target_values) {
    c = code;
    ds.class_labels[static_cast<std::size_t>(code++)] = value;
  }

  const std::size_t d = feature_cols.size();
  ds.X.assign(rows.size() * d, kMissing);
  for (std::size_t j = 0; j < d; ++j) {
    const std::size_t c = feature_cols[j];
    ds.feature_names.push_back(header[c]);
    bool numeric = true;
    double v;
    for (const auto& r : rows)
      if (!detail::is_missing_token(r[c]) && !detail::parse_double(r[c], v)) {
        numeric = false;
        break;
      }
    ds.columns.push_back(numeric ? ColumnKind::numeric : ColumnKind::categorical);
    ds.category_labels.emplace_back();
    std::unordered_map<std::string, int> codes;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& cell = rows[i][c];
      if (detail::is_missing_token(cell)) continue;
      if (numeric) {
        detail::parse_double(cell, ds.X[i * d + j]);
      } else {
        auto [it, inserted] = codes.emplace(cell, static_cast<int>(codes.size()));
        if (inserted) ds.category_labels[j].push_back(cell);
        ds.X[i * d + j] = it->second;
      }
    }
  }
  ds.y.reserve(rows.size());
  for (const auto& r : rows) ds.y.push_back(target_values.at(r[target]));
  ds.validate();
  return ds;
}

inline Dataset load_csv(const std::string& path, const std::string& target_column,
                        std::span<const std::string> drop_columns = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file '" + path + "'");
  return parse_csv(in, target_column, drop_columns);
}

// Replaces missing cells with the column median of the observed values.
// Categorical medians are rounded half-up to a code; all-missing columns get 0.
inline Dataset impute_median(const Dataset& dataset) {
  Dataset out = dataset;
  const std::size_t d = out.n_features(), n = out.n_rows();
  for (std::size_t j = 0; j < d; ++j) {
    std::vector<double> observed;
    bool any_missing = false;
    for (std::size_t i = 0; i < n; ++i) {
      double v = out.at(i, j);
      if (is_missing(v))
        any_missing = true;
      else
        observed.push_back(v);
    }
    if (!any_missing) continue;
    double fill = 0.0;
    if (!observed.empty()) {
      fill = detail::median_of(std::move(observed));
      if (out.columns[j] == ColumnKind::categorical) fill = std::floor(fill + 0.5);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (is_missing(out.at(i, j))) out.at(i, j) = fill;
  }
  return out;
}

// Oversamples the minority class with SMOTE until both classes have equal
// counts. Original rows are kept unchanged as a prefix; synthetic rows follow.
// Neighbors are found under Euclidean distance on columns standardized with
// whole-dataset statistics. When `parents` is given it receives, per
// synthetic row, the (base, neighbor) row indices it interpolates.
inline Dataset smote_balance(const Dataset& dataset, std::size_t k, std::uint64_t seed,
                             std::vector<std::pair<std::size_t, std::size_t>>* parents = nullptr) {
  if (dataset.has_missing()) throw DataError("smote_balance requires a dataset without missing cells");
  const auto counts = dataset.class_counts();
  if (counts[0] == 0 || counts[1] == 0) throw DataError("smote_balance requires both classes");
  if (counts[0] == counts[1]) return dataset;
  const int minority_label = counts[0] < counts[1] ? 0 : 1;
  const std::size_t m = counts[static_cast<std::size_t>(minority_label)];
  const std::size_t deficit = counts[static_cast<std::size_t>(1 - minority_label)] - m;
  if (m < 2) throw DataError("smote_balance requires at least 2 minority rows");
  if (k == 0) throw DataError("smote_balance requires k >= 1");

  const std::size_t d = dataset.n_features(), n = dataset.n_rows();
  std::vector<double> scale(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += dataset.at(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) sq += (dataset.at(i, j) - mean) * (dataset.at(i, j) - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    if (sd > 0.0) scale[j] = 1.0 / sd;
  }

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < n; ++i)
    if (dataset.y[i] == minority_label) minority.push_back(i);

  const std::size_t k_eff = std::min(k, m - 1);
  std::vector<std::vector<std::size_t>> neighbors(m);
  std::vector<std::pair<double, std::size_t>> dist(m);
  for (std::size_t a = 0; a < m; ++a) {
    auto ra = dataset.row(minority[a]);
    for (std::size_t b = 0; b < m; ++b) {
      double s = 0.0;
      auto rb = dataset.row(minority[b]);
      for (std::size_t j = 0; j < d; ++j) {
        double diff = (ra[j] - rb[j]) * scale[j];
        s += diff * diff;
      }
      dist[b] = {b == a ? std::numeric_limits<double>::infinity() : s, b};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff), dist.end());
    for (std::size_t t = 0; t < k_eff; ++t) neighbors[a].push_back(dist[t].second);
  }

  Dataset out = dataset;
  out.X.reserve((n + deficit) * d);
  out.y.reserve(n + deficit);
  Rng rng(derive_seed(seed, {0x5307e}));
  for (std::size_t s = 0; s < deficit; ++s) {
    const std::size_t a = s % m;
    const std::size_t b = neighbors[a][rng.index(k_eff)];
    const double u = rng.uniform01();
    auto x = dataset.row(minority[a]);
    auto xn = dataset.row(minority[b]);
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = std::min(x[j], xn[j]), hi = std::max(x[j], xn[j]);
      double v = x[j] + u * (xn[j] - x[j]);
      if (dataset.columns[j] == ColumnKind::categorical) v = std::floor(v + 0.5);
      out.X.push_back(std::clamp(v, lo, hi));
    }
    out.y.push_back(minority_label);
    if (parents) parents->emplace_back(minority[a], minority[b]);
  }
  return out;
}

struct FoldAssignment {
  std::vector<std::size_t> fold_of_row;
  std::size_t n_folds = 0;
  std::uint64_t seed = 0;

  std::vector<std::size_t> validation_rows(std::size_t fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of_row.size(); ++i)
      if (fold_of_row[i] == fold) rows.push_back(i);
    return rows;
  }

  std::vector<std::size_t> training_rows(std::size_t fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < fold_of_row.size(); ++i)
      if (fold_of_row[i] != fold) rows.push_back(i);
    return rows;
  }

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

// Seeded per-class shuffle followed by round-robin fold assignment. The
// round-robin position carries over from class 0 to class 1 so fold sizes
// stay within one of each other.
inline FoldAssignment stratified_folds(const Dataset& dataset, std::size_t n_folds, std::uint64_t seed) {
  if (n_folds < 2) throw DataError("stratified_folds requires at least 2 folds");
  const auto counts = dataset.class_counts();
  for (int c = 0; c < 2; ++c)
    if (counts[static_cast<std::size_t>(c)] < n_folds)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(counts[static_cast<std::size_t>(c)]) +
                      " rows, fewer than " + std::to_string(n_folds) + " folds");
  FoldAssignment fa{std::vector<std::size_t>(dataset.n_rows(), 0), n_folds, seed};
  Rng rng(derive_seed(seed, {0xf01d5}));
  std::size_t pos = 0;
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.n_rows(); ++i)
      if (dataset.y[i] == c) rows.push_back(i);
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t r : rows) fa.fold_of_row[r] = pos++ % n_folds;
  }
  return fa;
}

struct TrainTestSplit {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

// Stratified hold-out split: per class, round-half-up(fraction * count) rows
// go to the test side. Both index lists are ascending.
inline TrainTestSplit stratified_split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw DataError("test fraction must lie in (0, 1)");
  TrainTestSplit split;
  Rng rng(derive_seed(seed, {0x7e57}));
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dataset.n_rows(); ++i)
      if (dataset.y[i] == c) rows.push_back(i);
    rng.shuffle(std::span<std::size_t>(rows));
    const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(rows.size()) + 0.5));
    if (n_test == 0 || n_test == rows.size())
      throw DataError("test split leaves class " + std::to_string(c) + " empty on one side");
    split.test_rows.insert(split.test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train_rows.insert(split.train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(split.train_rows.begin(), split.train_rows.end());
  std::sort(split.test_rows.begin(), split.test_rows.end());
  return split;
}

}  // namespace ice_search
