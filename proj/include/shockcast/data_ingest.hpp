#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "shockcast/embedding.hpp"
#include "shockcast/error.hpp"
#include "shockcast/text_io.hpp"

namespace shockcast {

enum class SeriesKind { raw, normalized };

inline const char* to_string(SeriesKind k) { return k == SeriesKind::raw ? "raw" : "normalized"; }

using MaybePrice = std::optional<double>;

// Annual prices, one row per year and one column per commodity. Missing cells
// are std::nullopt.
struct PriceTable {
  std::vector<int> years;
  std::vector<std::string> commodities;
  std::vector<std::vector<MaybePrice>> values;  // values[row][column]
  SeriesKind kind = SeriesKind::raw;

  std::size_t column_index(std::string_view name) const {
    auto it = std::find(commodities.begin(), commodities.end(), name);
    if (it == commodities.end()) throw ValidationError("unknown commodity '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - commodities.begin());
  }
};

struct PriceSeries {
  std::string commodity;
  std::vector<int> years;
  std::vector<MaybePrice> values;
  SeriesKind kind = SeriesKind::raw;
};

// Statistics used by z-score normalization (population standard deviation).
struct NormStats {
  double mean = 0.0;
  double stddev = 1.0;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct SpikeLabelSet {
  std::vector<int> years;
  std::vector<int> labels;  // 0 or 1
  std::vector<double> avg_price;   // price of the labeled year
  std::vector<double> pct_change;  // percentage change against the prior year
  double threshold_pct = 25.0;

  std::size_t size() const noexcept { return years.size(); }
};

// Year-aligned (price, label, embedding) triples, sorted by year.
struct AlignedDataset {
  std::vector<int> years;
  std::vector<double> prices;
  std::vector<int> labels;
  std::vector<std::vector<double>> embeddings;

  std::size_t size() const noexcept { return years.size(); }
  std::size_t embedding_dim() const noexcept { return embeddings.empty() ? 0 : embeddings.front().size(); }
};

// Parses `year,<commodity>,...` CSV text. Empty cells are missing values.
inline PriceTable parse_price_table(std::string_view csv) {
  const auto lines = text::split_lines(csv);
  if (lines.empty()) throw ParseError(1, "empty document");

  const auto header = text::split_csv_line(lines[0], 1);
  std::string first(header[0]);
  std::transform(first.begin(), first.end(), first.begin(), [](unsigned char c) { return std::tolower(c); });
  if (first != "year") throw ParseError(1, "first header column must be 'year', got '" + header[0] + "'");
  if (header.size() < 2) throw ParseError(1, "no commodity columns");

  PriceTable table;
  table.commodities.assign(header.begin() + 1, header.end());
  {
    std::set<std::string> seen;
    for (const auto& c : table.commodities) {
      if (c.empty()) throw ParseError(1, "empty commodity name");
      if (!seen.insert(c).second) throw ParseError(1, "duplicate commodity column '" + c + "'");
    }
  }

  struct Row {
    int year;
    std::size_t line;
    std::vector<MaybePrice> cells;
  };
  std::vector<Row> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (text::trim(lines[i]).empty()) continue;
    const auto fields = text::split_csv_line(lines[i], line_no);
    if (fields.size() != header.size()) {
      throw ParseError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    const auto year = text::parse_int(fields[0]);
    if (!year) throw ParseError(line_no, "year '" + fields[0] + "' is not an integer");
    Row row{static_cast<int>(*year), line_no, {}};
    row.cells.reserve(fields.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      if (text::trim(fields[c]).empty()) {
        row.cells.emplace_back(std::nullopt);
        continue;
      }
      const auto v = text::parse_double(fields[c]);
      if (!v) {
        throw ParseError(line_no, "cell '" + fields[c] + "' in column '" + header[c] + "' is not a finite decimal");
      }
      row.cells.emplace_back(*v);
    }
    rows.push_back(std::move(row));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.year < b.year; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].year == rows[i - 1].year) {
      throw ValidationError("duplicate year " + std::to_string(rows[i].year) + " (lines " +
                            std::to_string(rows[i - 1].line) + " and " + std::to_string(rows[i].line) + ")");
    }
  }
  for (auto& r : rows) {
    table.years.push_back(r.year);
    table.values.push_back(std::move(r.cells));
  }
  return table;
}

inline PriceSeries column_series(const PriceTable& table, std::string_view commodity) {
  const std::size_t c = table.column_index(commodity);
  PriceSeries s{std::string(commodity), table.years, {}, table.kind};
  s.values.reserve(table.years.size());
  for (const auto& row : table.values) s.values.push_back(row[c]);
  return s;
}

inline NormStats fit_norm_stats(const std::vector<MaybePrice>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  double max_abs = 0.0;
  for (const auto& v : values) {
    if (!v) continue;
    sum += *v;
    max_abs = std::max(max_abs, std::abs(*v));
    ++n;
  }
  if (n < 2) throw InsufficientDataError("z-score needs at least 2 present values, got " + std::to_string(n));
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& v : values)
    if (v) ss += (*v - mean) * (*v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n));
  if (!(sd > 1e-12 * max_abs)) throw DegenerateSeriesError("series is constant (standard deviation 0)");
  return {mean, sd};
}

inline PriceSeries zscore_normalize(const PriceSeries& series, NormStats* stats_out = nullptr) {
  if (series.values.size() != series.years.size()) throw ContractError("series years/values length mismatch");
  const NormStats st = fit_norm_stats(series.values);
  PriceSeries out{series.commodity, series.years, {}, SeriesKind::normalized};
  out.values.reserve(series.values.size());
  for (const auto& v : series.values) {
    out.values.push_back(v ? MaybePrice((*v - st.mean) / st.stddev) : std::nullopt);
  }
  if (stats_out) *stats_out = st;
  return out;
}

// Normalizes every commodity column independently.
inline PriceTable normalize_table(const PriceTable& table, std::vector<NormStats>* stats_out = nullptr) {
  PriceTable out = table;
  out.kind = SeriesKind::normalized;
  std::vector<NormStats> stats;
  for (std::size_t c = 0; c < table.commodities.size(); ++c) {
    NormStats st;
    try {
      const auto z = zscore_normalize(column_series(table, table.commodities[c]), &st);
      for (std::size_t r = 0; r < table.years.size(); ++r) out.values[r][c] = z.values[r];
    } catch (const ValidationError& e) {
      throw ValidationError("commodity '" + table.commodities[c] + "': " + e.what());
    }
    stats.push_back(st);
  }
  if (stats_out) *stats_out = std::move(stats);
  return out;
}

// Per-year mean of the present cells. Years with no present cell are omitted.
// The result keeps the table's kind: on a raw table this is the yearly
// average price; on a normalized table it is the composite z-score.
inline PriceSeries composite_average(const PriceTable& table) {
  if (table.years.empty() || table.commodities.empty()) throw ValidationError("empty price table");
  PriceSeries out{"composite", {}, {}, table.kind};
  for (std::size_t r = 0; r < table.years.size(); ++r) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& v : table.values[r]) {
      if (!v) continue;
      sum += *v;
      ++n;
    }
    if (n == 0) continue;
    out.years.push_back(table.years[r]);
    out.values.emplace_back(sum / static_cast<double>(n));
  }
  return out;
}

// Binary spike labels: 1 iff the year-over-year change exceeds threshold_pct
// (strictly). A year is labeled only if it and the immediately preceding
// calendar year are both present and the preceding price is positive.
inline SpikeLabelSet label_spikes(const PriceSeries& series, double threshold_pct = 25.0) {
  if (series.kind != SeriesKind::raw) {
    throw KindError("spike labels need raw prices; percentage change of z-scores is undefined");
  }
  if (!(threshold_pct > 0.0) || !std::isfinite(threshold_pct)) {
    throw ValidationError("threshold_pct must be positive");
  }
  if (series.values.size() != series.years.size()) throw ContractError("series years/values length mismatch");
  SpikeLabelSet out;
  out.threshold_pct = threshold_pct;
  for (std::size_t i = 1; i < series.years.size(); ++i) {
    const auto& prev = series.values[i - 1];
    const auto& cur = series.values[i];
    if (series.years[i - 1] != series.years[i] - 1) continue;
    if (!prev || !cur || !(*prev > 0.0)) continue;
    const double pct = (*cur - *prev) / *prev * 100.0;
    out.years.push_back(series.years[i]);
    out.labels.push_back(pct > threshold_pct ? 1 : 0);
    out.avg_price.push_back(*cur);
    out.pct_change.push_back(pct);
  }
  return out;
}

// `year,avg_price,pct_change,spike`
inline std::string labels_to_csv(const SpikeLabelSet& labels) {
  std::string out = "year,avg_price,pct_change,spike\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(labels.years[i]) + "," + text::format_double(labels.avg_price[i]) + "," +
           text::format_double(labels.pct_change[i]) + "," + std::to_string(labels.labels[i]) + "\n";
  }
  return out;
}

inline SpikeLabelSet labels_from_csv(std::string_view csv) {
  const auto lines = text::split_lines(csv);
  if (lines.empty() || text::trim(lines[0]) != "year,avg_price,pct_change,spike") {
    throw ParseError(1, "expected header 'year,avg_price,pct_change,spike'");
  }
  SpikeLabelSet out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = text::split_csv_line(lines[i], i + 1);
    if (f.size() != 4) throw ParseError(i + 1, "expected 4 fields");
    const auto year = text::parse_int(f[0]);
    const auto price = text::parse_double(f[1]);
    const auto pct = text::parse_double(f[2]);
    const auto spike = text::parse_int(f[3]);
    if (!year || !price || !pct || !spike || (*spike != 0 && *spike != 1)) {
      throw ParseError(i + 1, "malformed label row");
    }
    out.years.push_back(static_cast<int>(*year));
    out.avg_price.push_back(*price);
    out.pct_change.push_back(*pct);
    out.labels.push_back(static_cast<int>(*spike));
  }
  return out;
}

namespace detail {
template <typename Years>
std::string year_range(const Years& years) {
  if (years.empty()) return "(none)";
  const auto [lo, hi] = std::minmax_element(years.begin(), years.end());
  return std::to_string(*lo) + "-" + std::to_string(*hi);
}
}  // namespace detail

// Inner join of the three sources on year, ordered by year.
inline AlignedDataset align_dataset(const PriceSeries& prices, const SpikeLabelSet& labels,
                                    const std::vector<EmbeddingVector>& embeddings) {
  std::map<int, double> price_by_year;
  for (std::size_t i = 0; i < prices.years.size(); ++i)
    if (prices.values[i]) price_by_year[prices.years[i]] = *prices.values[i];
  std::map<int, int> label_by_year;
  for (std::size_t i = 0; i < labels.size(); ++i) label_by_year[labels.years[i]] = labels.labels[i];
  std::map<int, const EmbeddingVector*> emb_by_year;
  std::size_t dim = 0;
  for (const auto& e : embeddings) {
    validate_embedding(e);
    if (dim == 0) dim = e.dim();
    if (e.dim() != dim) throw ContractError("embeddings have non-uniform dimension");
    if (!emb_by_year.emplace(e.year, &e).second) {
      throw ValidationError("duplicate embedding for year " + std::to_string(e.year));
    }
  }

  AlignedDataset out;
  for (const auto& [year, price] : price_by_year) {
    auto l = label_by_year.find(year);
    auto e = emb_by_year.find(year);
    if (l == label_by_year.end() || e == emb_by_year.end()) continue;
    out.years.push_back(year);
    out.prices.push_back(price);
    out.labels.push_back(l->second);
    out.embeddings.push_back(e->second->values);
  }
  if (out.years.empty()) {
    std::vector<int> ly(labels.years), ey;
    std::vector<int> py;
    for (const auto& [y, _] : price_by_year) py.push_back(y);
    for (const auto& [y, _] : emb_by_year) ey.push_back(y);
    throw AlignmentError("no common years: prices " + detail::year_range(py) + ", labels " +
                         detail::year_range(ly) + ", embeddings " + detail::year_range(ey));
  }
  return out;
}

}  // namespace shockcast
