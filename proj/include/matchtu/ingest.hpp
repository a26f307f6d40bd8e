#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "matchtu/matrix.hpp"

namespace matchtu {

// Densified view of a ratings CSV. Ids are assigned indices in order of
// first appearance; entries never rated are NaN so downstream imputation or
// factorization can tell them apart from real zeros.
struct RatingsTable {
  Matrix ratings;
  std::vector<std::int64_t> rater_ids;  // row index -> original id
  std::vector<std::int64_t> rated_ids;  // column index -> original id
  std::unordered_map<std::int64_t, std::size_t> rater_index;
  std::unordered_map<std::int64_t, std::size_t> rated_index;
  int duplicate_count = 0;  // (rater, rated) repeats; last value wins
};

namespace detail {

template <class T>
inline T parse_field(const char*& cur, const char* end,
                     const std::filesystem::path& path, std::size_t line_no) {
  while (cur != end && (*cur == ' ' || *cur == '\t')) ++cur;
  T value{};
  const auto [ptr, ec] = std::from_chars(cur, end, value);
  if (ec != std::errc{}) {
    throw std::runtime_error(path.string() + ": line " +
                             std::to_string(line_no) + ": malformed row");
  }
  cur = ptr;
  while (cur != end && (*cur == ' ' || *cur == '\t')) ++cur;
  return value;
}

}  // namespace detail

// Reads CSV rows of (rater_id, rated_id, rating). The optional shape hint is
// the expected (raters, rated) sizes and is enforced when present.
inline RatingsTable ingest_ratings(
    const std::filesystem::path& path,
    std::optional<std::pair<std::size_t, std::size_t>> shape_hint =
        std::nullopt) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");

  struct Entry {
    std::size_t row, col;
    double value;
  };
  std::vector<Entry> entries;
  RatingsTable table;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* cur = line.data();
    const char* end = line.data() + line.size();

    const auto rater =
        detail::parse_field<std::int64_t>(cur, end, path, line_no);
    if (cur == end || *cur != ',') {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) + ": malformed row");
    }
    ++cur;
    const auto rated =
        detail::parse_field<std::int64_t>(cur, end, path, line_no);
    if (cur == end || *cur != ',') {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) + ": malformed row");
    }
    ++cur;
    const auto rating = detail::parse_field<double>(cur, end, path, line_no);
    if (cur != end) {
      throw std::runtime_error(path.string() + ": line " +
                               std::to_string(line_no) +
                               ": trailing characters");
    }

    const auto [rit, rnew] =
        table.rater_index.try_emplace(rater, table.rater_ids.size());
    if (rnew) table.rater_ids.push_back(rater);
    const auto [cit, cnew] =
        table.rated_index.try_emplace(rated, table.rated_ids.size());
    if (cnew) table.rated_ids.push_back(rated);
    entries.push_back({rit->second, cit->second, rating});
  }

  if (entries.empty()) {
    throw std::runtime_error(path.string() + ": no ratings");
  }

  const std::size_t R = table.rater_ids.size();
  const std::size_t C = table.rated_ids.size();
  if (shape_hint && (shape_hint->first != R || shape_hint->second != C)) {
    throw std::runtime_error(
        path.string() + ": shape hint (" + std::to_string(shape_hint->first) +
        ", " + std::to_string(shape_hint->second) + ") does not match ids (" +
        std::to_string(R) + ", " + std::to_string(C) + ")");
  }

  table.ratings = Matrix(R, C, std::numeric_limits<double>::quiet_NaN());
  for (const Entry& e : entries) {
    if (!std::isnan(table.ratings(e.row, e.col))) ++table.duplicate_count;
    table.ratings(e.row, e.col) = e.value;
  }
  return table;
}

}  // namespace matchtu
