#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "matchtu/ipfp.hpp"
#include "matchtu/market.hpp"
#include "matchtu/matrix.hpp"

namespace matchtu {

// "MTU1" matrix container: 8-byte magic, two little-endian uint64 (rows,
// cols), then rows*cols little-endian doubles in row-major order.
inline constexpr std::array<char, 8> kMtuMagic = {'M', 'T', 'U', 'M',
                                                  'A', 'T', '1', '\0'};

// CSV matrices are a convenience for small inputs only.
inline constexpr std::size_t kCsvEntryLimit = 10000;

namespace detail {

inline void pack_u64_le(std::uint64_t value, char* out) {
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
}

inline std::uint64_t unpack_u64_le(const char* in) {
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[i]))
             << (8 * i);
  }
  return value;
}

inline std::runtime_error io_error(const std::filesystem::path& path,
                                   const std::string& what) {
  return std::runtime_error(path.string() + ": " + what);
}

}  // namespace detail

inline void write_mtu_matrix(const std::filesystem::path& path,
                             const Matrix& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw detail::io_error(path, "cannot open for writing");
  out.write(kMtuMagic.data(), kMtuMagic.size());
  char header[16];
  detail::pack_u64_le(m.rows(), header);
  detail::pack_u64_le(m.cols(), header + 8);
  out.write(header, sizeof(header));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      char buf[8];
      detail::pack_u64_le(std::bit_cast<std::uint64_t>(m.data()[i]), buf);
      out.write(buf, 8);
    }
  }
  if (!out) throw detail::io_error(path, "write failed");
}

inline Matrix read_mtu_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw detail::io_error(path, "cannot open");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMtuMagic) {
    throw detail::io_error(path, "not an MTU1 matrix file (bad magic)");
  }
  char header[16];
  in.read(header, sizeof(header));
  if (!in) throw detail::io_error(path, "truncated header");
  const std::uint64_t rows = detail::unpack_u64_le(header);
  const std::uint64_t cols = detail::unpack_u64_le(header + 8);
  Matrix m(rows, cols);
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!in) throw detail::io_error(path, "truncated payload");
  } else {
    for (std::size_t i = 0; i < m.size(); ++i) {
      char buf[8];
      in.read(buf, 8);
      if (!in) throw detail::io_error(path, "truncated payload");
      m.data()[i] = std::bit_cast<double>(detail::unpack_u64_le(buf));
    }
  }
  return m;
}

// Headerless comma-separated matrix, one row per line. Accepted only for
// small matrices; anything at benchmark scale must use MTU1.
inline Matrix read_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw detail::io_error(path, "cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t entries = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (cur != end && (*cur == ' ' || *cur == '\t')) ++cur;
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cur, end, value);
      if (ec != std::errc{}) {
        throw detail::io_error(path, "line " + std::to_string(line_no) +
                                         ": malformed number");
      }
      row.push_back(value);
      cur = ptr;
      if (cur == end) break;
      if (*cur != ',') {
        throw detail::io_error(path, "line " + std::to_string(line_no) +
                                         ": expected ','");
      }
      ++cur;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw detail::io_error(path, "line " + std::to_string(line_no) +
                                       ": ragged row");
    }
    entries += row.size();
    if (entries >= kCsvEntryLimit) {
      throw detail::io_error(
          path, "CSV matrices are limited to fewer than " +
                    std::to_string(kCsvEntryLimit) + " entries; use MTU1");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw detail::io_error(path, "empty matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

// Reads MTU1 when the magic matches, otherwise falls back to CSV.
inline Matrix read_matrix_any(const std::filesystem::path& path) {
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw detail::io_error(path, "cannot open");
    std::array<char, 8> magic{};
    in.read(magic.data(), magic.size());
    if (in && magic == kMtuMagic) return read_mtu_matrix(path);
  }
  return read_csv_matrix(path);
}

inline void write_mass_json(const std::filesystem::path& path,
                            const MassSpec& mass) {
  nlohmann::json j;
  j["n"] = std::vector<double>(mass.n.begin(), mass.n.end());
  j["m"] = std::vector<double>(mass.m.begin(), mass.m.end());
  j["C"] = mass.total_mass;
  std::ofstream out(path);
  if (!out) throw detail::io_error(path, "cannot open for writing");
  out << j.dump(2) << "\n";
}

inline MassSpec read_mass_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw detail::io_error(path, "cannot open");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw detail::io_error(path, e.what());
  }
  MassSpec mass;
  const auto n = j.at("n").get<std::vector<double>>();
  const auto m = j.at("m").get<std::vector<double>>();
  mass.n.assign(n.begin(), n.end());
  mass.m.assign(m.begin(), m.end());
  mass.total_mass = j.at("C").get<double>();
  return mass;
}

inline nlohmann::json scaling_state_json(const ScalingState& state) {
  nlohmann::json j;
  j["u"] = std::vector<double>(state.u.begin(), state.u.end());
  j["v"] = std::vector<double>(state.v.begin(), state.v.end());
  j["iters"] = state.iters_run;
  j["residual"] = state.final_residual;
  return j;
}

inline void write_scaling_state(const std::filesystem::path& path,
                                const ScalingState& state) {
  std::ofstream out(path);
  if (!out) throw detail::io_error(path, "cannot open for writing");
  out << scaling_state_json(state).dump(2) << "\n";
}

inline ScalingState read_scaling_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw detail::io_error(path, "cannot open");
  nlohmann::json j;
  in >> j;
  ScalingState state;
  const auto u = j.at("u").get<std::vector<double>>();
  const auto v = j.at("v").get<std::vector<double>>();
  state.u.assign(u.begin(), u.end());
  state.v.assign(v.begin(), v.end());
  state.iters_run = j.at("iters").get<int>();
  state.final_residual = j.at("residual").get<double>();
  return state;
}

// Dense matching: mu as MTU1 plus a JSON sidecar with the unmatched masses.
inline void write_dense_matching(const std::filesystem::path& mu_path,
                                 const std::filesystem::path& sidecar_path,
                                 const DenseMatching& matching) {
  write_mtu_matrix(mu_path, matching.mu);
  nlohmann::json j;
  j["mu_x0"] = std::vector<double>(matching.mu_x0.begin(),
                                   matching.mu_x0.end());
  j["mu_0y"] = std::vector<double>(matching.mu_0y.begin(),
                                   matching.mu_0y.end());
  std::ofstream out(sidecar_path);
  if (!out) throw detail::io_error(sidecar_path, "cannot open for writing");
  out << j.dump(2) << "\n";
}

inline DenseMatching read_dense_matching(
    const std::filesystem::path& mu_path,
    const std::filesystem::path& sidecar_path) {
  DenseMatching matching;
  matching.mu = read_mtu_matrix(mu_path);
  std::ifstream in(sidecar_path);
  if (!in) throw detail::io_error(sidecar_path, "cannot open");
  nlohmann::json j;
  in >> j;
  const auto x0 = j.at("mu_x0").get<std::vector<double>>();
  const auto y0 = j.at("mu_0y").get<std::vector<double>>();
  matching.mu_x0.assign(x0.begin(), x0.end());
  matching.mu_0y.assign(y0.begin(), y0.end());
  return matching;
}

// Factorized matching: psi and xi as MTU1 plus beta in a JSON sidecar.
inline void write_factorized_matching(const std::filesystem::path& psi_path,
                                      const std::filesystem::path& xi_path,
                                      const std::filesystem::path& sidecar,
                                      const FactorizedMatching& matching) {
  write_mtu_matrix(psi_path, matching.psi);
  write_mtu_matrix(xi_path, matching.xi);
  nlohmann::json j;
  j["beta"] = matching.beta;
  std::ofstream out(sidecar);
  if (!out) throw detail::io_error(sidecar, "cannot open for writing");
  out << j.dump(2) << "\n";
}

inline FactorizedMatching read_factorized_matching(
    const std::filesystem::path& psi_path,
    const std::filesystem::path& xi_path,
    const std::filesystem::path& sidecar) {
  FactorizedMatching matching;
  matching.psi = read_mtu_matrix(psi_path);
  matching.xi = read_mtu_matrix(xi_path);
  std::ifstream in(sidecar);
  if (!in) throw detail::io_error(sidecar, "cannot open");
  nlohmann::json j;
  in >> j;
  matching.beta = j.at("beta").get<double>();
  return matching;
}

}  // namespace matchtu
