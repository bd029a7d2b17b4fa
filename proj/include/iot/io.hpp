#pragma once

#include "iot/dataset.hpp"
#include "iot/ot_data.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace iot {

/// Raised for unreadable or malformed input files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest text that reads back to the same double.
/// Shortest decimal that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

inline std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

struct Table {
  std::vector<std::string> header;
  Mat data;  // one column per row of the file
};

inline void write_csv(std::ostream& os, const std::vector<std::string>& header, const Mat& data) {
  for (std::size_t j = 0; j < header.size(); ++j) os << (j ? "," : "") << header[j];
  os << '\n';
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    for (Eigen::Index r = 0; r < data.rows(); ++r) os << (r ? "," : "") << format_double(data(r, c));
    os << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header, const Mat& data) {
  require(static_cast<Eigen::Index>(header.size()) == data.rows(), "write_csv: header width differs from data");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  write_csv(os, header, data);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  t.header = split_csv_line(line);
  std::vector<double> values;
  Eigen::Index rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw DataError(path.string() + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                      " fields, expected " + std::to_string(t.header.size()));
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v))
        throw DataError(path.string() + ": bad number '" + c + "' in row " + std::to_string(rows + 1));
      values.push_back(v);
    }
    ++rows;
  }
  t.data = Eigen::Map<Mat>(values.data(), static_cast<Eigen::Index>(t.header.size()), rows);
  return t;
}

namespace detail {

inline Eigen::Index count_prefixed(const std::vector<std::string>& header, std::size_t from, const std::string& prefix) {
  Eigen::Index n = 0;
  while (from + static_cast<std::size_t>(n) < header.size() &&
         header[from + static_cast<std::size_t>(n)] == prefix + std::to_string(n))
    ++n;
  return n;
}

}  // namespace detail

/// paired.csv (x0..,y0..), unpaired_x.csv (x0..), unpaired_y.csv (y0..).
inline void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  std::filesystem::create_directories(dir);
  Mat paired(d.x_dim() + d.y_dim(), d.num_paired());
  paired << d.paired_x, d.paired_y;
  auto header = numbered("x", d.x_dim());
  const auto ys = numbered("y", d.y_dim());
  header.insert(header.end(), ys.begin(), ys.end());
  write_csv(dir / "paired.csv", header, paired);
  write_csv(dir / "unpaired_x.csv", numbered("x", d.x_dim()), d.unpaired_x);
  write_csv(dir / "unpaired_y.csv", ys, d.unpaired_y);
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const Table p = read_csv(dir / "paired.csv");
  const Table ux = read_csv(dir / "unpaired_x.csv");
  const Table uy = read_csv(dir / "unpaired_y.csv");
  const Eigen::Index dx = detail::count_prefixed(p.header, 0, "x");
  const Eigen::Index dy = detail::count_prefixed(p.header, static_cast<std::size_t>(dx), "y");
  if (dx == 0 || dy == 0 || static_cast<std::size_t>(dx + dy) != p.header.size())
    throw DataError("paired.csv: header must be x0..x{Dx-1},y0..y{Dy-1}");
  if (ux.header != numbered("x", dx)) throw DataError("unpaired_x.csv: header must be x0..x" + std::to_string(dx - 1));
  if (uy.header != numbered("y", dy)) throw DataError("unpaired_y.csv: header must be y0..y" + std::to_string(dy - 1));
  Dataset d{p.data.topRows(dx), p.data.bottomRows(dy), ux.data, uy.data};
  if (d.num_paired() > d.num_x() || d.num_paired() > d.num_y())
    throw DataError("dataset: P must not exceed Q or R");
  if (!has_prefix_property(d)) throw DataError("dataset: unpaired files must start with the paired samples");
  return d;
}

inline nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw DataError("ragged matrix in json");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

inline Vec vector_from_json(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

inline nlohmann::json task_to_json(const RecoverableTask& t) {
  nlohmann::json j;
  j["eps"] = t.eps;
  j["a_matrix"] = nlohmann::json::array();
  j["a_offset"] = nlohmann::json::array();
  for (std::size_t m = 0; m < t.a_matrix.size(); ++m) {
    j["a_matrix"].push_back(matrix_to_json(t.a_matrix[m]));
    j["a_offset"].push_back(std::vector<double>(t.a_offset[m].begin(), t.a_offset[m].end()));
  }
  j["log_v"] = std::vector<double>(t.log_v.begin(), t.log_v.end());
  j["log_w"] = std::vector<double>(t.log_w.begin(), t.log_w.end());
  j["center"] = matrix_to_json(t.center);
  j["log_scale"] = matrix_to_json(t.log_scale);
  return j;
}

inline RecoverableTask task_from_json(const nlohmann::json& j) {
  try {
    RecoverableTask t;
    t.eps = j.at("eps").get<double>();
    for (const auto& a : j.at("a_matrix")) t.a_matrix.push_back(matrix_from_json(a));
    for (const auto& c : j.at("a_offset")) t.a_offset.push_back(vector_from_json(c));
    t.log_v = vector_from_json(j.at("log_v"));
    t.log_w = vector_from_json(j.at("log_w"));
    t.center = matrix_from_json(j.at("center"));
    t.log_scale = matrix_from_json(j.at("log_scale"));
    if (t.a_matrix.empty() || t.a_matrix.size() != t.a_offset.size() ||
        static_cast<Eigen::Index>(t.a_matrix.size()) != t.log_v.size() || t.center.cols() != t.log_w.size() ||
        t.log_scale.rows() != t.center.rows() || t.log_scale.cols() != t.center.cols() || !(t.eps > 0.0))
      throw DataError("oracle spec: inconsistent shapes");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("oracle spec: ") + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace iot
