#include "kdde/dataset.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "kdde/error.hpp"

namespace kdde {

void TransitionDataset::validate() const {
  if (current.rows() == 0) throw Error(ErrorCode::EmptyDataset, "dataset has no samples");
  if (current.rows() != next.rows() || current.cols() != next.cols())
    throw Error(ErrorCode::DimensionMismatch, "current and next state matrices differ in shape");
  if (!current.allFinite() || !next.allFinite()) throw Error(ErrorCode::NonFiniteInput, "dataset holds NaN or Inf");
}

void write_dataset_csv(const TransitionDataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  const int n = data.dim();
  for (int d = 0; d < n; ++d) out << (d ? "," : "") << 'x' << d + 1;
  for (int d = 0; d < n; ++d) out << ",y" << d + 1;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (int d = 0; d < n; ++d) out << (d ? "," : "") << data.current(i, d);
    for (int d = 0; d < n; ++d) out << ',' << data.next(i, d);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "failed while writing " + path.string());
}

TransitionDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, path.string() + " is empty");

  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      header.push_back(cell);
    }
  }
  if (header.empty() || header.size() % 2 != 0)
    throw Error(ErrorCode::SchemaError, "header must list x1..xn,y1..yn");
  const int n = static_cast<int>(header.size() / 2);
  for (int d = 0; d < n; ++d) {
    if (header[static_cast<std::size_t>(d)] != "x" + std::to_string(d + 1) ||
        header[static_cast<std::size_t>(n + d)] != "y" + std::to_string(d + 1))
      throw Error(ErrorCode::SchemaError, "header must list x1..xn,y1..yn");
  }

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (int c = 0; c < 2 * n; ++c) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, end, v);
      if (ec != std::errc())
        throw Error(ErrorCode::SchemaError, "bad number on data row " + std::to_string(rows + 1));
      values.push_back(v);
      p = ptr;
      while (p < end && *p == ' ') ++p;
      if (c + 1 < 2 * n) {
        if (p >= end || *p != ',')
          throw Error(ErrorCode::SchemaError, "data row " + std::to_string(rows + 1) + " has too few columns");
        ++p;
      }
    }
    if (p != end) throw Error(ErrorCode::SchemaError, "data row " + std::to_string(rows + 1) + " has too many columns");
    ++rows;
  }

  TransitionDataset data;
  data.current.resize(static_cast<Eigen::Index>(rows), n);
  data.next.resize(static_cast<Eigen::Index>(rows), n);
  for (std::size_t r = 0; r < rows; ++r)
    for (int d = 0; d < n; ++d) {
      data.current(static_cast<Eigen::Index>(r), d) = values[r * 2 * static_cast<std::size_t>(n) + static_cast<std::size_t>(d)];
      data.next(static_cast<Eigen::Index>(r), d) = values[r * 2 * static_cast<std::size_t>(n) + static_cast<std::size_t>(n + d)];
    }

  const auto side = provenance_path(path);
  if (std::filesystem::exists(side)) data.provenance = read_json(side);
  data.provenance["source_file"] = path.string();
  return data;
}

std::filesystem::path provenance_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".json";
  return p;
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "failed while writing " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, "malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace kdde
