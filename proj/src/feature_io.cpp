#include "histofilter/feature_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>

#include <fmt/format.h>

#include "csv.hpp"
#include "histofilter/error.hpp"
#include "io_util.hpp"

namespace histofilter {

static_assert(std::endian::native == std::endian::little, "FV01 I/O assumes a little-endian host");

FeatureMatrix::FeatureMatrix(std::vector<std::string> sample_ids, RowMatrix rows)
    : ids_(std::move(sample_ids)), rows_(std::move(rows)) {
  if (static_cast<Eigen::Index>(ids_.size()) != rows_.rows())
    throw Error(ErrorCode::DimMismatch, fmt::format("{} ids for {} rows", ids_.size(), rows_.rows()));
  if (!rows_.allFinite()) {
    for (Eigen::Index i = 0; i < rows_.rows(); ++i)
      if (!rows_.row(i).allFinite())
        throw Error(ErrorCode::NonFinite, "row '" + ids_[static_cast<std::size_t>(i)] + "' has a non-finite value");
  }
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], i).second) throw Error(ErrorCode::DuplicateSampleId, ids_[i]);
}

FeatureMatrix FeatureMatrix::empty(Eigen::Index dim) { return FeatureMatrix({}, RowMatrix(0, dim)); }

std::optional<std::size_t> FeatureMatrix::index_of(std::string_view sample_id) const {
  auto it = index_.find(std::string(sample_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  std::vector<std::string> ids;
  ids.reserve(indices.size());
  RowMatrix m(static_cast<Eigen::Index>(indices.size()), dim());
  for (std::size_t k = 0; k < indices.size(); ++k) {
    ids.push_back(ids_[indices[k]]);
    m.row(static_cast<Eigen::Index>(k)) = rows_.row(static_cast<Eigen::Index>(indices[k]));
  }
  return FeatureMatrix(std::move(ids), std::move(m));
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) throw Error(ErrorCode::Truncated, fmt::format("at byte {}", pos));
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

}  // namespace

std::string encode_features(const FeatureMatrix& matrix) {
  const auto n = matrix.size();
  const auto dim = matrix.dim();
  if (n > std::numeric_limits<std::uint32_t>::max() || dim > std::numeric_limits<std::uint32_t>::max())
    throw Error(ErrorCode::InvalidArgument, "matrix too large for FV01");
  std::string out;
  out.reserve(12 + n * (2 + 16 + static_cast<std::size_t>(dim) * 4));
  out.append("FV01", 4);
  put(out, static_cast<std::uint32_t>(n));
  put(out, static_cast<std::uint32_t>(dim));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = matrix.sample_ids()[i];
    if (id.size() > std::numeric_limits<std::uint16_t>::max())
      throw Error(ErrorCode::InvalidArgument, "sample id longer than 65535 bytes");
    put(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto v = static_cast<float>(matrix.rows()(static_cast<Eigen::Index>(i), j));
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "row '" + id + "' overflows f32");
      put(out, v);
    }
  }
  return out;
}

void write_features(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_features(matrix));
}

FeatureMatrix decode_features(std::string_view bytes) {
  if (bytes.size() < 4) throw Error(ErrorCode::Truncated, "missing magic");
  if (bytes.substr(0, 4) != "FV01") throw Error(ErrorCode::BadMagic, std::string(bytes.substr(0, 4)));
  std::size_t pos = 4;
  const auto n = take<std::uint32_t>(bytes, pos);
  const auto dim = take<std::uint32_t>(bytes, pos);
  // Each row needs at least 2 + 4*dim bytes; reject impossible counts before allocating.
  if ((bytes.size() - pos) / (2 + 4 * static_cast<std::uint64_t>(dim)) < n)
    throw Error(ErrorCode::Truncated, fmt::format("{} rows of dim {} do not fit in {} bytes", n, dim, bytes.size()));
  std::vector<std::string> ids;
  ids.reserve(n);
  RowMatrix rows(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = take<std::uint16_t>(bytes, pos);
    if (bytes.size() - pos < len) throw Error(ErrorCode::Truncated, fmt::format("id of row {}", i));
    ids.emplace_back(bytes.substr(pos, len));
    pos += len;
    for (std::uint32_t j = 0; j < dim; ++j) rows(i, j) = take<float>(bytes, pos);
  }
  if (pos != bytes.size()) throw Error(ErrorCode::Truncated, "trailing bytes after last row");
  return FeatureMatrix(std::move(ids), std::move(rows));
}

FeatureMatrix read_features(const std::filesystem::path& path) { return decode_features(io::read_file(path)); }

FeatureMatrix read_features_csv(const std::filesystem::path& path) {
  std::vector<csv::Row> rows;
  std::string err;
  if (!csv::parse(io::read_file(path), rows, err)) throw Error(ErrorCode::MalformedRow, err);
  if (rows.empty() || rows.front().fields.empty() || rows.front().fields[0] != "sample_id")
    throw Error(ErrorCode::MissingColumn, "sample_id");
  const auto dim = static_cast<Eigen::Index>(rows.front().fields.size() - 1);
  std::vector<std::string> ids;
  RowMatrix m(static_cast<Eigen::Index>(rows.size() - 1), dim);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    if (static_cast<Eigen::Index>(f.size()) != dim + 1)
      throw Error(ErrorCode::MalformedRow, fmt::format("line {}: expected {} values", rows[i].line, dim));
    ids.push_back(f[0]);
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto& s = f[static_cast<std::size_t>(j + 1)];
      double v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size())
        throw Error(ErrorCode::MalformedRow, fmt::format("line {}: bad number '{}'", rows[i].line, s));
      m(static_cast<Eigen::Index>(i - 1), j) = v;
    }
  }
  return FeatureMatrix(std::move(ids), std::move(m));
}

void write_features_csv(const FeatureMatrix& matrix, const std::filesystem::path& path) {
  std::string out = "sample_id";
  for (Eigen::Index j = 0; j < matrix.dim(); ++j) out += fmt::format(",v{}", j);
  out.push_back('\n');
  for (std::size_t i = 0; i < matrix.size(); ++i) {
    out += csv::escape(matrix.sample_ids()[i]);
    for (Eigen::Index j = 0; j < matrix.dim(); ++j)
      out += fmt::format(",{}", matrix.rows()(static_cast<Eigen::Index>(i), j));
    out.push_back('\n');
  }
  io::write_file_atomic(path, out);
}

std::vector<std::size_t> join_rows(const DatasetManifest& manifest, const FeatureMatrix& features) {
  std::vector<std::size_t> out;
  out.reserve(manifest.size());
  std::vector<std::string> orphans;
  for (const auto& r : manifest.records()) {
    auto idx = features.index_of(r.sample_id);
    if (idx) out.push_back(*idx);
    else orphans.push_back(r.sample_id);
  }
  if (!orphans.empty()) {
    std::string list;
    for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) list += (i ? ", " : "") + orphans[i];
    if (orphans.size() > 20) list += fmt::format(", ... ({} total)", orphans.size());
    throw Error(ErrorCode::JoinOrphans, list);
  }
  return out;
}

}  // namespace histofilter
