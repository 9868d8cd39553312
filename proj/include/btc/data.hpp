#pragma once

// Dataset ingestion: dense CSV datasets, band-sequential hyperspectral cubes,
// label maps, feature scaling and class-grouped dictionaries.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "btc/error.hpp"

namespace btc {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Single-channel image, rows = height, cols = width.
using Image = Eigen::MatrixXd;

enum class NormMode { L2Columns, RangeScaled };
enum class ScaleRange { ZeroOne, MinusOneOne };

inline std::string to_string(NormMode mode) {
  return mode == NormMode::L2Columns ? "l2" : "range";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::optional<long long> parse_int(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return cells;
}

inline std::ifstream open_input(const std::filesystem::path& path,
                                std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path,
                                 std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scaling

/// Per-feature affine map fitted on training samples and applied unchanged to
/// test samples. Test values outside the training range are not clamped.
struct ScalingParams {
  Vector min;
  Vector max;
  ScaleRange range = ScaleRange::ZeroOne;

  /// Fits on a samples-by-rows matrix.
  static ScalingParams fit(const Matrix& samples, ScaleRange range = ScaleRange::ZeroOne) {
    detail::require(samples.rows() > 0 && samples.cols() > 0, "cannot fit scaling on empty samples");
    return {samples.colwise().minCoeff().transpose(), samples.colwise().maxCoeff().transpose(), range};
  }

  Index feature_count() const { return min.size(); }

  double apply(Index feature, double value) const {
    const double span = max[feature] - min[feature];
    // constant features map to the lower end of the range
    const double unit = span > 0.0 ? (value - min[feature]) / span : value - min[feature];
    return range == ScaleRange::ZeroOne ? unit : 2.0 * unit - 1.0;
  }

  Vector apply(const Vector& sample) const {
    detail::require(sample.size() == feature_count(), "scaling: feature count mismatch");
    Vector out(sample.size());
    for (Index f = 0; f < sample.size(); ++f) out[f] = apply(f, sample[f]);
    return out;
  }

  /// Applies to every row of a samples-by-rows matrix.
  Matrix apply_rows(const Matrix& samples) const {
    detail::require(samples.cols() == feature_count(), "scaling: feature count mismatch");
    Matrix out(samples.rows(), samples.cols());
    for (Index r = 0; r < samples.rows(); ++r)
      for (Index f = 0; f < samples.cols(); ++f) out(r, f) = apply(f, samples(r, f));
    return out;
  }
};

// ---------------------------------------------------------------------------
// Dictionary

struct ClassRange {
  int class_id;  // dense id, 1..C
  Index start;
  Index count;
};

/// Class partition of N dictionary columns. Classes are dense ids 1..C
/// ordered by ascending original label; columns of a class are contiguous.
struct ClassLayout {
  std::vector<ClassRange> ranges;
  std::vector<int> original_labels;  // original_labels[id - 1]
  std::vector<Index> source_indices;  // column -> input sample index
  std::vector<int> column_class;      // column -> dense id

  Index size() const { return static_cast<Index>(column_class.size()); }
  int class_count() const { return static_cast<int>(ranges.size()); }

  /// Dense id for an original label, or 0 when the label is unknown.
  int encode(int original) const {
    const auto it = std::lower_bound(original_labels.begin(), original_labels.end(), original);
    if (it == original_labels.end() || *it != original) return 0;
    return static_cast<int>(it - original_labels.begin()) + 1;
  }

  int decode(int class_id) const { return original_labels.at(static_cast<std::size_t>(class_id - 1)); }

  /// Stable grouping of samples by ascending label.
  static ClassLayout group(std::span<const int> labels) {
    ClassLayout layout;
    const auto n = static_cast<Index>(labels.size());
    layout.source_indices.resize(labels.size());
    for (Index i = 0; i < n; ++i) layout.source_indices[static_cast<std::size_t>(i)] = i;
    std::stable_sort(layout.source_indices.begin(), layout.source_indices.end(),
                     [&](Index a, Index b) { return labels[static_cast<std::size_t>(a)] < labels[static_cast<std::size_t>(b)]; });
    layout.column_class.resize(labels.size());
    for (Index col = 0; col < n; ++col) {
      const int label = labels[static_cast<std::size_t>(layout.source_indices[static_cast<std::size_t>(col)])];
      if (layout.original_labels.empty() || layout.original_labels.back() != label) {
        layout.original_labels.push_back(label);
        layout.ranges.push_back({static_cast<int>(layout.original_labels.size()), col, 0});
      }
      ++layout.ranges.back().count;
      layout.column_class[static_cast<std::size_t>(col)] = layout.ranges.back().class_id;
    }
    return layout;
  }
};

/// Column matrix of labeled training samples (B features x N samples) with
/// contiguous class partitions.
class Dictionary {
 public:
  /// Builds from a samples-by-rows matrix. L2Columns divides every column by
  /// its Euclidean norm; RangeScaled fits per-feature min/max on the samples.
  static Dictionary build(const Matrix& samples, std::span<const int> labels, NormMode mode,
                          ScaleRange range = ScaleRange::ZeroOne) {
    detail::require(samples.rows() == static_cast<Index>(labels.size()),
                    "build_dictionary: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(samples.rows()) + " samples");
    for (std::size_t i = 0; i < labels.size(); ++i)
      detail::require(labels[i] >= 1, "build_dictionary: label " + std::to_string(labels[i]) +
                                          " at sample " + std::to_string(i) + " is not a class (must be >= 1)");
    ClassLayout layout = ClassLayout::group(labels);
    Matrix columns(samples.cols(), samples.rows());
    for (Index col = 0; col < layout.size(); ++col)
      columns.col(col) = samples.row(layout.source_indices[static_cast<std::size_t>(col)]).transpose();
    std::optional<ScalingParams> scaling;
    if (mode == NormMode::RangeScaled) {
      scaling = ScalingParams::fit(samples, range);
      for (Index col = 0; col < columns.cols(); ++col) columns.col(col) = scaling->apply(Vector(columns.col(col)));
    }
    return Dictionary(std::move(layout), std::move(columns), mode, std::move(scaling));
  }

  /// Wraps already grouped columns sharing `layout` (e.g. projected copies of
  /// another dictionary). L2Columns normalizes them.
  static Dictionary from_grouped(ClassLayout layout, Matrix columns, NormMode mode,
                                 std::optional<ScalingParams> scaling = std::nullopt) {
    return Dictionary(std::move(layout), std::move(columns), mode, std::move(scaling));
  }

  const Matrix& columns() const { return columns_; }
  auto column(Index i) const { return columns_.col(i); }
  Index feature_count() const { return columns_.rows(); }
  Index sample_count() const { return columns_.cols(); }
  int class_count() const { return layout_.class_count(); }
  const std::vector<ClassRange>& classes() const { return layout_.ranges; }
  const ClassRange& class_range(int class_id) const { return layout_.ranges.at(static_cast<std::size_t>(class_id - 1)); }
  int class_of(Index column) const { return layout_.column_class[static_cast<std::size_t>(column)]; }
  const ClassLayout& layout() const { return layout_; }
  NormMode norm_mode() const { return mode_; }
  const std::optional<ScalingParams>& scaling() const { return scaling_; }

  /// Maps a raw test sample into the dictionary's feature space. L2Columns
  /// leaves it unchanged (classifiers normalize test vectors themselves).
  Vector prepare(const Vector& raw) const {
    detail::require(raw.size() == feature_count(), "sample has " + std::to_string(raw.size()) +
                                                       " features, dictionary has " +
                                                       std::to_string(feature_count()));
    return scaling_ ? scaling_->apply(raw) : raw;
  }

 private:
  Dictionary(ClassLayout layout, Matrix columns, NormMode mode, std::optional<ScalingParams> scaling)
      : layout_(std::move(layout)), columns_(std::move(columns)), mode_(mode), scaling_(std::move(scaling)) {
    detail::require(columns_.cols() == layout_.size(), "dictionary: layout/column count mismatch");
    detail::require(columns_.rows() >= 2, "dictionary needs at least 2 features, got " + std::to_string(columns_.rows()));
    detail::require(columns_.cols() >= 2, "dictionary needs at least 2 samples, got " + std::to_string(columns_.cols()));
    detail::require(layout_.class_count() >= 2,
                    "dictionary needs at least 2 classes, got " + std::to_string(layout_.class_count()));
    for (const auto& r : layout_.ranges)
      detail::require(r.count > 0, "class " + std::to_string(r.class_id) + " has no samples");
    if (!columns_.allFinite()) throw InvalidArgument("dictionary contains non-finite values");
    if (mode_ == NormMode::L2Columns) {
      for (Index col = 0; col < columns_.cols(); ++col) {
        const double norm = columns_.col(col).norm();
        if (!(norm > 0.0))
          throw InvalidArgument("zero-norm column " + std::to_string(col) + " (sample " +
                                std::to_string(layout_.source_indices[static_cast<std::size_t>(col)]) +
                                ") cannot be L2-normalized");
        columns_.col(col) /= norm;
      }
    }
  }

  ClassLayout layout_;
  Matrix columns_;
  NormMode mode_;
  std::optional<ScalingParams> scaling_;
};

inline Dictionary build_dictionary(const Matrix& samples, std::span<const int> labels, NormMode mode,
                                   ScaleRange range = ScaleRange::ZeroOne) {
  return Dictionary::build(samples, labels, mode, range);
}

// ---------------------------------------------------------------------------
// Dense CSV datasets

struct DenseDataset {
  Matrix samples;  // one sample per row
  std::vector<int> labels;
};

/// Parses a comma-separated numeric matrix. A first row whose first cell is
/// not numeric is treated as a header and skipped.
inline Matrix parse_csv_matrix(std::istream& in, const std::string& name = "csv") {
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (first_content) {
      first_content = false;
      if (!detail::parse_double(cells.front())) continue;  // header row
    }
    if (cols < 0) cols = static_cast<Index>(cells.size());
    if (static_cast<Index>(cells.size()) != cols)
      throw IoError(name + ": ragged row at line " + std::to_string(line_no) + " (" +
                    std::to_string(cells.size()) + " cells, expected " + std::to_string(cols) + ")");
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = detail::parse_double(cells[c]);
      if (!v)
        throw IoError(name + ": non-numeric cell '" + std::string(detail::trim(cells[c])) + "' at line " +
                      std::to_string(line_no) + ", column " + std::to_string(c + 1));
      values.push_back(*v);
    }
    ++rows;
  }
  if (rows == 0) return Matrix(0, 0);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = values[static_cast<std::size_t>(r * cols + c)];
  return m;
}

inline Matrix load_csv_matrix(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_csv_matrix(in, path.string());
}

/// One integer per line; blank lines are skipped.
inline std::vector<int> parse_labels(std::istream& in, const std::string& name = "labels") {
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto v = detail::parse_int(line);
    if (!v) throw IoError(name + ": non-integer label '" + std::string(detail::trim(line)) + "' at line " +
                          std::to_string(line_no));
    labels.push_back(static_cast<int>(*v));
  }
  return labels;
}

inline std::vector<int> load_labels(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return parse_labels(in, path.string());
}

inline DenseDataset parse_dense_dataset(std::istream& features, std::istream& labels) {
  DenseDataset ds{parse_csv_matrix(features, "features"), parse_labels(labels, "labels")};
  if (static_cast<Index>(ds.labels.size()) != ds.samples.rows())
    throw IoError("label count " + std::to_string(ds.labels.size()) + " ≠ sample count " +
                  std::to_string(ds.samples.rows()));
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i] < 1)
      throw IoError("label " + std::to_string(ds.labels[i]) + " outside 1..C at sample " + std::to_string(i + 1));
  return ds;
}

inline DenseDataset load_dense_dataset(const std::filesystem::path& features_path,
                                       const std::filesystem::path& labels_path) {
  auto f = detail::open_input(features_path);
  auto l = detail::open_input(labels_path);
  return parse_dense_dataset(f, l);
}

inline void write_csv_matrix(const std::filesystem::path& path, const Matrix& m) {
  auto out = detail::open_output(path);
  out.precision(17);
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
    out << '\n';
  }
}

inline void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
  auto out = detail::open_output(path);
  for (int l : labels) out << l << '\n';
}

// ---------------------------------------------------------------------------
// Hyperspectral cubes and label maps

enum class CubeScale { None, RangeScaled };

/// height x width x bands cube stored band-sequentially:
/// values[b * height * width + r * width + c].
struct HsiCube {
  Index height = 0;
  Index width = 0;
  Index bands = 0;
  std::vector<double> values;
  CubeScale scale_mode = CubeScale::None;

  HsiCube() = default;
  HsiCube(Index h, Index w, Index b) : height(h), width(w), bands(b), values(static_cast<std::size_t>(h * w * b), 0.0) {}

  Index pixel_count() const { return height * width; }
  double& at(Index band, Index r, Index c) { return values[static_cast<std::size_t>(band * height * width + r * width + c)]; }
  double at(Index band, Index r, Index c) const {
    return values[static_cast<std::size_t>(band * height * width + r * width + c)];
  }

  Vector pixel(Index r, Index c) const {
    Vector v(bands);
    for (Index b = 0; b < bands; ++b) v[b] = at(b, r, c);
    return v;
  }

  void set_pixel(Index r, Index c, const Vector& spectrum) {
    for (Index b = 0; b < bands; ++b) at(b, r, c) = spectrum[b];
  }

  Image band(Index b) const {
    Image img(height, width);
    for (Index r = 0; r < height; ++r)
      for (Index c = 0; c < width; ++c) img(r, c) = at(b, r, c);
    return img;
  }

  void validate() const {
    detail::require(height > 0 && width > 0 && bands > 0, "cube dimensions must be positive");
    detail::require(values.size() == static_cast<std::size_t>(height * width * bands), "cube value count mismatch");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) throw IoError("non-finite cube value at flat index " + std::to_string(i));
  }
};

struct CubeHeader {
  Index height = 0;
  Index width = 0;
  Index bands = 0;
  std::string dtype = "f64";  // f32 | f64
  std::string order = "bsq";
  std::string byte_order = "little";

  std::size_t dtype_size() const { return dtype == "f32" ? 4 : 8; }
};

inline CubeHeader parse_cube_header(std::istream& in, const std::string& name = "header") {
  CubeHeader h;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw IoError(name + ": expected key=value at line " + std::to_string(line_no));
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    auto as_dim = [&](Index& slot) {
      const auto v = detail::parse_int(value);
      if (!v || *v <= 0) throw IoError(name + ": invalid " + key + " '" + value + "'");
      slot = static_cast<Index>(*v);
    };
    if (key == "height") as_dim(h.height);
    else if (key == "width") as_dim(h.width);
    else if (key == "bands") as_dim(h.bands);
    else if (key == "dtype") h.dtype = value;
    else if (key == "order") h.order = value;
    else if (key == "byte_order") h.byte_order = value;
    else throw IoError(name + ": unknown key '" + key + "'");
  }
  if (h.height == 0 || h.width == 0 || h.bands == 0)
    throw IoError(name + ": height, width and bands are required");
  if (h.dtype != "f32" && h.dtype != "f64") throw IoError(name + ": unknown dtype '" + h.dtype + "'");
  if (h.order != "bsq") throw IoError(name + ": unsupported order '" + h.order + "' (only bsq)");
  if (h.byte_order != "little") throw IoError(name + ": unsupported byte_order '" + h.byte_order + "'");
  return h;
}

namespace detail {

template <typename T>
T from_little_endian(const unsigned char* bytes) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(bytes[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

template <typename T>
void to_little_endian(T value, unsigned char* bytes) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
}

}  // namespace detail

inline HsiCube decode_cube(const CubeHeader& h, std::span<const unsigned char> raw) {
  const std::size_t count = static_cast<std::size_t>(h.height * h.width * h.bands);
  const std::size_t expected = count * h.dtype_size();
  if (raw.size() != expected)
    throw IoError("raw payload length mismatch: got " + std::to_string(raw.size()) + " bytes, needs " +
                  std::to_string(expected));
  HsiCube cube(h.height, h.width, h.bands);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* p = raw.data() + i * h.dtype_size();
    const double v = h.dtype == "f32" ? static_cast<double>(detail::from_little_endian<float>(p))
                                      : detail::from_little_endian<double>(p);
    if (!std::isfinite(v)) throw IoError("non-finite value in cube payload at flat index " + std::to_string(i));
    cube.values[i] = v;
  }
  return cube;
}

inline HsiCube load_hsi_cube(const std::filesystem::path& header_path, const std::filesystem::path& raw_path) {
  auto hin = detail::open_input(header_path);
  const CubeHeader h = parse_cube_header(hin, header_path.string());
  auto rin = detail::open_input(raw_path, std::ios::binary);
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(rin)), std::istreambuf_iterator<char>());
  return decode_cube(h, raw);
}

inline void write_hsi_cube(const HsiCube& cube, const std::filesystem::path& header_path,
                           const std::filesystem::path& raw_path, const std::string& dtype = "f64") {
  detail::require(dtype == "f32" || dtype == "f64", "unknown dtype '" + dtype + "'");
  cube.validate();
  {
    auto out = detail::open_output(header_path);
    out << "height=" << cube.height << "\nwidth=" << cube.width << "\nbands=" << cube.bands << "\ndtype=" << dtype
        << "\norder=bsq\nbyte_order=little\n";
  }
  const std::size_t size = dtype == "f32" ? 4 : 8;
  std::vector<unsigned char> raw(cube.values.size() * size);
  for (std::size_t i = 0; i < cube.values.size(); ++i) {
    if (dtype == "f32") detail::to_little_endian(static_cast<float>(cube.values[i]), raw.data() + i * size);
    else detail::to_little_endian(cube.values[i], raw.data() + i * size);
  }
  auto out = detail::open_output(raw_path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

/// Per-band min/max scaling of a cube into [0,1]; returns the fitted params.
inline ScalingParams range_scale_cube(HsiCube& cube) {
  ScalingParams p{Vector(cube.bands), Vector(cube.bands), ScaleRange::ZeroOne};
  const Index px = cube.pixel_count();
  for (Index b = 0; b < cube.bands; ++b) {
    const auto first = cube.values.begin() + b * px;
    const auto [lo, hi] = std::minmax_element(first, first + px);
    p.min[b] = *lo;
    p.max[b] = *hi;
    for (Index i = 0; i < px; ++i) {
      double& v = cube.values[static_cast<std::size_t>(b * px + i)];
      v = p.apply(b, v);
    }
  }
  cube.scale_mode = CubeScale::RangeScaled;
  return p;
}

/// 0 = unlabeled, 1..C = class. Row-major.
struct LabelMap {
  Index height = 0;
  Index width = 0;
  std::vector<int> labels;

  LabelMap() = default;
  LabelMap(Index h, Index w, int fill = 0) : height(h), width(w), labels(static_cast<std::size_t>(h * w), fill) {}

  int& at(Index r, Index c) { return labels[static_cast<std::size_t>(r * width + c)]; }
  int at(Index r, Index c) const { return labels[static_cast<std::size_t>(r * width + c)]; }
  int max_label() const { return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()); }
  bool operator==(const LabelMap&) const = default;
};

inline LabelMap load_label_map(const std::filesystem::path& path) {
  const Matrix grid = load_csv_matrix(path);
  LabelMap map(grid.rows(), grid.cols());
  for (Index r = 0; r < grid.rows(); ++r)
    for (Index c = 0; c < grid.cols(); ++c) {
      const double v = grid(r, c);
      if (v != std::floor(v) || v < 0)
        throw IoError(path.string() + ": invalid label " + std::to_string(v) + " at (" + std::to_string(r) + "," +
                      std::to_string(c) + ")");
      map.at(r, c) = static_cast<int>(v);
    }
  return map;
}

inline void write_label_map(const std::filesystem::path& path, const LabelMap& map) {
  auto out = detail::open_output(path);
  for (Index r = 0; r < map.height; ++r) {
    for (Index c = 0; c < map.width; ++c) out << (c ? "," : "") << map.at(r, c);
    out << '\n';
  }
}

struct PixelCoord {
  Index row;
  Index col;
  bool operator==(const PixelCoord&) const = default;
};

struct MaskSplit {
  Matrix train_samples;  // rows = spectra
  std::vector<int> train_labels;
  Matrix test_samples;
  std::vector<int> test_labels;
  std::vector<PixelCoord> test_pixels;
};

/// Training samples are spectra at train_mask > 0; test samples are spectra
/// at gt > 0 and train_mask == 0.
inline MaskSplit split_by_mask(const HsiCube& cube, const LabelMap& gt, const LabelMap& train_mask) {
  detail::require(gt.height == cube.height && gt.width == cube.width, "ground truth dims differ from cube");
  detail::require(train_mask.height == cube.height && train_mask.width == cube.width, "train mask dims differ from cube");
  std::vector<PixelCoord> train_px, test_px;
  std::vector<int> train_labels, test_labels;
  bool any_labeled = false;
  for (Index r = 0; r < cube.height; ++r)
    for (Index c = 0; c < cube.width; ++c) {
      const int g = gt.at(r, c);
      const int t = train_mask.at(r, c);
      any_labeled = any_labeled || g > 0 || t > 0;
      if (t > 0) {
        if (t != g)
          throw InvalidArgument("train mask label " + std::to_string(t) + " disagrees with ground truth " +
                                std::to_string(g) + " at (" + std::to_string(r) + "," + std::to_string(c) + ")");
        train_px.push_back({r, c});
        train_labels.push_back(t);
      } else if (g > 0) {
        test_px.push_back({r, c});
        test_labels.push_back(g);
      }
    }
  if (!any_labeled) throw InvalidArgument("no labeled pixels");
  for (int label : test_labels)
    if (std::find(train_labels.begin(), train_labels.end(), label) == train_labels.end())
      throw InvalidArgument("class " + std::to_string(label) + " has zero training pixels");
  MaskSplit out;
  out.train_samples.resize(static_cast<Index>(train_px.size()), cube.bands);
  for (std::size_t i = 0; i < train_px.size(); ++i)
    out.train_samples.row(static_cast<Index>(i)) = cube.pixel(train_px[i].row, train_px[i].col).transpose();
  out.test_samples.resize(static_cast<Index>(test_px.size()), cube.bands);
  for (std::size_t i = 0; i < test_px.size(); ++i)
    out.test_samples.row(static_cast<Index>(i)) = cube.pixel(test_px[i].row, test_px[i].col).transpose();
  out.train_labels = std::move(train_labels);
  out.test_labels = std::move(test_labels);
  out.test_pixels = std::move(test_px);
  return out;
}

}  // namespace btc
