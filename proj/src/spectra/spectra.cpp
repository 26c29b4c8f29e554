#include "specsize/spectra.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace specsize {

WavenumberGrid::WavenumberGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw DataError("wavenumber grid is empty");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) throw DataError("wavenumber grid has non-finite value");
    if (i > 0 && !(values_[i] > values_[i - 1])) throw DataError("grid not increasing");
  }
}

SpectraSet::SpectraSet(WavenumberGrid grid, Matrix intensities,
                       std::vector<std::string> sample_ids, std::optional<Vector> sizes)
    : grid_(std::move(grid)),
      intensities_(std::move(intensities)),
      sample_ids_(std::move(sample_ids)),
      sizes_(std::move(sizes)) {
  if (intensities_.rows() != static_cast<Index>(sample_ids_.size()))
    throw DataError("intensity rows do not match sample id count");
  if (intensities_.cols() != static_cast<Index>(grid_.size()))
    throw DataError("intensity columns do not match grid length");
  std::unordered_set<std::string> seen;
  for (const auto& id : sample_ids_) {
    if (!seen.insert(id).second) throw DataError("duplicate sample id: " + id);
  }
  if (sizes_) {
    if (sizes_->size() != intensities_.rows())
      throw DataError("sizes length does not match sample count");
    for (Index i = 0; i < sizes_->size(); ++i) {
      if (!((*sizes_)(i) > 0.0) || !std::isfinite((*sizes_)(i)))
        throw DataError("sizes must be positive and finite");
    }
  }
}

const Vector& SpectraSet::require_sizes() const {
  if (!sizes_) throw DataError("spectra set has no target sizes");
  return *sizes_;
}

SpectraSet SpectraSet::with_intensities(WavenumberGrid grid, Matrix intensities) const {
  return {std::move(grid), std::move(intensities), sample_ids_, sizes_};
}

SpectraSet SpectraSet::with_sizes(std::optional<Vector> sizes) const {
  return {grid_, intensities_, sample_ids_, std::move(sizes)};
}

SpectraSet SpectraSet::subset(const IndexList& rows) const {
  std::vector<std::string> ids;
  ids.reserve(rows.size());
  for (Index r : rows) {
    if (r < 0 || r >= n_samples()) throw DataError("subset row out of range");
    ids.push_back(sample_ids_[static_cast<std::size_t>(r)]);
  }
  std::optional<Vector> sizes;
  if (sizes_) sizes = take(*sizes_, rows);
  return {grid_, take_rows(intensities_, rows), std::move(ids), std::move(sizes)};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    auto line = trim(text.substr(start, pos - start));
    if (!line.empty()) lines.push_back(line);
    start = pos + 1;
  }
  return lines;
}

}  // namespace

double parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw DataError("malformed number: '" + std::string(text) + "'");
  return v;
}

SpectraSet parse_spectra_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.size() < 2) throw DataError("malformed CSV: need a header and at least one row");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || header[0] != "wavenumber")
    throw DataError("malformed CSV: header must start with 'wavenumber'");
  std::vector<std::string> ids(header.begin() + 1, header.end());
  for (const auto& id : ids) {
    if (id.empty()) throw DataError("malformed CSV: empty sample id");
  }
  const Index n_samples = static_cast<Index>(ids.size());
  const Index n_w = static_cast<Index>(lines.size() - 1);
  std::vector<double> grid(static_cast<std::size_t>(n_w));
  Matrix m(n_samples, n_w);
  for (Index r = 0; r < n_w; ++r) {
    const auto fields = split_fields(lines[static_cast<std::size_t>(r + 1)]);
    if (static_cast<Index>(fields.size()) != n_samples + 1)
      throw DataError("malformed CSV: row " + std::to_string(r + 2) + " has wrong field count");
    grid[static_cast<std::size_t>(r)] = parse_double(fields[0]);
    for (Index s = 0; s < n_samples; ++s) {
      m(s, r) = parse_double(fields[static_cast<std::size_t>(s + 1)]);
    }
  }
  if (!m.allFinite()) throw DataError("malformed CSV: non-finite intensity");
  return {WavenumberGrid(std::move(grid)), std::move(m), std::move(ids)};
}

std::vector<std::pair<std::string, double>> parse_sizes_csv(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError("malformed sizes CSV: empty");
  const auto header = split_fields(lines[0]);
  if (header.size() != 2 || header[0] != "sample_id" || header[1] != "diameter_nm")
    throw DataError("malformed sizes CSV: header must be 'sample_id,diameter_nm'");
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (f.size() != 2) throw DataError("malformed sizes CSV row " + std::to_string(i + 1));
    out.emplace_back(std::string(f[0]), parse_double(f[1]));
  }
  return out;
}

SpectraSet attach_sizes(const SpectraSet& set,
                        const std::vector<std::pair<std::string, double>>& sizes) {
  std::unordered_map<std::string, Index> index;
  for (std::size_t i = 0; i < set.sample_ids().size(); ++i)
    index.emplace(set.sample_ids()[i], static_cast<Index>(i));
  Vector v = Vector::Constant(set.n_samples(), std::nan(""));
  for (const auto& [id, d] : sizes) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("size row with unknown sample id: " + id);
    if (!std::isnan(v(it->second))) throw DataError("duplicate size row for sample id: " + id);
    v(it->second) = d;
  }
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isnan(v(i)))
      throw DataError("no size given for sample id: " + set.sample_ids()[static_cast<std::size_t>(i)]);
  }
  return set.with_sizes(std::move(v));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write file: " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

SpectraSet load_spectra(const std::filesystem::path& path,
                        const std::optional<std::filesystem::path>& sizes_path) {
  auto set = parse_spectra_csv(read_text_file(path));
  if (sizes_path) set = attach_sizes(set, parse_sizes_csv(read_text_file(*sizes_path)));
  return set;
}

std::string format_spectra_csv(const SpectraSet& set) {
  std::string out = "wavenumber";
  for (const auto& id : set.sample_ids()) {
    out += ',';
    out += id;
  }
  out += '\n';
  const auto& m = set.intensities();
  for (Index c = 0; c < m.cols(); ++c) {
    out += format_double(set.grid()[static_cast<std::size_t>(c)]);
    for (Index r = 0; r < m.rows(); ++r) {
      out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::string format_sizes_csv(const SpectraSet& set) {
  const auto& sizes = set.require_sizes();
  std::string out = "sample_id,diameter_nm\n";
  for (Index i = 0; i < sizes.size(); ++i) {
    out += set.sample_ids()[static_cast<std::size_t>(i)];
    out += ',';
    out += format_double(sizes(i));
    out += '\n';
  }
  return out;
}

void save_spectra(const SpectraSet& set, const std::filesystem::path& path) {
  write_text_file(path, format_spectra_csv(set));
}

void save_sizes(const SpectraSet& set, const std::filesystem::path& path) {
  write_text_file(path, format_sizes_csv(set));
}

void save_matrix_csv(const Matrix& m, const std::vector<std::string>& header,
                     const std::filesystem::path& path) {
  if (static_cast<Index>(header.size()) != m.cols())
    throw Error("matrix CSV header does not match column count");
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out += ',';
    out += header[j];
  }
  out += '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  write_text_file(path, out);
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) throw DataError("empty matrix CSV: " + path.string());
  const auto cols = static_cast<Index>(split_fields(lines[0]).size());
  Matrix m(static_cast<Index>(lines.size() - 1), cols);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split_fields(lines[i]);
    if (static_cast<Index>(f.size()) != cols)
      throw DataError("malformed matrix CSV row " + std::to_string(i + 1) + " in " + path.string());
    for (Index c = 0; c < cols; ++c) m(static_cast<Index>(i - 1), c) = parse_double(f[static_cast<std::size_t>(c)]);
  }
  return m;
}

}  // namespace specsize
