#include "smf/apps/matrix_io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace smf::apps {

namespace {

static_assert(std::numeric_limits<double>::is_iec559, "binary64 doubles required");

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  is.read(reinterpret_cast<char*>(b.data()), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double x) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(x);
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(b.data(), 8);
}

double get_f64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  is.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

bool has_csv_extension(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".csv";
}

}  // namespace

void write_smf1(const std::filesystem::path& path, const Matrix& M) {
  if (M.rows() > std::numeric_limits<std::uint32_t>::max() ||
      M.cols() > std::numeric_limits<std::uint32_t>::max()) {
    throw std::invalid_argument("write_smf1: matrix too large");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  os.write("SMF1", 4);
  put_u32(os, static_cast<std::uint32_t>(M.rows()));
  put_u32(os, static_cast<std::uint32_t>(M.cols()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) put_f64(os, M(i, j));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Matrix read_smf1(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  char magic[4] = {};
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SMF1", 4) != 0) {
    throw std::runtime_error("not an SMF1 file: " + path.string());
  }
  const std::uint32_t rows = get_u32(is);
  const std::uint32_t cols = get_u32(is);
  if (!is) throw std::runtime_error("truncated SMF1 header: " + path.string());
  Matrix M(rows, cols);
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = get_f64(is);
  if (!is) throw std::runtime_error("truncated SMF1 data: " + path.string());
  return M;
}

void write_csv(const std::filesystem::path& path, const Matrix& M) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
  std::array<char, 64> buf{};
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j > 0) os.put(',');
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), M(i, j));
      if (ec != std::errc()) throw std::runtime_error("write_csv: formatting failed");
      os.write(buf.data(), end - buf.data());
    }
    os.put('\n');
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

Matrix read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      while (p < end && *p == ' ') ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        throw std::runtime_error("read_csv: bad number in " + path.string() + ": " + line);
      }
      row.push_back(v);
      p = next;
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      if (*p != ',') throw std::runtime_error("read_csv: expected ',' in " + path.string());
      ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::runtime_error("read_csv: ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  Matrix M(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows[0].size()));
  for (Index i = 0; i < M.rows(); ++i)
    for (Index j = 0; j < M.cols(); ++j) M(i, j) = rows[i][j];
  return M;
}

void write_matrix(const std::filesystem::path& path, const Matrix& M) {
  if (has_csv_extension(path)) {
    write_csv(path, M);
  } else {
    write_smf1(path, M);
  }
}

Matrix read_matrix(const std::filesystem::path& path) {
  return has_csv_extension(path) ? read_csv(path) : read_smf1(path);
}

}  // namespace smf::apps
