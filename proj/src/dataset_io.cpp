#include "shrinkcoup/dataset_io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

#include "shrinkcoup/errors.hpp"

namespace shrinkcoup {

namespace {

static_assert(std::endian::native == std::endian::little, "binary dataset I/O assumes a little-endian host");

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_real(const std::string& tok, std::size_t line_no) {
  std::size_t b = tok.find_first_not_of(" \t");
  std::size_t e = tok.find_last_not_of(" \t");
  if (b == std::string::npos) throw DataError("line " + std::to_string(line_no) + ": empty field");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data() + b, tok.data() + e + 1, v);
  if (ec != std::errc() || ptr != tok.data() + e + 1)
    throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + tok + "'");
  return v;
}

}  // namespace

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  const auto header = split_csv(line);
  if (header.size() < 2 || header[0] != "y") throw DataError(path + ": header must be y,x1,...,xp");
  const std::size_t p = header.size() - 1;

  std::vector<double> ys, xs;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != p + 1)
      throw DataError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                      " fields, expected " + std::to_string(p + 1));
    ys.push_back(parse_real(f[0], line_no));
    for (std::size_t j = 1; j <= p; ++j) xs.push_back(parse_real(f[j], line_no));
  }
  Dataset d;
  const auto n = static_cast<Eigen::Index>(ys.size());
  d.y = Eigen::Map<VectorXd>(ys.data(), n);
  d.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      xs.data(), n, static_cast<Eigen::Index>(p));
  d.validate();
  return d;
}

void write_dataset_csv(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "y";
  for (Eigen::Index j = 1; j <= d.p(); ++j) out << ",x" << j;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    out << d.y[i];
    for (Eigen::Index j = 0; j < d.p(); ++j) out << ',' << d.X(i, j);
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path);
}

Dataset read_dataset_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::uint64_t dims[2];
  if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw DataError(path + ": truncated header");
  const std::uint64_t n = dims[0], p = dims[1];
  if (n == 0 || p == 0 || n > (1ULL << 32) || p > (1ULL << 32)) throw DataError(path + ": implausible dimensions");
  Dataset d;
  d.y.resize(static_cast<Eigen::Index>(n));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(n, p);
  if (!in.read(reinterpret_cast<char*>(d.y.data()), static_cast<std::streamsize>(n * sizeof(double))) ||
      !in.read(reinterpret_cast<char*>(X.data()), static_cast<std::streamsize>(n * p * sizeof(double))))
    throw DataError(path + ": truncated payload");
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path + ": trailing bytes");
  d.X = X;
  d.validate();
  return d;
}

void write_dataset_binary(const Dataset& d, const std::string& path) {
  d.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  const std::uint64_t dims[2] = {static_cast<std::uint64_t>(d.n()), static_cast<std::uint64_t>(d.p())};
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X = d.X;
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  out.write(reinterpret_cast<const char*>(d.y.data()), static_cast<std::streamsize>(d.n() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(X.data()), static_cast<std::streamsize>(X.size() * sizeof(double)));
  if (!out) throw DataError("write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0) return read_dataset_binary(path);
  return read_dataset_csv(path);
}

}  // namespace shrinkcoup
