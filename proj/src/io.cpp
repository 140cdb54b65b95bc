#include "pbrl/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace pbrl::io {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw ValidationError("not a number: '" + s + "'");
  return v;
}

void write_tensor(std::ostream& out, const std::string& name,
                  const std::vector<int>& dims, const double* data) {
  out << "tensor " << name;
  long total = 1;
  for (int d : dims) {
    out << ' ' << d;
    total *= d;
  }
  out << '\n';
  for (long i = 0; i < total; ++i) {
    if (i) out << ' ';
    out << format_double(data[i]);
  }
  out << '\n';
}

void write_matrix(std::ostream& out, const std::string& name, const Mat& m) {
  // Stored row-major regardless of Eigen's internal layout.
  std::vector<double> buf(size_t(m.rows()) * size_t(m.cols()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) buf[size_t(i) * m.cols() + j] = m(i, j);
  write_tensor(out, name, {int(m.rows()), int(m.cols())}, buf.data());
}

void write_vector(std::ostream& out, const std::string& name, const Vec& v) {
  write_tensor(out, name, {int(v.size())}, v.data());
}

TensorBlock read_tensor(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw ValidationError("expected tensor block, got EOF");
  } while (line.empty());
  std::istringstream hdr(line);
  std::string tag;
  hdr >> tag;
  if (tag != "tensor") throw ValidationError("expected 'tensor', got '" + tag + "'");
  TensorBlock t;
  hdr >> t.name;
  long total = 1;
  int d;
  while (hdr >> d) {
    t.dims.push_back(d);
    total *= d;
  }
  if (t.dims.empty()) throw ValidationError("tensor '" + t.name + "' has no dims");
  t.data.resize(size_t(total));
  for (long i = 0; i < total; ++i) {
    std::string tok;
    if (!(in >> tok)) throw ValidationError("tensor '" + t.name + "' truncated");
    t.data[size_t(i)] = parse_double(tok);
  }
  in.ignore(1, '\n');
  return t;
}

Mat read_matrix(std::istream& in, const std::string& expected_name, int rows, int cols) {
  TensorBlock t = read_tensor(in);
  require(t.name == expected_name, "expected tensor '" + expected_name + "', got '" + t.name + "'");
  require(t.dims.size() == 2 && t.dims[0] == rows && t.dims[1] == cols,
          "tensor '" + t.name + "' has wrong shape");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = t.data[size_t(i) * cols + j];
  return m;
}

Vec read_vector(std::istream& in, const std::string& expected_name, int size) {
  TensorBlock t = read_tensor(in);
  require(t.name == expected_name, "expected tensor '" + expected_name + "', got '" + t.name + "'");
  require(t.dims.size() == 1 && t.dims[0] == size, "tensor '" + t.name + "' has wrong shape");
  Vec v(size);
  for (int i = 0; i < size; ++i) v[i] = t.data[size_t(i)];
  return v;
}

void write_kv(std::ostream& out, const std::string& key, const std::string& value) {
  out << key << ' ' << value << '\n';
}

std::pair<std::string, std::string> read_kv(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw ValidationError("expected header line, got EOF");
  } while (line.empty());
  auto sp = line.find(' ');
  if (sp == std::string::npos) return {line, ""};
  return {line.substr(0, sp), line.substr(sp + 1)};
}

std::string expect_kv(std::istream& in, const std::string& key) {
  auto [k, v] = read_kv(in);
  require(k == key, "expected header key '" + key + "', got '" + k + "'");
  return v;
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pbrl::io
