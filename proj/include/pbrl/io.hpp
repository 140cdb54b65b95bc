#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pbrl/types.hpp"

namespace pbrl::io {

/// Shortest decimal text that parses back to the identical double
/// (round-trippable; uses %.17g precision).
std::string format_double(double v);
double parse_double(const std::string& s);

/// Dense row-major tensor block: a "tensor NAME d0 d1 ..." line followed by
/// one whitespace-separated line of entries.
void write_tensor(std::ostream& out, const std::string& name,
                  const std::vector<int>& dims, const double* data);
void write_matrix(std::ostream& out, const std::string& name, const Mat& m);
void write_vector(std::ostream& out, const std::string& name, const Vec& v);

struct TensorBlock {
  std::string name;
  std::vector<int> dims;
  std::vector<double> data;
};

/// Reads the next tensor block; throws ValidationError on malformed input.
TensorBlock read_tensor(std::istream& in);
Mat read_matrix(std::istream& in, const std::string& expected_name, int rows, int cols);
Vec read_vector(std::istream& in, const std::string& expected_name, int size);

/// "key value" header line helpers.
void write_kv(std::ostream& out, const std::string& key, const std::string& value);
std::pair<std::string, std::string> read_kv(std::istream& in);
std::string expect_kv(std::istream& in, const std::string& key);

/// FNV-1a, used for config hashes.
uint64_t fnv1a(const std::string& s);

}  // namespace pbrl::io
