#pragma once

// Binary field snapshots.
//
// Layout (little-endian):
//   bytes  0..3   magic "KSF1"
//   bytes  4..7   u32 n
//   bytes  8..15  f64 box length L
//   bytes 16..23  f64 time
//   bytes 24..31  reserved, zero
//   then n*n f64 values, row-major (row = y index).

#include <filesystem>
#include <string>
#include <vector>

#include "ksl/field.hpp"

namespace ksl {

inline constexpr std::size_t kSnapshotHeaderBytes = 32;

struct Snapshot {
  Field field;
  double time = 0.0;
};

std::vector<unsigned char> encode_snapshot(const Field& f, double time);
Snapshot decode_snapshot(const std::vector<unsigned char>& bytes);

void write_snapshot(const std::filesystem::path& path, const Field& f, double time);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a file's contents.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace ksl
