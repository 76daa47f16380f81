#include "ksl/snapshot.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ksl/errors.hpp"

namespace ksl {

namespace {

void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | p[b];
  return v;
}

}  // namespace

std::vector<unsigned char> encode_snapshot(const Field& f, double time) {
  const GridSpec& g = f.grid();
  std::vector<unsigned char> out;
  out.reserve(kSnapshotHeaderBytes + 8 * g.size());
  for (char c : {'K', 'S', 'F', '1'}) out.push_back(static_cast<unsigned char>(c));
  const auto n = static_cast<std::uint32_t>(g.n());
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(n >> (8 * b)));
  put_u64(out, std::bit_cast<std::uint64_t>(g.box_length()));
  put_u64(out, std::bit_cast<std::uint64_t>(time));
  put_u64(out, 0);
  for (double v : f.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Snapshot decode_snapshot(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < kSnapshotHeaderBytes || std::memcmp(bytes.data(), "KSF1", 4) != 0)
    throw ConfigError("not a KSF1 snapshot");
  std::uint32_t n = 0;
  for (int b = 3; b >= 0; --b) n = (n << 8) | bytes[4 + b];
  const double L = std::bit_cast<double>(get_u64(bytes.data() + 8));
  const double t = std::bit_cast<double>(get_u64(bytes.data() + 16));
  const GridSpec g = make_grid(L, static_cast<int>(n));
  if (bytes.size() != kSnapshotHeaderBytes + 8 * g.size()) throw ConfigError("snapshot payload size mismatch");
  std::vector<double> values(g.size());
  for (std::size_t k = 0; k < values.size(); ++k)
    values[k] = std::bit_cast<double>(get_u64(bytes.data() + kSnapshotHeaderBytes + 8 * k));
  return {Field(g, std::move(values)), t};
}

void write_snapshot(const std::filesystem::path& path, const Field& f, double time) {
  const auto bytes = encode_snapshot(f, time);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Snapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned int k = 0; k < len; ++k) {
    s.push_back(hex[md[k] >> 4]);
    s.push_back(hex[md[k] & 15]);
  }
  return s;
}

}  // namespace ksl
