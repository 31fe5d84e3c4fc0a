#include "ctdg/diff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "ctdg/error.hpp"

namespace ctdg::diff {

namespace {

constexpr char kMagic[8] = {'C', 'T', 'D', 'G', 'C', 'K', 'P', 'T'};

template <typename T>
T to_little(T x) {
  if constexpr (std::endian::native == std::endian::little) {
    return x;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &x, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&x, bytes, sizeof(T));
    return x;
  }
}

template <typename T>
void put(std::ostream& out, T x) {
  x = to_little(x);
  out.write(reinterpret_cast<const char*>(&x), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T x{};
  in.read(reinterpret_cast<char*>(&x), sizeof(T));
  require(static_cast<bool>(in), ErrorCategory::kParse, "truncated checkpoint");
  return to_little(x);
}

std::string get_bytes(std::istream& in, std::uint64_t n) {
  require(n < (1ull << 32), ErrorCategory::kParse, "implausible length in checkpoint");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  require(static_cast<bool>(in), ErrorCategory::kParse, "truncated checkpoint");
  return s;
}

}  // namespace

const Matrix* TensorContainer::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

void write_container(const TensorContainer& c, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, TensorContainer::kVersion);
  std::ostringstream manifest;
  for (const auto& [k, v] : c.manifest) {
    require(k.find_first_of("=\n") == std::string::npos && v.find('\n') == std::string::npos,
            ErrorCategory::kInvalidArgument, "manifest entries must be single-line key=value");
    manifest << k << '=' << v << '\n';
  }
  const std::string text = manifest.str();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, c.tensors.size());
  for (const auto& [name, m] : c.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) put<double>(out, m.data()[i]);
  }
  require(static_cast<bool>(out), ErrorCategory::kIo, "failed writing checkpoint");
}

TensorContainer read_container(std::istream& in) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  require(static_cast<bool>(in) && std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorCategory::kParse,
          "not a checkpoint file");
  const auto version = get<std::uint32_t>(in);
  require(version == TensorContainer::kVersion, ErrorCategory::kParse,
          "unsupported checkpoint version " + std::to_string(version));
  TensorContainer c;
  std::istringstream manifest(get_bytes(in, get<std::uint64_t>(in)));
  std::string line;
  while (std::getline(manifest, line)) {
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorCategory::kParse, "malformed manifest line");
    c.manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_bytes(in, get<std::uint32_t>(in));
    const auto ndim = get<std::uint32_t>(in);
    require(ndim >= 1 && ndim <= 2, ErrorCategory::kParse, "unsupported tensor rank in checkpoint");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = ndim == 2 ? get<std::uint64_t>(in) : std::uint64_t{1};
    require(rows * cols < (1ull << 34), ErrorCategory::kParse, "implausible tensor size in checkpoint");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = get<double>(in);
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  return c;
}

void save_container(const TensorContainer& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCategory::kIo, "cannot write " + path);
  write_container(c, out);
}

TensorContainer load_container(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCategory::kIo, "cannot open " + path);
  return read_container(in);
}

}  // namespace ctdg::diff
