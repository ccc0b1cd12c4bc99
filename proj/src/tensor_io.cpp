#include "twostream/tensor_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

namespace twostream {
namespace {

template <typename Word>
Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word r = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
      r = (r << 8) | (w & 0xFF);
      w >>= 8;
    }
    return r;
  }
  return w;
}

template <typename Float, typename Word>
void write_values(std::ostream& os, const Tensor& t) {
  static_assert(sizeof(Float) == sizeof(Word));
  std::string buf(std::size_t(t.size()) * sizeof(Word), '\0');
  for (Index i = 0; i < t.size(); ++i) {
    Word w = to_little(std::bit_cast<Word>(static_cast<Float>(t[i])));
    std::memcpy(buf.data() + std::size_t(i) * sizeof(Word), &w, sizeof(Word));
  }
  os.write(buf.data(), std::streamsize(buf.size()));
}

template <typename Float, typename Word>
void read_values(std::istream& is, Tensor& t) {
  std::string buf(std::size_t(t.size()) * sizeof(Word), '\0');
  is.read(buf.data(), std::streamsize(buf.size()));
  if (is.gcount() != std::streamsize(buf.size())) throw FormatError("TSR1: truncated payload");
  for (Index i = 0; i < t.size(); ++i) {
    Word w;
    std::memcpy(&w, buf.data() + std::size_t(i) * sizeof(Word), sizeof(Word));
    t[i] = static_cast<Real>(std::bit_cast<Float>(to_little(w)));
  }
}

}  // namespace

void write_tsr(std::ostream& os, const Tensor& t, StoredPrecision precision) {
  os << "TSR1 " << t.ndim();
  for (Index d : t.shape()) os << ' ' << d;
  os << (precision == StoredPrecision::F32 ? " f32\n" : " f64\n");
  if (precision == StoredPrecision::F32) {
    write_values<float, std::uint32_t>(os, t);
  } else {
    write_values<double, std::uint64_t>(os, t);
  }
  if (!os) throw FormatError("TSR1: write failed");
}

Tensor read_tsr(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("TSR1: missing header");
  std::istringstream header(line);
  std::string magic;
  Index ndim = -1;
  header >> magic >> ndim;
  if (magic != "TSR1" || ndim < 0) throw FormatError("TSR1: bad header '" + line + "'");
  Shape shape(static_cast<std::size_t>(ndim));
  for (auto& d : shape) {
    if (!(header >> d) || d < 0) throw FormatError("TSR1: bad extent in '" + line + "'");
  }
  std::string kind, extra;
  header >> kind;
  if (header >> extra) throw FormatError("TSR1: trailing tokens in '" + line + "'");
  Tensor t(shape);
  if (kind == "f64") {
    read_values<double, std::uint64_t>(is, t);
  } else if (kind == "f32") {
    read_values<float, std::uint32_t>(is, t);
  } else {
    throw FormatError("TSR1: unknown element type '" + kind + "'");
  }
  return t;
}

void save_tsr(const std::filesystem::path& path, const Tensor& t, StoredPrecision precision) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot open " + path.string() + " for writing");
  write_tsr(os, t, precision);
}

Tensor load_tsr(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_tsr(is);
}

}  // namespace twostream
