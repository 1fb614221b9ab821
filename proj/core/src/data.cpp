#include "cgvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <stdexcept>

namespace cgvae {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("IDX: truncated header");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_be32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

// 8x8 glyph prototypes: box, cross, stripes, diamond, checker
const char* kGlyphs[] = {
    "11111111"
    "10000001"
    "10000001"
    "10000001"
    "10000001"
    "10000001"
    "10000001"
    "11111111",

    "10000001"
    "01000010"
    "00100100"
    "00011000"
    "00011000"
    "00100100"
    "01000010"
    "10000001",

    "11111111"
    "00000000"
    "11111111"
    "00000000"
    "11111111"
    "00000000"
    "11111111"
    "00000000",

    "00011000"
    "00111100"
    "01111110"
    "11111111"
    "11111111"
    "01111110"
    "00111100"
    "00011000",

    "11001100"
    "11001100"
    "00110011"
    "00110011"
    "11001100"
    "11001100"
    "00110011"
    "00110011",
};

}  // namespace

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < split_label.size(); ++i)
    if (split_label[i] == static_cast<int>(s)) idx.push_back(i);
  return idx;
}

Dataset load_idx(const std::string& path, std::size_t count_limit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_idx: cannot open " + path);
  std::uint32_t magic = read_be32(in);
  if (magic != kImageMagic)
    throw std::runtime_error("load_idx: bad magic in " + path);
  std::uint32_t n = read_be32(in);
  std::uint32_t rows = read_be32(in);
  std::uint32_t cols = read_be32(in);
  std::size_t take = count_limit == 0
                         ? n
                         : std::min<std::size_t>(count_limit, n);
  std::size_t dim = std::size_t(rows) * cols;

  std::vector<unsigned char> buf(take * dim);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(in.gcount()) != buf.size())
    throw std::runtime_error("load_idx: truncated payload in " + path);

  Dataset d;
  d.items = Tensor({take, dim});
  for (std::size_t i = 0; i < buf.size(); ++i)
    d.items[i] = static_cast<double>(buf[i]) / 255.0;
  d.item_shape = {rows, cols};
  d.provenance = "idx:" + path;
  return d;
}

void save_idx(const Dataset& data, const std::string& path) {
  if (data.item_shape.size() != 2)
    throw std::invalid_argument("save_idx: expects 2-d items");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_idx: cannot open " + path);
  write_be32(out, kImageMagic);
  write_be32(out, static_cast<std::uint32_t>(data.count()));
  write_be32(out, static_cast<std::uint32_t>(data.item_shape[0]));
  write_be32(out, static_cast<std::uint32_t>(data.item_shape[1]));
  std::vector<unsigned char> buf(data.items.size());
  for (std::size_t i = 0; i < buf.size(); ++i)
    buf[i] = static_cast<unsigned char>(std::lround(data.items[i] * 255.0));
  out.write(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

Dataset split(Dataset data, const std::array<double, 3>& ratios, Rng& rng) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (total <= 0.0 || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw std::invalid_argument("split: ratios must be nonnegative, sum > 0");
  std::size_t n = data.count();

  // largest-remainder apportionment
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    double exact = n * ratios[s] / total;
    counts[s] = static_cast<std::size_t>(exact);
    frac[s] = exact - counts[s];
    assigned += counts[s];
  }
  while (assigned < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s)
      if (frac[s] > frac[best]) best = s;
    ++counts[best];
    frac[best] = -1.0;
    ++assigned;
  }

  // Fisher-Yates with the provided stream
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = rng.next_u64() % i;
    std::swap(order[i - 1], order[j]);
  }

  data.split_label.assign(n, 0);
  std::size_t pos = 0;
  for (int s = 0; s < 3; ++s)
    for (std::size_t k = 0; k < counts[s]; ++k)
      data.split_label[order[pos++]] = s;
  return data;
}

Dataset synth_grid_digits(int n_per_class, double noise, Rng& rng) {
  constexpr int kDim = 64;
  const int n_classes = static_cast<int>(std::size(kGlyphs));
  std::size_t n = static_cast<std::size_t>(std::max(0, n_per_class)) * n_classes;
  Dataset d;
  d.items = n == 0 ? Tensor() : Tensor({n, static_cast<std::size_t>(kDim)});
  d.item_shape = {8, 8};
  d.provenance = "synthetic-glyphs";
  std::size_t row = 0;
  for (int i = 0; i < n_per_class; ++i)
    for (int c = 0; c < n_classes; ++c, ++row)
      for (int px = 0; px < kDim; ++px) {
        double v = kGlyphs[c][px] == '1' ? 1.0 : 0.0;
        if (rng.uniform() < noise) v = 1.0 - v;
        d.items(row, px) = v;
      }
  return d;
}

}  // namespace cgvae
