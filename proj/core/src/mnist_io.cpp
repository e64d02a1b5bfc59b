#include "lsat/mnist_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>

#include "lsat/errors.hpp"

namespace lsat::io {

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset, const std::filesystem::path& path) {
  if (buf.size() < offset + 4) throw TruncatedFile(path.string() + ": header ends early");
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const std::array<char, 4> bytes{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                  static_cast<char>(v)};
  out.write(bytes.data(), 4);
}

}  // namespace

LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);

  if (const auto magic = read_be32(img, 0, images); magic != kImageMagic) throw BadMagic(images.string(), kImageMagic, magic);
  if (const auto magic = read_be32(lab, 0, labels); magic != kLabelMagic) throw BadMagic(labels.string(), kLabelMagic, magic);

  const std::size_t count = read_be32(img, 4, images);
  const std::size_t height = read_be32(img, 8, images);
  const std::size_t width = read_be32(img, 12, images);
  const std::size_t label_count = read_be32(lab, 4, labels);
  if (count != label_count) {
    throw CountMismatch(std::to_string(count) + " images but " + std::to_string(label_count) + " labels");
  }
  const std::size_t pixels = height * width;
  if (img.size() < 16 + count * pixels) throw TruncatedFile(images.string() + ": pixel data ends early");
  if (lab.size() < 8 + count) throw TruncatedFile(labels.string() + ": label data ends early");

  LabeledImages out;
  out.images.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  out.labels.resize(count);
  const unsigned char* p = img.data() + 16;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < pixels; ++j) {
      out.images(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = p[i * pixels + j] / 255.0;
    }
    const int label = lab[8 + i];
    if (label >= kClasses) throw CountMismatch("label " + std::to_string(label) + " out of range in " + labels.string());
    out.labels[i] = label;
  }
  return out;
}

LabeledImages load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    const char* cur = line.data();
    const char* end = line.data() + line.size();
    while (cur <= end) {
      const char* comma = std::find(cur, end, ',');
      int v = 0;
      const auto [ptr, ec] = std::from_chars(cur, comma, v);
      if (ec != std::errc() || ptr != comma) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": not an integer field");
      }
      if (fields == 0) {
        if (v < 0 || v >= kClasses) throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad label");
        labels.push_back(v);
      } else {
        if (v < 0 || v > 255) throw DataError(path.string() + ":" + std::to_string(line_no) + ": pixel outside [0, 255]");
        values.push_back(v / 255.0);
      }
      ++fields;
      cur = comma + 1;
    }
    if (width == 0) width = fields - 1;
    if (fields - 1 != width || width == 0) {
      throw CountMismatch(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                          " pixels");
    }
  }
  LabeledImages out;
  out.labels = std::move(labels);
  out.images = Eigen::Map<DenseMatrix>(values.data(), static_cast<Eigen::Index>(out.labels.size()),
                                       static_cast<Eigen::Index>(width));
  return out;
}

void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const LabeledImages& data,
               std::uint32_t height, std::uint32_t width) {
  if (data.images.cols() != static_cast<Eigen::Index>(height) * width) {
    throw DimensionMismatch("image width does not match height x width");
  }
  std::ofstream img(images, std::ios::binary);
  std::ofstream lab(labels, std::ios::binary);
  if (!img || !lab) throw DataError("cannot write IDX files");
  const auto count = static_cast<std::uint32_t>(data.rows());
  write_be32(img, kImageMagic);
  write_be32(img, count);
  write_be32(img, height);
  write_be32(img, width);
  for (Eigen::Index i = 0; i < data.images.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.images.cols(); ++j) {
      img.put(static_cast<char>(static_cast<unsigned char>(std::lround(data.images(i, j) * 255.0))));
    }
  }
  write_be32(lab, kLabelMagic);
  write_be32(lab, count);
  for (int l : data.labels) lab.put(static_cast<char>(l));
}

LabeledImages take(const LabeledImages& src, const std::vector<std::size_t>& indices) {
  LabeledImages out;
  out.images.resize(static_cast<Eigen::Index>(indices.size()), src.images.cols());
  out.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    out.images.row(static_cast<Eigen::Index>(i)) = src.images.row(static_cast<Eigen::Index>(indices[i]));
    out.labels.push_back(src.labels.at(indices[i]));
  }
  return out;
}

fit::Dataset to_dataset(const LabeledImages& src) {
  fit::Dataset d;
  d.inputs = src.images;
  d.targets = DenseMatrix::Zero(src.rows(), kClasses);
  for (std::size_t i = 0; i < src.labels.size(); ++i) d.targets(static_cast<Eigen::Index>(i), src.labels[i]) = 1.0;
  return d;
}

SplitSizes sizes_for(Scale scale) {
  switch (scale) {
    case Scale::full: return {50000, 35000, 15000};
    case Scale::small:
    case Scale::custom: break;
  }
  return {50000, 3500, 1500};
}

std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
  // Largest multiple of bound that fits; draws at or above it are rejected.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

SplitIndices split(std::size_t source_rows, const SplitSizes& sizes, std::uint64_t seed) {
  if (sizes.pool > source_rows) {
    throw InsufficientData("split needs a pool of " + std::to_string(sizes.pool) + " rows, source has " +
                           std::to_string(source_rows));
  }
  const std::size_t need = sizes.train + sizes.val;
  if (need > sizes.pool) {
    throw InsufficientData("split needs " + std::to_string(need) + " rows from a pool of " + std::to_string(sizes.pool));
  }
  std::vector<std::size_t> perm(sizes.pool);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `need` slots are a uniform sample.
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t j = i + bounded_draw(rng, sizes.pool - i);
    std::swap(perm[i], perm[j]);
  }
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sizes.train));
  out.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(sizes.train), perm.begin() + static_cast<std::ptrdiff_t>(need));
  return out;
}

}  // namespace lsat::io
