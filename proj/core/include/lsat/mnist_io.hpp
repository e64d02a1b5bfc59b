#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "lsat/datafit.hpp"
#include "lsat/matrix.hpp"

namespace lsat::io {

inline constexpr std::uint32_t kImageMagic = 0x00000803;
inline constexpr std::uint32_t kLabelMagic = 0x00000801;
inline constexpr int kClasses = 10;

// Images as rows of pixels / 255 in row order, labels in 0..9.
struct LabeledImages {
  DenseMatrix images;
  std::vector<int> labels;

  Eigen::Index rows() const noexcept { return images.rows(); }
};

// Reads an IDX image/label file pair. Throws BadMagic, TruncatedFile,
// CountMismatch (image and label counts differ, or a label is out of range)
// and DataError when a file cannot be opened.
LabeledImages load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

// Reads header-free `label,p0,...,p783` rows with pixels in [0, 255].
LabeledImages load_csv(const std::filesystem::path& path);

// Writes the IDX pair; used for fixtures and round trips.
void write_idx(const std::filesystem::path& images, const std::filesystem::path& labels, const LabeledImages& data,
               std::uint32_t height = 28, std::uint32_t width = 28);

// Rows `indices` of `src`, in that order.
LabeledImages take(const LabeledImages& src, const std::vector<std::size_t>& indices);

// Dataset with one-hot targets over kClasses.
fit::Dataset to_dataset(const LabeledImages& src);

enum class Scale { small, full, custom };

struct SplitSizes {
  std::size_t pool = 50000;
  std::size_t train = 3500;
  std::size_t val = 1500;
};

SplitSizes sizes_for(Scale scale);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Uniform sample without replacement of train + val indices from the first
// `pool` rows, deterministic per seed. Throws InsufficientData when the
// source or the pool is too small.
SplitIndices split(std::size_t source_rows, const SplitSizes& sizes, std::uint64_t seed);

// Uniform integer in [0, bound), bound > 0, by rejection sampling. Unlike
// std::uniform_int_distribution the sequence is the same on every standard
// library.
std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound);

}  // namespace lsat::io
