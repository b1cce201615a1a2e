#pragma once

#include "xsec/tensor.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace xsec {

// Labeled samples plus metadata. ground_truth_features is set only by
// generators that plant known-relevant features.
struct Dataset {
    std::vector<Tensor> xs;
    std::vector<int> ys;
    std::vector<std::string> feature_names;
    int n_classes = 0;
    std::optional<std::set<std::size_t>> ground_truth_features;

    std::size_t size() const { return xs.size(); }
    std::size_t dim() const { return xs.empty() ? 0 : xs.front().size(); }

    void validate() const;

    // Mean feature vector; the train_mean attribution baseline.
    Tensor feature_mean() const;
};

struct SequenceWindowSpec {
    std::size_t window = 10;
    std::size_t vocab_size = 29;
};

// Uniform[-1,1] features; label = 1 iff the planted features sum above zero.
Dataset gen_planted_tabular(std::size_t n, std::size_t dim,
                            const std::set<std::size_t>& relevant, std::uint64_t seed);

// Digit-like image classes on a grid x grid canvas: each class is a fixed
// arrangement of Gaussian bumps, samples add pixel noise, values in [0,1].
Dataset gen_synthetic_digits(std::size_t n, std::size_t grid, std::size_t n_classes,
                             double noise_sigma, std::uint64_t seed);

// Sliding next-event-prediction samples: x = window one-hot vectors
// concatenated (dim = window * vocab_size), label = next event id.
Dataset windowize(const std::vector<int>& events, const SequenceWindowSpec& spec);

// Most likely event per one-hot block (argmax); inverse of the windowize
// encoding for valid inputs.
std::vector<int> decode_window(const Tensor& x, std::size_t vocab_size);

// CSV: header row, comma-separated floats, trailing integer label column.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

// IDX (big-endian): images magic 0x00000803, labels magic 0x00000801;
// pixels scaled to [0,1] by /255.
Dataset load_idx(const std::string& path_images, const std::string& path_labels);
void save_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
              const std::string& path_images, const std::string& path_labels);

// One session per line, space-separated integer event ids.
std::vector<std::vector<int>> load_sequences(const std::string& path);
void save_sequences(const std::vector<std::vector<int>>& sessions, const std::string& path);

} // namespace xsec
