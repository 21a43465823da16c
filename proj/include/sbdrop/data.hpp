#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbdrop/tensor.hpp"

namespace sbdrop::data {

struct RegressionData {
  Tensor x_train;  // [N x D]
  Tensor y_train;  // [N]
  Tensor x_test;
  Tensor y_test;
  std::uint64_t seed = 0;
  double rho = 0.0;
  bool decorrelated_test = false;
};

// Regression data where feature pairs (2k, 2k+1) are correlated at `rho` and
// the hidden weight vector loads on only the even feature of each pair, so a
// model that leans on the odd twin pays for it once the correlation is gone.
// Features sit at unit mean. When decorrelate_test is set the test split is
// drawn with the pair correlation removed. Identical seeds reproduce the
// dataset bit for bit.
RegressionData generate_correlated_regression(std::uint64_t seed,
                                              std::size_t n_per_split,
                                              std::size_t dim, double rho,
                                              double noise_sigma,
                                              bool decorrelate_test);

struct TextData {
  std::vector<std::vector<int>> x_train;  // token id sequences
  std::vector<int> y_train;               // class labels
  std::vector<std::vector<int>> x_test;
  std::vector<int> y_test;
  std::size_t vocab_size = 0;
  std::size_t num_classes = 2;
  std::uint64_t seed = 0;
  double rho = 0.0;
};

// Binary sequences where each class has one predictive token; in the train
// split a class-specific companion token co-occurs with it at rate
// rho + (1-rho)/(V-2), in the test split at the chance rate 1/(V-2).
// Token ids: 0/1 predictive, 2/3 companions, the rest filler.
TextData generate_synthetic_text(std::uint64_t seed, std::size_t vocab_size,
                                 std::size_t n_samples, std::size_t seq_len,
                                 double rho);

// UTF-8 "label<TAB>text" lines, whitespace-tokenized, labels nonnegative
// integers. Vocabulary ids assigned in first-seen order over train then test.
// Malformed lines throw with their line number. An empty test_path reuses the
// train file for both splits.
TextData load_text_tsv(const std::string& train_path,
                       const std::string& test_path);

}  // namespace sbdrop::data
