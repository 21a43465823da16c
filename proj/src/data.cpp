#include "sbdrop/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

#include "sbdrop/rng.hpp"

namespace sbdrop::data {

namespace {

constexpr double kFeatureMean = 1.0;  // keeps replacement targets off zero

Tensor draw_features(Rng& rng, std::size_t n, std::size_t dim, double rho) {
  Tensor x = Tensor::zeros({n, dim});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < dim / 2; ++k) {
      const double z1 = rng.next_normal();
      const double z2 = rng.next_normal();
      x.at(i, 2 * k) = kFeatureMean + z1;
      x.at(i, 2 * k + 1) =
          kFeatureMean + rho * z1 + std::sqrt(1.0 - rho * rho) * z2;
    }
  }
  return x;
}

Tensor labels_for(Rng& rng, const Tensor& x, const std::vector<double>& w_true,
                  double noise_sigma) {
  const std::size_t n = x.dim(0), dim = x.dim(1);
  Tensor y = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += x.at(i, j) * w_true[j];
    y[i] = acc + noise_sigma * rng.next_normal();
  }
  return y;
}

}  // namespace

RegressionData generate_correlated_regression(std::uint64_t seed,
                                              std::size_t n_per_split,
                                              std::size_t dim, double rho,
                                              double noise_sigma,
                                              bool decorrelate_test) {
  if (dim == 0 || dim % 2 != 0) {
    throw std::invalid_argument("dim must be even and positive, got " +
                                std::to_string(dim));
  }
  if (n_per_split == 0) {
    throw std::invalid_argument("n_per_split must be positive");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("rho must be in [0, 1], got " +
                                std::to_string(rho));
  }
  if (!(noise_sigma >= 0.0)) {
    throw std::invalid_argument("noise_sigma must be nonnegative, got " +
                                std::to_string(noise_sigma));
  }

  Rng rng(seed);

  // hidden weights load only on the even feature of each pair
  std::vector<double> w_true(dim, 0.0);
  for (std::size_t k = 0; k < dim / 2; ++k) {
    w_true[2 * k] = rng.next_normal();
  }

  RegressionData out;
  out.seed = seed;
  out.rho = rho;
  out.decorrelated_test = decorrelate_test;
  out.x_train = draw_features(rng, n_per_split, dim, rho);
  out.y_train = labels_for(rng, out.x_train, w_true, noise_sigma);
  out.x_test =
      draw_features(rng, n_per_split, dim, decorrelate_test ? 0.0 : rho);
  out.y_test = labels_for(rng, out.x_test, w_true, noise_sigma);
  return out;
}

TextData generate_synthetic_text(std::uint64_t seed, std::size_t vocab_size,
                                 std::size_t n_samples, std::size_t seq_len,
                                 double rho) {
  if (vocab_size < 8) {
    throw std::invalid_argument("vocab_size must be >= 8, got " +
                                std::to_string(vocab_size));
  }
  if (seq_len < 3) {
    throw std::invalid_argument("seq_len must be >= 3, got " +
                                std::to_string(seq_len));
  }
  if (n_samples == 0) {
    throw std::invalid_argument("n_samples must be positive");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("rho must be in [0, 1], got " +
                                std::to_string(rho));
  }

  Rng rng(seed);
  const int first_filler = 4;
  const int v = static_cast<int>(vocab_size);

  auto make_split = [&](double co_rate, std::vector<std::vector<int>>& xs,
                        std::vector<int>& ys) {
    for (std::size_t s = 0; s < n_samples; ++s) {
      const int label = rng.next_double() < 0.5 ? 0 : 1;
      std::vector<int> tokens(seq_len);
      tokens[0] = label;  // predictive token A_label
      if (rng.next_double() < co_rate) {
        tokens[1] = 2 + label;  // companion B_label
      } else {
        // any non-predictive token, companions included (chance floor)
        tokens[1] = 2 + static_cast<int>(rng.next_double() * (v - 2));
      }
      for (std::size_t t = 2; t < seq_len; ++t) {
        tokens[t] = first_filler +
                    static_cast<int>(rng.next_double() * (v - first_filler));
      }
      // Fisher-Yates so position carries no signal
      for (std::size_t t = seq_len - 1; t > 0; --t) {
        const std::size_t u =
            static_cast<std::size_t>(rng.next_double() * double(t + 1));
        std::swap(tokens[t], tokens[u]);
      }
      xs.push_back(std::move(tokens));
      ys.push_back(label);
    }
  };

  TextData out;
  out.seed = seed;
  out.rho = rho;
  out.vocab_size = vocab_size;
  out.num_classes = 2;
  make_split(rho, out.x_train, out.y_train);
  make_split(0.0, out.x_test, out.y_test);
  return out;
}

namespace {

void parse_tsv_file(const std::string& path,
                    std::map<std::string, int>& vocab,
                    std::vector<std::vector<int>>& xs, std::vector<int>& ys,
                    int& max_label) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open dataset file: " + path);
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": missing tab separator");
    }
    const std::string label_str = line.substr(0, tab);
    int label = -1;
    try {
      std::size_t used = 0;
      label = std::stoi(label_str, &used);
      if (used != label_str.size()) label = -1;
    } catch (const std::exception&) {
      label = -1;
    }
    if (label < 0) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": label must be a nonnegative integer, got '" +
                               label_str + "'");
    }
    std::istringstream words(line.substr(tab + 1));
    std::vector<int> tokens;
    std::string word;
    while (words >> word) {
      auto [it, inserted] =
          vocab.try_emplace(word, static_cast<int>(vocab.size()));
      tokens.push_back(it->second);
    }
    if (tokens.empty()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": empty text");
    }
    max_label = std::max(max_label, label);
    xs.push_back(std::move(tokens));
    ys.push_back(label);
  }
  if (xs.empty()) {
    throw std::runtime_error(path + ": no examples");
  }
}

}  // namespace

TextData load_text_tsv(const std::string& train_path,
                       const std::string& test_path) {
  TextData out;
  std::map<std::string, int> vocab;
  int max_label = 0;
  parse_tsv_file(train_path, vocab, out.x_train, out.y_train, max_label);
  if (test_path.empty() || test_path == train_path) {
    out.x_test = out.x_train;
    out.y_test = out.y_train;
  } else {
    parse_tsv_file(test_path, vocab, out.x_test, out.y_test, max_label);
  }
  out.vocab_size = vocab.size();
  out.num_classes = static_cast<std::size_t>(max_label) + 1;
  return out;
}

}  // namespace sbdrop::data
