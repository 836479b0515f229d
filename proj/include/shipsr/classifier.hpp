#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "shipsr/blocks.hpp"
#include "shipsr/image.hpp"

namespace shipsr {

// Ordered, unique category names; the index is the class id.
class CategoryTaxonomy {
 public:
  CategoryTaxonomy() = default;
  explicit CategoryTaxonomy(std::vector<std::string> names);

  // The nineteen category names of the ShipSpotting selection.
  static CategoryTaxonomy ship_spotting();

  const std::vector<std::string>& names() const { return names_; }
  int size() const { return static_cast<int>(names_.size()); }
  int index_of(const std::string& name) const;  // -1 when absent
  bool contains(const std::string& name) const { return index_of(name) >= 0; }
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }

  bool operator==(const CategoryTaxonomy&) const = default;

 private:
  std::vector<std::string> names_;
};

struct ClassifierConfig {
  int input_side = 32;
  std::vector<int> channels{16, 32, 64, 64};
  int embed_dim = 32;
  int epochs = 12;
  int batch_size = 32;
  double learning_rate = 2e-3;
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
  // Additional epochs on LR-like (downscaled then upscaled) copies.
  bool finetune_on_degraded = false;
  int finetune_epochs = 4;
  int degraded_factor = 8;
};

// Small CNN: one conv/GroupNorm/SiLU/pool block per entry of `channels`,
// global average pooling, an embedding layer (the FID feature) and a linear
// head. Inputs of any size are resized to input_side first.
struct ShipClassifierImpl : nn::Module {
  ShipClassifierImpl(int num_classes, const ClassifierConfig& config);

  torch::Tensor resize_input(const torch::Tensor& x) const;
  torch::Tensor features(const torch::Tensor& x);
  torch::Tensor logits(const torch::Tensor& x);
  torch::Tensor probabilities(const torch::Tensor& x);

  int num_classes;
  ClassifierConfig config;
  nn::Sequential trunk{nullptr};
  nn::Linear embed{nullptr}, head{nullptr};
};
TORCH_MODULE(ShipClassifier);

struct LabeledImages {
  std::vector<Image> images;
  std::vector<int> labels;
};

struct ClassifierEpoch {
  int epoch = 0;
  double loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainedClassifier {
  ShipClassifier model{nullptr};
  CategoryTaxonomy taxonomy;
  double val_accuracy = 0.0;
  std::vector<ClassifierEpoch> history;
};

// Requires >= 2 categories with >= 10 samples each. Holds out a stratified
// validation fraction, trains with Adam and returns the frozen model.
TrainedClassifier train_classifier(const LabeledImages& train_set, const CategoryTaxonomy& taxonomy,
                                   const ClassifierConfig& config);

// Softmax probabilities [K] for one LR image (any size).
torch::Tensor classify_lr(const Image& lr, ShipClassifier& model);

std::vector<int> predict_labels(const std::vector<Image>& images, ShipClassifier& model, int batch_size = 64);

}  // namespace shipsr
