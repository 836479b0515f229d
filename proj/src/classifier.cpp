#include "shipsr/classifier.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "shipsr/degradation.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/tensor_image.hpp"

namespace shipsr {

CategoryTaxonomy::CategoryTaxonomy(std::vector<std::string> names) : names_(std::move(names)) {
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ArgumentError("category names must be non-empty");
    if (!seen.insert(n).second) throw ArgumentError("duplicate category name '" + n + "'");
  }
}

CategoryTaxonomy CategoryTaxonomy::ship_spotting() {
  return CategoryTaxonomy({"Bulkers", "Containerships", "Cruise ships", "Dredgers", "Fire Fighting Vessels",
                           "Floating Sheerlegs", "General Cargo", "Inland", "Livestock Carriers",
                           "Passenger Vessels", "Patrol Forces", "Reefers", "Ro-ro", "Supply ships", "Tankers",
                           "Training ships", "Tugs", "Vehicle Carriers", "Wood Chip Carriers"});
}

int CategoryTaxonomy::index_of(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  return it == names_.end() ? -1 : static_cast<int>(it - names_.begin());
}

ShipClassifierImpl::ShipClassifierImpl(int k, const ClassifierConfig& cfg) : num_classes(k), config(cfg) {
  if (num_classes < 1) throw ArgumentError("classifier needs at least one class");
  trunk = nn::Sequential();
  int ch = 3;
  for (int out : config.channels) {
    trunk->push_back(nn::Conv2d(nn::Conv2dOptions(ch, out, 3).padding(1)));
    trunk->push_back(nn::GroupNorm(group_count(out), out));
    trunk->push_back(nn::SiLU());
    trunk->push_back(nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1)));
    trunk->push_back(nn::SiLU());
    trunk->push_back(nn::AvgPool2d(nn::AvgPool2dOptions(2)));
    ch = out;
  }
  register_module("trunk", trunk);
  embed = register_module("embed", nn::Linear(ch, config.embed_dim));
  head = register_module("head", nn::Linear(config.embed_dim, num_classes));
}

torch::Tensor ShipClassifierImpl::resize_input(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != 3) throw DimensionError("classifier input must be [B, 3, H, W]");
  if (x.size(2) == config.input_side && x.size(3) == config.input_side) return x;
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<std::int64_t>{config.input_side, config.input_side})
                               .mode(torch::kBilinear)
                               .align_corners(false)
                               .antialias(true));
}

torch::Tensor ShipClassifierImpl::features(const torch::Tensor& x) {
  auto h = trunk->forward(resize_input(x) * 2.0 - 1.0);
  return torch::silu(embed(h.mean({2, 3})));
}

torch::Tensor ShipClassifierImpl::logits(const torch::Tensor& x) { return head(features(x)); }

torch::Tensor ShipClassifierImpl::probabilities(const torch::Tensor& x) { return torch::softmax(logits(x), -1); }

namespace {

double accuracy(ShipClassifier& model, const torch::Tensor& x, const torch::Tensor& y) {
  if (x.size(0) == 0) return 0.0;
  torch::NoGradGuard no_grad;
  model->eval();
  std::int64_t correct = 0;
  for (std::int64_t i = 0; i < x.size(0); i += 128) {
    const auto n = std::min<std::int64_t>(128, x.size(0) - i);
    auto pred = model->logits(x.narrow(0, i, n)).argmax(1);
    correct += (pred == y.narrow(0, i, n)).sum().item<std::int64_t>();
  }
  return static_cast<double>(correct) / static_cast<double>(x.size(0));
}

double run_epoch(ShipClassifier& model, torch::optim::Optimizer& opt, const torch::Tensor& x,
                 const torch::Tensor& y, int batch_size, std::mt19937_64& rng) {
  model->train();
  std::vector<std::int64_t> order(static_cast<std::size_t>(x.size(0)));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  auto perm = torch::tensor(order, torch::kLong);
  double total = 0.0;
  std::int64_t batches = 0;
  for (std::int64_t i = 0; i < x.size(0); i += batch_size) {
    const auto n = std::min<std::int64_t>(batch_size, x.size(0) - i);
    auto idx = perm.narrow(0, i, n);
    auto xb = x.index_select(0, idx);
    // Horizontal flips: ships face either way.
    if (std::bernoulli_distribution(0.5)(rng)) xb = xb.flip({3});
    auto loss = torch::nn::functional::cross_entropy(model->logits(xb), y.index_select(0, idx));
    opt.zero_grad();
    loss.backward();
    opt.step();
    total += loss.item<double>();
    ++batches;
  }
  return total / static_cast<double>(std::max<std::int64_t>(batches, 1));
}

}  // namespace

TrainedClassifier train_classifier(const LabeledImages& data, const CategoryTaxonomy& taxonomy,
                                   const ClassifierConfig& config) {
  if (data.images.size() != data.labels.size()) throw DataError("images and labels differ in count");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < 0 || data.labels[i] >= taxonomy.size()) throw DataError("label outside the taxonomy");
    by_class[data.labels[i]].push_back(i);
  }
  std::size_t usable = 0;
  for (const auto& [label, idx] : by_class) {
    if (idx.size() >= 10) ++usable;
  }
  if (by_class.size() < 2 || usable < by_class.size()) {
    throw DataError("classifier training needs >= 2 categories with >= 10 samples each");
  }

  torch::manual_seed(config.seed);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> train_idx, val_idx;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_val = static_cast<std::size_t>(std::round(config.val_fraction * static_cast<double>(idx.size())));
    val_idx.insert(val_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  }

  TrainedClassifier result;
  result.taxonomy = taxonomy;
  result.model = ShipClassifier(taxonomy.size(), config);
  auto& model = result.model;

  auto gather = [&](const std::vector<std::size_t>& idx, bool degraded) {
    std::vector<torch::Tensor> xs;
    std::vector<std::int64_t> ys;
    for (std::size_t i : idx) {
      const Image& im = data.images[i];
      torch::Tensor t;
      if (degraded) {
        const int f = config.degraded_factor;
        Image small = bicubic_resize(im, std::max(1, im.height / f), std::max(1, im.width / f));
        t = to_tensor(bicubic_resize(small, im.height, im.width));
      } else {
        t = to_tensor(im);
      }
      xs.push_back(model->resize_input(t.unsqueeze(0)).squeeze(0));
      ys.push_back(data.labels[i]);
    }
    if (xs.empty()) return std::make_pair(torch::zeros({0, 3, config.input_side, config.input_side}),
                                          torch::zeros({0}, torch::kLong));
    return std::make_pair(torch::stack(xs), torch::tensor(ys, torch::kLong));
  };
  torch::Tensor x_train, y_train, x_val, y_val;
  {
    torch::NoGradGuard no_grad;
    std::tie(x_train, y_train) = gather(train_idx, false);
    std::tie(x_val, y_val) = gather(val_idx, false);
  }

  torch::optim::Adam opt(model->parameters(), torch::optim::AdamOptions(config.learning_rate));
  for (int e = 0; e < config.epochs; ++e) {
    const double loss = run_epoch(model, opt, x_train, y_train, config.batch_size, rng);
    result.history.push_back({e, loss, accuracy(model, x_val, y_val)});
  }
  if (config.finetune_on_degraded) {
    torch::Tensor x_deg, y_deg;
    {
      torch::NoGradGuard no_grad;
      std::tie(x_deg, y_deg) = gather(train_idx, true);
    }
    auto x_mix = torch::cat({x_train, x_deg});
    auto y_mix = torch::cat({y_train, y_deg});
    for (int e = 0; e < config.finetune_epochs; ++e) {
      const double loss = run_epoch(model, opt, x_mix, y_mix, config.batch_size, rng);
      result.history.push_back({config.epochs + e, loss, accuracy(model, x_val, y_val)});
    }
  }
  result.val_accuracy = accuracy(model, x_val, y_val);
  model->eval();
  freeze(*model);
  return result;
}

torch::Tensor classify_lr(const Image& lr, ShipClassifier& model) {
  torch::NoGradGuard no_grad;
  model->eval();
  return model->probabilities(to_tensor(lr).unsqueeze(0)).squeeze(0);
}

std::vector<int> predict_labels(const std::vector<Image>& images, ShipClassifier& model, int batch_size) {
  torch::NoGradGuard no_grad;
  model->eval();
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); i += static_cast<std::size_t>(batch_size)) {
    std::vector<const Image*> chunk;
    for (std::size_t j = i; j < std::min(images.size(), i + static_cast<std::size_t>(batch_size)); ++j) {
      chunk.push_back(&images[j]);
    }
    auto pred = model->logits(to_batch(chunk)).argmax(1);
    for (std::int64_t j = 0; j < pred.size(0); ++j) out.push_back(static_cast<int>(pred[j].item<std::int64_t>()));
  }
  return out;
}

}  // namespace shipsr
