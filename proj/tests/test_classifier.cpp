#include <doctest.h>

#include "shipsr/classifier.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/synthetic.hpp"
#include "support.hpp"

using namespace shipsr;

namespace {

LabeledImages toy_set(int per_class, std::uint64_t seed) {
  LabeledImages set;
  std::mt19937_64 rng(seed);
  for (int i = 0; i < per_class; ++i) {
    set.images.push_back(render_ship(ShipStyle::Tanker, 32, rng));
    set.labels.push_back(0);
    set.images.push_back(render_ship(ShipStyle::Passenger, 32, rng));
    set.labels.push_back(1);
  }
  return set;
}

ClassifierConfig toy_config() {
  ClassifierConfig c;
  c.channels = {8, 16};
  c.embed_dim = 8;
  c.epochs = 8;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("ship_classifier") {
  TEST_CASE("taxonomy") {
    const auto t = CategoryTaxonomy::ship_spotting();
    CHECK(t.size() == 19);
    CHECK(t.contains("Tankers"));
    CHECK(t.index_of("Tankers") == t.index_of(t.name(t.index_of("Tankers"))));
    CHECK(t.index_of("Submarines") == -1);
    CHECK_THROWS_AS(CategoryTaxonomy({"A", "A"}), ArgumentError);
    CHECK_THROWS_AS(CategoryTaxonomy({"A", ""}), ArgumentError);
  }

  TEST_CASE("two separable categories are learned") {
    torch::manual_seed(0);
    const auto train = toy_set(40, 1);
    const auto held_out = toy_set(20, 99);
    auto trained = train_classifier(train, CategoryTaxonomy({"tanker", "passenger"}), toy_config());
    const auto pred = predict_labels(held_out.images, trained.model);
    int correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == held_out.labels[i];
    CHECK(static_cast<double>(correct) / static_cast<double>(pred.size()) > 0.9);
    for (const auto& p : trained.model->parameters()) CHECK_FALSE(p.requires_grad());

    const auto probs = classify_lr(testing::random_image(8, 8, 4), trained.model);
    CHECK(probs.sizes() == torch::IntArrayRef({2}));
    CHECK(probs.sum().item<double>() == doctest::Approx(1.0).epsilon(1e-6));
    CHECK((probs >= 0).all().item<bool>());
  }

  TEST_CASE("training is deterministic in the seed") {
    const auto train = toy_set(12, 5);
    auto cfg = toy_config();
    cfg.epochs = 2;
    const CategoryTaxonomy tax({"tanker", "passenger"});
    auto a = train_classifier(train, tax, cfg);
    auto b = train_classifier(train, tax, cfg);
    const auto pa = a.model->parameters();
    const auto pb = b.model->parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(torch::equal(pa[i], pb[i]));
  }

  TEST_CASE("invalid training sets") {
    const CategoryTaxonomy tax({"tanker", "passenger"});
    auto small = toy_set(5, 2);
    CHECK_THROWS_AS(train_classifier(small, tax, toy_config()), DataError);

    auto one_class = toy_set(12, 2);
    for (auto& l : one_class.labels) l = 0;
    CHECK_THROWS_AS(train_classifier(one_class, CategoryTaxonomy({"tanker"}), toy_config()), DataError);

    auto bad_label = toy_set(12, 2);
    bad_label.labels[0] = 7;
    CHECK_THROWS_AS(train_classifier(bad_label, tax, toy_config()), DataError);

    auto ragged = toy_set(12, 2);
    ragged.labels.pop_back();
    CHECK_THROWS_AS(train_classifier(ragged, tax, toy_config()), DataError);
  }

  TEST_CASE("single-class model yields certainty") {
    torch::manual_seed(1);
    ShipClassifier m(1, toy_config());
    const auto p = classify_lr(testing::random_image(8, 8, 2), m);
    CHECK(p.sizes() == torch::IntArrayRef({1}));
    CHECK(p.item<double>() == 1.0);
  }

  TEST_CASE("inputs of any size are resized") {
    torch::manual_seed(1);
    ShipClassifier m(3, toy_config());
    const auto a = m->probabilities(torch::rand({2, 3, 8, 8}));
    const auto b = m->probabilities(torch::rand({2, 3, 64, 64}));
    CHECK(a.sizes() == torch::IntArrayRef({2, 3}));
    CHECK(b.sizes() == torch::IntArrayRef({2, 3}));
    CHECK(m->features(torch::rand({1, 3, 20, 20})).sizes() == torch::IntArrayRef({1, 8}));
  }
}
