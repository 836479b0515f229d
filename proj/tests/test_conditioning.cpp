#include <doctest.h>

#include "shipsr/conditioning.hpp"
#include "shipsr/errors.hpp"
#include "shipsr/text.hpp"
#include "shipsr/training.hpp"
#include "support.hpp"

using namespace shipsr;

namespace {

// Small integers over 8: products and sums below stay exactly representable.
torch::Tensor dyadic(std::vector<std::int64_t> shape, std::uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::randint(-16, 17, shape, gen, torch::kFloat32) / 8.0;
}

double l2(const torch::Tensor& a, const torch::Tensor& b) { return (a - b).pow(2).sum().sqrt().item<double>(); }

}  // namespace

TEST_SUITE("conditioning") {
  TEST_CASE("sft modulation arithmetic") {
    auto f = torch::randn({2, 4, 5, 5});
    CHECK(torch::equal(sft_modulate(f, torch::ones_like(f), torch::zeros_like(f)), f));
    auto b = torch::randn({2, 4, 5, 5});
    CHECK(torch::equal(sft_modulate(f, torch::zeros_like(f), b), b));
    auto half = torch::full({1, 1, 2, 2}, 0.5);
    auto out = sft_modulate(half, torch::full({1, 1, 2, 2}, 2.0), torch::full({1, 1, 2, 2}, 1.0));
    CHECK(torch::equal(out, torch::full({1, 1, 2, 2}, 2.0)));
    auto g1 = torch::randn({2, 1, 5, 5});
    CHECK(torch::allclose(sft_modulate(f, g1, torch::zeros_like(g1)), g1 * f));
    CHECK_THROWS_AS(sft_modulate(f, torch::ones({2, 4, 4, 5}), torch::zeros_like(f)), DimensionError);
    CHECK_THROWS_AS(sft_modulate(f, torch::ones_like(f), torch::zeros({2, 3, 5, 5})), DimensionError);
  }

  TEST_CASE("sft is additive in the features") {
    auto f1 = dyadic({2, 3, 4, 4}, 1), f2 = dyadic({2, 3, 4, 4}, 2), g = dyadic({2, 3, 4, 4}, 3);
    auto zero = torch::zeros_like(g);
    CHECK(torch::equal(sft_modulate(f1 + f2, g, zero), sft_modulate(f1, g, zero) + sft_modulate(f2, g, zero)));
  }

  TEST_CASE("condition vector parts") {
    torch::manual_seed(2);
    ConditionEmbedding tables(3, 4, 4);
    auto t = torch::tensor({7}, torch::kLong);
    for (int k = 0; k < 3; ++k) {
      auto p = torch::zeros({1, 3});
      p[0][k] = 1.0;
      auto b = build_condition_vector(p, t, tables, 50);
      CHECK(b.size(1) == 8);
      CHECK(torch::equal(b[0].slice(0, 0, 4), tables->class_table[k]));
    }
    ConditionEmbedding two(2, 4, 4);
    auto b = build_condition_vector(torch::tensor({{0.5f, 0.5f}}), t, two, 50);
    auto mid = (two->class_table[0] + two->class_table[1]) / 2.0;
    CHECK(torch::allclose(b[0].slice(0, 0, 4), mid, 1e-6, 1e-7));
    CHECK(torch::equal(b[0].slice(0, 4, 8), two->time_part(t)[0]));
  }

  TEST_CASE("malformed class evidence") {
    ConditionEmbedding tables(2, 4, 4);
    auto t = torch::tensor({1}, torch::kLong);
    CHECK_THROWS_AS(build_condition_vector(torch::tensor({{0.5f, 0.4f}}), t, tables, 50), ArgumentError);
    CHECK_THROWS_AS(build_condition_vector(torch::tensor({{1.5f, -0.5f}}), t, tables, 50), ArgumentError);
    CHECK_THROWS_AS(build_condition_vector(torch::tensor({{1.0f, 0.0f, 0.0f}}), t, tables, 50), ArgumentError);
    CHECK_THROWS_AS(build_condition_vector(torch::tensor({{1.0f, 0.0f}}), torch::tensor({50}, torch::kLong), tables, 50),
                    ArgumentError);
    CHECK_NOTHROW(build_condition_vector(torch::tensor({{0.5f, 0.5f + 5e-6f}}), t, tables, 50));
  }

  TEST_CASE("class part is permutation equivariant") {
    ConditionEmbedding tables(4, 6, 4);
    {
      torch::NoGradGuard no_grad;
      tables->class_table.copy_(dyadic({4, 6}, 7));
    }
    auto p = torch::tensor({{0.5f, 0.125f, 0.25f, 0.125f}});
    auto perm = torch::tensor({2, 0, 3, 1}, torch::kLong);
    ConditionEmbedding permuted(4, 6, 4);
    {
      torch::NoGradGuard no_grad;
      permuted->class_table.copy_(tables->class_table.index_select(0, perm));
    }
    CHECK(torch::equal(tables->class_part(p), permuted->class_part(p.index_select(1, perm))));
  }

  TEST_CASE("encoder scales, identity init and sensitivity") {
    torch::manual_seed(3);
    ConditioningConfig cfg;
    cfg.num_classes = 4;
    cfg.latent_channels = 4;
    cfg.scale_channels = {8, 16, 16};
    ConditionEncoder enc(cfg);
    auto z = torch::randn({1, 4, 16, 16});
    auto probs = torch::tensor({{0.1f, 0.2f, 0.3f, 0.4f}});
    auto b1 = enc->condition_vector(probs, torch::tensor({5}, torch::kLong));
    auto b2 = enc->condition_vector(probs, torch::tensor({150}, torch::kLong));
    auto out1 = enc->forward(b1, z);
    REQUIRE(out1.scales() == 3);
    const int sides[] = {16, 8, 4};
    for (int s = 0; s < 3; ++s) {
      CHECK(out1.sft[s].gamma.size(2) == sides[s]);
      CHECK(out1.features[s].size(3) == sides[s]);
      CHECK(torch::equal(out1.sft[s].gamma, torch::ones_like(out1.sft[s].gamma)));
      CHECK(torch::equal(out1.sft[s].beta, torch::zeros_like(out1.sft[s].beta)));
    }
    auto out2 = enc->forward(b2, z);
    for (int s = 0; s < 3; ++s) CHECK(l2(out1.features[s], out2.features[s]) > 0.0);

    enc->randomize_heads(0.05);
    auto r1 = enc->forward(b1, z), r2 = enc->forward(b2, z);
    auto b3 = enc->condition_vector(torch::tensor({{1.0f, 0.0f, 0.0f, 0.0f}}), torch::tensor({5}, torch::kLong));
    auto r3 = enc->forward(b3, z);
    for (int s = 0; s < 3; ++s) {
      CHECK(l2(r1.sft[s].gamma, r2.sft[s].gamma) > 0.0);
      CHECK(l2(r1.sft[s].beta, r2.sft[s].beta) > 0.0);
      CHECK(l2(r1.sft[s].gamma, r3.sft[s].gamma) > 0.0);
    }
    CHECK_THROWS_AS(enc->forward(b1, torch::randn({1, 3, 16, 16})), DimensionError);
    CHECK_THROWS_AS(enc->forward(b1.slice(1, 0, 10), z), DimensionError);
  }

  TEST_CASE("only the conditioning path receives gradient") {
    torch::manual_seed(4);
    const auto cfg = testing::tiny_config();
    for (bool strict : {false, true}) {
      auto model = testing::tiny_model(cfg);
      model.encoder->randomize_heads(0.05);
      auto params = model.prepare_training(strict);
      HashTextEncoder text_encoder(cfg.text);
      auto provider = text_gate(Phase::Train, cfg.prompt_set(), text_encoder);
      std::mt19937_64 rng(1);
      DiffusionBatch batch;
      auto x = torch::rand({4, 3, 32, 32});
      batch.z0 = model.encode_latent(x);
      batch.z_lr = model.encode_latent(x.flip({3}));
      batch.eps = torch::randn_like(batch.z0);
      batch.t = torch::tensor({0, 10, 20, 49}, torch::kLong);
      batch.class_probs = torch::tensor({{1.0f, 0.0f}, {0.0f, 1.0f}, {1.0f, 0.0f}, {0.0f, 1.0f}});
      batch.text = provider->embed_batch({"Hermes", "Atlas", "Nord", "Vega"}, {"A", "B", "A", "B"}, rng);
      torch::optim::Adam opt(params, torch::optim::AdamOptions(1e-3));
      opt.zero_grad();
      training_loss(batch, model, cfg.noise_schedule()).backward();
      opt.step();
      CHECK(gradient_norm(*model.ae) == 0.0);
      CHECK(gradient_norm(*model.classifier) == 0.0);
      CHECK_FALSE(batch.text->requires_grad());
      CHECK(model.frozen_gradient_norm(strict) == 0.0);
      CHECK(gradient_norm(*model.encoder) > 0.0);
      if (strict) {
        CHECK(gradient_norm(*model.denoiser) == 0.0);
      } else {
        CHECK(gradient_norm(*model.denoiser) > 0.0);
      }
    }
  }

  TEST_CASE("training asserts the frozen contract every epoch") {
    torch::manual_seed(5);
    auto cfg = testing::tiny_config();
    cfg.training.epochs = 2;
    auto model = testing::tiny_model(cfg);
    const int n = 8;
    std::vector<Image> hr, ref;
    std::vector<int> labels;
    std::vector<std::string> names, cats;
    for (int i = 0; i < n; ++i) {
      hr.push_back(testing::random_image(32, 32, i));
      ref.push_back(testing::random_image(32, 32, 100 + i));
      labels.push_back(i % 2);
      names.push_back("Ship " + std::to_string(i));
      cats.push_back(i % 2 ? "B" : "A");
    }
    auto set = make_training_set(model, hr, ref, labels, 2, names, cats);
    HashTextEncoder text_encoder(cfg.text);
    auto provider = text_gate(Phase::Train, cfg.prompt_set(), text_encoder);
    std::vector<double> frozen;
    auto history = train_sr(model, set, cfg.noise_schedule(), cfg.training, 1, *provider,
                            [&](const SrEpochStats& s) { frozen.push_back(s.frozen_grad_norm); });
    CHECK(frozen == std::vector<double>{0.0, 0.0});
    CHECK(provider->prompts_rendered() == 2 * n);
    CHECK(text_encoder.calls() == 2 * n);
  }
}
