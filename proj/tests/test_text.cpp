#include <doctest.h>

#include <set>

#include "shipsr/errors.hpp"
#include "shipsr/text.hpp"
#include "support.hpp"

using namespace shipsr;

TEST_SUITE("text_conditioning") {
  TEST_CASE("prompt rendering") {
    const auto prompts = PromptSet::defaults();
    CHECK(render_prompt(prompts, 0, "Hermes", "Tug") == "a photo of the Tug ship Hermes");
    CHECK_THROWS_AS(render_prompt(prompts, 0, "", "Tug"), ArgumentError);
    CHECK_THROWS_AS(render_prompt(prompts, 0, "Hermes", ""), ArgumentError);
    CHECK_THROWS_AS(render_prompt(prompts, 5, "Hermes", "Tug"), ArgumentError);
    CHECK_THROWS_AS(render_prompt(prompts, -1, "Hermes", "Tug"), ArgumentError);
    std::set<std::string> seen;
    for (int id = 0; id < kPromptCount; ++id) {
      const auto s = render_prompt(prompts, id, "Nordic Star", "Tankers");
      CHECK(s.find('{') == std::string::npos);
      CHECK(s.find('}') == std::string::npos);
      seen.insert(s);
    }
    CHECK(seen.size() == 5);
  }

  TEST_CASE("template set validation") {
    auto p = PromptSet::defaults().patterns();
    auto four = p;
    four.pop_back();
    CHECK_THROWS_AS(PromptSet{four}, ArgumentError);
    auto missing = p;
    missing[2] = "a ship called {name}";
    CHECK_THROWS_AS(PromptSet{missing}, ArgumentError);
    auto dup = p;
    dup[4] = dup[0];
    CHECK_THROWS_AS(PromptSet{dup}, ArgumentError);
  }

  TEST_CASE("rendering is injective over the shipped templates") {
    const auto prompts = PromptSet::defaults();
    const std::vector<std::string> names = {"Hermes", "Atlas", "Sea Star", "Star"};
    const std::vector<std::string> cats = {"Tugs", "Tankers", "Ro-ro"};
    std::set<std::string> seen;
    std::size_t n = 0;
    for (int id = 0; id < kPromptCount; ++id)
      for (const auto& name : names)
        for (const auto& cat : cats) {
          seen.insert(prompts.render(id, name, cat));
          ++n;
        }
    CHECK(seen.size() == n);
  }

  TEST_CASE("prompt picking is uniform and reproducible") {
    std::mt19937_64 a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(pick_prompt(a) == pick_prompt(b));
    std::mt19937_64 rng(7);
    std::vector<int> counts(5, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) {
      const int id = pick_prompt(rng);
      REQUIRE((id >= 0 && id < 5));
      ++counts[id];
    }
    for (int c : counts) CHECK(std::abs(static_cast<double>(c) / draws - 0.2) < 0.01);
  }

  TEST_CASE("hash text encoder") {
    HashTextEncoder enc;
    auto a = encode_text("a photo of the Tug ship Hermes", enc);
    CHECK(a.sizes() == torch::IntArrayRef({16, 64}));
    CHECK(torch::equal(a, encode_text("a photo of the Tug ship Hermes", enc)));
    CHECK(enc.calls() == 2);
    CHECK_THROWS_AS(encode_text("", enc), ArgumentError);
    const auto prompts = PromptSet::defaults();
    std::vector<torch::Tensor> embs;
    for (int id = 0; id < kPromptCount; ++id) embs.push_back(encode_text(prompts.render(id, "Hermes", "Tugs"), enc));
    for (int i = 0; i < 5; ++i)
      for (int j = i + 1; j < 5; ++j) CHECK_FALSE(torch::equal(embs[i], embs[j]));
    HashTextEncoder again;
    CHECK(torch::equal(a, encode_text("a photo of the Tug ship Hermes", again)));
    CHECK_FALSE(a.requires_grad());
  }

  TEST_CASE("training provider renders one prompt per sample") {
    HashTextEncoder enc;
    const auto prompts = PromptSet::defaults();
    auto provider = text_gate(Phase::Train, prompts, enc);
    REQUIRE(provider.has_value());
    std::mt19937_64 rng(1);
    std::vector<std::string> rendered;
    auto batch = provider->embed_batch({"Hermes", "Atlas", "Vega"}, {"Tugs", "Tankers", "Tugs"}, rng, &rendered);
    CHECK(batch.sizes() == torch::IntArrayRef({3, 16, 64}));
    CHECK(rendered.size() == 3);
    CHECK(provider->prompts_rendered() == 3);
    CHECK(enc.calls() == 3);
  }

  TEST_CASE("inference never touches the text encoder") {
    HashTextEncoder enc;
    const auto prompts = PromptSet::defaults();
    CHECK_FALSE(text_gate(Phase::Infer, prompts, enc).has_value());

    torch::manual_seed(2);
    const auto cfg = testing::tiny_config();
    auto model = testing::tiny_model(cfg);
    model.eval();
    SamplerOptions opts;
    opts.steps = 3;
    (void)sample(testing::random_image(8, 8, 1), model, cfg.noise_schedule(), opts);
    CHECK(enc.calls() == 0);

    CHECK(torch::equal(null_text_embedding(8, 16), null_text_embedding(8, 16)));
    CHECK(torch::equal(model.denoiser->null_text, null_text_embedding(8, 16)));
  }
}
