#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace shipsr {

inline constexpr int kPromptCount = 5;

struct PromptTemplate {
  int id = 0;
  std::string pattern;  // contains {name} and {category}
};

// Exactly five templates, each with both slots, pairwise distinct.
class PromptSet {
 public:
  explicit PromptSet(std::vector<std::string> patterns);
  static PromptSet defaults();

  const std::vector<PromptTemplate>& templates() const { return templates_; }
  std::vector<std::string> patterns() const;

  std::string render(int template_id, std::string_view name, std::string_view category) const;

 private:
  std::vector<PromptTemplate> templates_;
};

std::string render_prompt(const PromptSet& prompts, int template_id, std::string_view name,
                          std::string_view category);

// Uniform over [0, 5).
int pick_prompt(std::mt19937_64& rng);

// Frozen text encoder interface; production encoders plug in here.
class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual torch::Tensor encode(std::string_view prompt) = 0;  // [L, d]
  virtual int sequence_length() const = 0;
  virtual int dim() const = 0;
};

struct HashTextEncoderConfig {
  int seq_len = 16;
  int dim = 64;
  int vocab = 4096;
  std::uint64_t seed = 0x5eed5eedULL;
};

// Lower-cased whitespace tokens are hashed into a fixed random table; a
// sinusoidal position code is added and unused positions stay zero.
class HashTextEncoder final : public TextEncoder {
 public:
  explicit HashTextEncoder(const HashTextEncoderConfig& config = {});

  torch::Tensor encode(std::string_view prompt) override;
  int sequence_length() const override { return config_.seq_len; }
  int dim() const override { return config_.dim; }

  std::int64_t calls() const { return calls_; }

 private:
  HashTextEncoderConfig config_;
  torch::Tensor table_;
  torch::Tensor positions_;
  std::int64_t calls_ = 0;
};

torch::Tensor encode_text(std::string_view prompt, TextEncoder& encoder);

torch::Tensor null_text_embedding(int seq_len, int dim);

enum class Phase { Train, Infer };

// Renders one prompt per sample and embeds it. Exists only in training.
class PromptProvider {
 public:
  PromptProvider(const PromptSet& prompts, TextEncoder& encoder) : prompts_(prompts), encoder_(&encoder) {}

  // [B, L, d] for the given (name, category) pairs; rendered prompts are
  // appended to `rendered` when non-null.
  torch::Tensor embed_batch(const std::vector<std::string>& names, const std::vector<std::string>& categories,
                            std::mt19937_64& rng, std::vector<std::string>* rendered = nullptr);

  std::int64_t prompts_rendered() const { return rendered_; }

 private:
  PromptSet prompts_;
  TextEncoder* encoder_;
  std::int64_t rendered_ = 0;
};

std::optional<PromptProvider> text_gate(Phase phase, const PromptSet& prompts, TextEncoder& encoder);

}  // namespace shipsr
