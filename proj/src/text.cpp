#include "shipsr/text.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "shipsr/errors.hpp"

namespace shipsr {
namespace {

constexpr std::string_view kNameSlot = "{name}";
constexpr std::string_view kCategorySlot = "{category}";

std::string replace_all(std::string s, std::string_view slot, std::string_view value) {
  for (auto pos = s.find(slot); pos != std::string::npos; pos = s.find(slot, pos + value.size())) {
    s.replace(pos, slot.size(), value);
  }
  return s;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

PromptSet::PromptSet(std::vector<std::string> patterns) {
  if (patterns.size() != kPromptCount) {
    throw ArgumentError("exactly " + std::to_string(kPromptCount) + " prompt templates are required");
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const auto& p = patterns[i];
    if (p.find(kNameSlot) == std::string::npos || p.find(kCategorySlot) == std::string::npos) {
      throw ArgumentError("prompt template " + std::to_string(i) + " lacks a {name} or {category} slot");
    }
    if (!seen.insert(p).second) throw ArgumentError("prompt templates must be distinct");
    templates_.push_back({static_cast<int>(i), p});
  }
}

PromptSet PromptSet::defaults() {
  return PromptSet({
      "a photo of the {category} ship {name}",
      "{name}, a {category} vessel at sea",
      "high resolution picture of {name}, type {category}",
      "the {category} {name} photographed from the shore",
      "detailed image of a {category} named {name}",
  });
}

std::vector<std::string> PromptSet::patterns() const {
  std::vector<std::string> out;
  for (const auto& t : templates_) out.push_back(t.pattern);
  return out;
}

std::string PromptSet::render(int template_id, std::string_view name, std::string_view category) const {
  if (template_id < 0 || template_id >= kPromptCount) {
    throw ArgumentError("unknown prompt template id " + std::to_string(template_id));
  }
  if (name.empty() || category.empty()) throw ArgumentError("prompt name and category must be non-empty");
  // Substitute into placeholders first so values containing slot text stay literal.
  std::string out = templates_[static_cast<std::size_t>(template_id)].pattern;
  out = replace_all(out, kNameSlot, "\x01");
  out = replace_all(out, kCategorySlot, "\x02");
  std::string result;
  for (char c : out) {
    if (c == '\x01') {
      result += name;
    } else if (c == '\x02') {
      result += category;
    } else {
      result += c;
    }
  }
  return result;
}

std::string render_prompt(const PromptSet& prompts, int template_id, std::string_view name,
                          std::string_view category) {
  return prompts.render(template_id, name, category);
}

int pick_prompt(std::mt19937_64& rng) {
  // Multiply-shift reduction of a 64-bit draw; bias is below 2^-61.
  const unsigned __int128 wide = static_cast<unsigned __int128>(rng()) * kPromptCount;
  return static_cast<int>(wide >> 64);
}

HashTextEncoder::HashTextEncoder(const HashTextEncoderConfig& config) : config_(config) {
  if (config_.seq_len < 1 || config_.dim < 1 || config_.vocab < 1) {
    throw ArgumentError("text encoder dimensions must be positive");
  }
  auto gen = at::make_generator<at::CPUGeneratorImpl>(config_.seed);
  table_ = torch::randn({config_.vocab, config_.dim}, gen) / std::sqrt(static_cast<double>(config_.dim));
  auto pos = torch::arange(config_.seq_len, torch::kFloat64).unsqueeze(1);
  auto idx = torch::arange(config_.dim, torch::kFloat64).unsqueeze(0);
  auto angle = pos / torch::pow(10000.0, 2.0 * torch::floor(idx / 2.0) / config_.dim);
  auto even = (torch::remainder(idx, 2.0) == 0);
  positions_ = (torch::where(even, torch::sin(angle), torch::cos(angle)) * 0.1).to(torch::kFloat32);
}

torch::Tensor HashTextEncoder::encode(std::string_view prompt) {
  if (prompt.empty()) throw ArgumentError("prompt must be non-empty");
  ++calls_;
  std::string lowered(prompt);
  for (char& c : lowered) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::istringstream words(lowered);
  std::vector<std::int64_t> ids;
  for (std::string w; words >> w && static_cast<int>(ids.size()) < config_.seq_len;) {
    ids.push_back(static_cast<std::int64_t>(fnv1a(w) % static_cast<std::uint64_t>(config_.vocab)));
  }
  auto out = torch::zeros({config_.seq_len, config_.dim});
  if (!ids.empty()) {
    const auto n = static_cast<std::int64_t>(ids.size());
    auto rows = table_.index_select(0, torch::tensor(ids, torch::kLong));
    out.narrow(0, 0, n).copy_(rows + positions_.narrow(0, 0, n));
  }
  return out;
}

torch::Tensor encode_text(std::string_view prompt, TextEncoder& encoder) { return encoder.encode(prompt); }

torch::Tensor null_text_embedding(int seq_len, int dim) { return torch::zeros({seq_len, dim}); }

torch::Tensor PromptProvider::embed_batch(const std::vector<std::string>& names,
                                          const std::vector<std::string>& categories, std::mt19937_64& rng,
                                          std::vector<std::string>* rendered) {
  if (names.size() != categories.size()) throw ArgumentError("names and categories differ in length");
  std::vector<torch::Tensor> rows;
  rows.reserve(names.size());
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string prompt = prompts_.render(pick_prompt(rng), names[i], categories[i]);
    ++rendered_;
    if (rendered != nullptr) rendered->push_back(prompt);
    rows.push_back(encoder_->encode(prompt));
  }
  return torch::stack(rows);
}

std::optional<PromptProvider> text_gate(Phase phase, const PromptSet& prompts, TextEncoder& encoder) {
  if (phase == Phase::Infer) return std::nullopt;
  return PromptProvider(prompts, encoder);
}

}  // namespace shipsr
