#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "capcritic/diffcore.hpp"

namespace capcritic {

// Fixed random signed hashing of an m-dimensional input into D buckets.
struct CountSketchPlan {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> hash;  // values in [0, output_dim)
  std::vector<double> sign;         // +1 or -1

  static CountSketchPlan make(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim);
};

// out[hash[j]] += sign[j] * x[j]
std::vector<double> count_sketch(std::span<const double> x, const CountSketchPlan& plan);

enum class FusionStrategy { concat_linear, concat_mlp, cbp_linear };

std::string to_string(FusionStrategy strategy);
FusionStrategy parse_fusion_strategy(std::string_view text);

struct FusionConfig {
  FusionStrategy strategy = FusionStrategy::concat_mlp;
  std::size_t mlp_hidden = 512;
  std::size_t cbp_dim = 8192;  // power of two
  bool cbp_normalize = true;   // signed sqrt then L2 after pooling

  void validate() const;
};

struct FusionParams {
  FusionConfig config;
  std::size_t context_dim = 0;
  std::size_t candidate_dim = 0;
  std::optional<Parameter> mlp_weight;  // (context + candidate) x hidden
  std::optional<Parameter> mlp_bias;    // 1 x hidden
  std::optional<CountSketchPlan> context_plan;
  std::optional<CountSketchPlan> candidate_plan;

  std::size_t output_dim() const;
  void append_parameters(std::vector<Parameter*>& out);
};

// Sketch plans use two seeds derived from `seed`; MLP weights are
// uniform(-0.08, 0.08). Throws ConfigError for cbp with an empty context.
FusionParams make_fusion(const FusionConfig& config, std::size_t context_dim, std::size_t candidate_dim,
                         std::uint64_t seed);

struct BoundFusion {
  std::optional<Var> mlp_weight;
  std::optional<Var> mlp_bias;
};

BoundFusion bind_fusion(Tape& tape, FusionParams& params);

// context [B, context_dim], candidate [B, candidate_dim] -> fused [B, output_dim]
Var fuse(Tape& tape, const FusionParams& params, const BoundFusion& bound, Var context, Var candidate);

// Gradient-free single-example form.
std::vector<double> fuse(FusionParams& params, std::span<const double> context, std::span<const double> candidate);

}  // namespace capcritic
