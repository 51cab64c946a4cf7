#include "capcritic/fusion.hpp"

#include "capcritic/error.hpp"
#include "capcritic/fft.hpp"
#include "capcritic/rng.hpp"

namespace capcritic {

namespace {
constexpr double kSignedSqrtEps = 1e-4;
constexpr double kNormEps = 1e-12;
}  // namespace

CountSketchPlan CountSketchPlan::make(std::uint64_t seed, std::size_t input_dim, std::size_t output_dim) {
  if (output_dim == 0) throw ConfigError("count sketch output dimension must be positive");
  Rng rng(seed);
  CountSketchPlan plan;
  plan.input_dim = input_dim;
  plan.output_dim = output_dim;
  plan.seed = seed;
  plan.hash.resize(input_dim);
  plan.sign.resize(input_dim);
  for (std::size_t j = 0; j < input_dim; ++j) {
    plan.hash[j] = static_cast<std::uint32_t>(rng.index(output_dim));
    plan.sign[j] = (rng.next() & 1U) ? 1.0 : -1.0;
  }
  return plan;
}

std::vector<double> count_sketch(std::span<const double> x, const CountSketchPlan& plan) {
  if (x.size() != plan.input_dim) {
    throw ShapeError("count_sketch: input of length " + std::to_string(x.size()) + " for a plan over " +
                     std::to_string(plan.input_dim));
  }
  std::vector<double> out(plan.output_dim, 0.0);
  for (std::size_t j = 0; j < x.size(); ++j) out[plan.hash[j]] += plan.sign[j] * x[j];
  return out;
}

std::string to_string(FusionStrategy strategy) {
  switch (strategy) {
    case FusionStrategy::concat_linear: return "concat_linear";
    case FusionStrategy::concat_mlp: return "concat_mlp";
    case FusionStrategy::cbp_linear: return "cbp_linear";
  }
  return "?";
}

FusionStrategy parse_fusion_strategy(std::string_view text) {
  if (text == "concat_linear") return FusionStrategy::concat_linear;
  if (text == "concat_mlp") return FusionStrategy::concat_mlp;
  if (text == "cbp_linear") return FusionStrategy::cbp_linear;
  throw ConfigError("unknown fusion strategy '" + std::string(text) + "'");
}

void FusionConfig::validate() const {
  if (strategy == FusionStrategy::concat_mlp && mlp_hidden == 0) {
    throw ConfigError("concat_mlp needs a positive hidden size");
  }
  if (strategy == FusionStrategy::cbp_linear && !is_power_of_two(cbp_dim)) {
    throw ConfigError("cbp dimension " + std::to_string(cbp_dim) + " must be a power of two");
  }
}

std::size_t FusionParams::output_dim() const {
  switch (config.strategy) {
    case FusionStrategy::concat_linear: return context_dim + candidate_dim;
    case FusionStrategy::concat_mlp: return config.mlp_hidden;
    case FusionStrategy::cbp_linear: return config.cbp_dim;
  }
  return 0;
}

void FusionParams::append_parameters(std::vector<Parameter*>& out) {
  if (mlp_weight) out.push_back(&*mlp_weight);
  if (mlp_bias) out.push_back(&*mlp_bias);
}

FusionParams make_fusion(const FusionConfig& config, std::size_t context_dim, std::size_t candidate_dim,
                         std::uint64_t seed) {
  config.validate();
  FusionParams p;
  p.config = config;
  p.context_dim = context_dim;
  p.candidate_dim = candidate_dim;
  switch (config.strategy) {
    case FusionStrategy::concat_linear:
      break;
    case FusionStrategy::concat_mlp: {
      Rng rng(derive_seed(seed, 0x31f));
      Tensor w(context_dim + candidate_dim, config.mlp_hidden);
      for (auto& x : w.data) x = rng.uniform(-0.08, 0.08);
      p.mlp_weight = Parameter("fusion.mlp_weight", std::move(w));
      p.mlp_bias = Parameter("fusion.mlp_bias", Tensor(1, config.mlp_hidden));
      break;
    }
    case FusionStrategy::cbp_linear:
      if (context_dim == 0) throw ConfigError("compact bilinear pooling requires a non-empty context");
      p.context_plan = CountSketchPlan::make(derive_seed(seed, 0xc0), context_dim, config.cbp_dim);
      p.candidate_plan = CountSketchPlan::make(derive_seed(seed, 0xc1), candidate_dim, config.cbp_dim);
      break;
  }
  return p;
}

BoundFusion bind_fusion(Tape& tape, FusionParams& params) {
  BoundFusion b;
  if (params.mlp_weight) b.mlp_weight = tape.param(*params.mlp_weight);
  if (params.mlp_bias) b.mlp_bias = tape.param(*params.mlp_bias);
  return b;
}

Var fuse(Tape& tape, const FusionParams& params, const BoundFusion& bound, Var context, Var candidate) {
  const Tensor& cv = tape.value(context);
  const Tensor& kv = tape.value(candidate);
  if (cv.cols != params.context_dim || kv.cols != params.candidate_dim || cv.rows != kv.rows) {
    throw ShapeError("fuse: context " + cv.shape_string() + " and candidate " + kv.shape_string() +
                     " do not match the fusion layout");
  }
  switch (params.config.strategy) {
    case FusionStrategy::concat_linear: {
      if (params.context_dim == 0) return candidate;
      const Var parts[] = {context, candidate};
      return tape.concat(parts);
    }
    case FusionStrategy::concat_mlp: {
      Var joined = candidate;
      if (params.context_dim != 0) {
        const Var parts[] = {context, candidate};
        joined = tape.concat(parts);
      }
      return tape.relu(tape.add_row(tape.matmul(joined, *bound.mlp_weight), *bound.mlp_bias));
    }
    case FusionStrategy::cbp_linear: {
      if (params.context_dim == 0) throw ConfigError("compact bilinear pooling requires a non-empty context");
      const auto& cp = *params.context_plan;
      const auto& kp = *params.candidate_plan;
      Var sc = tape.scatter_signed(context, cp.hash, cp.sign, cp.output_dim);
      Var sk = tape.scatter_signed(candidate, kp.hash, kp.sign, kp.output_dim);
      Var pooled = tape.circular_convolve(sc, sk);
      if (!params.config.cbp_normalize) return pooled;
      return tape.l2_normalize_rows(tape.signed_sqrt(pooled, kSignedSqrtEps), kNormEps);
    }
  }
  throw ConfigError("unknown fusion strategy");
}

std::vector<double> fuse(FusionParams& params, std::span<const double> context, std::span<const double> candidate) {
  Tape tape;
  BoundFusion bound = bind_fusion(tape, params);
  Var c = tape.constant(Tensor::row(context));
  Var k = tape.constant(Tensor::row(candidate));
  return tape.value(fuse(tape, params, bound, c, k)).data;
}

}  // namespace capcritic
