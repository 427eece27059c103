#pragma once

#include <cstddef>
#include <map>
#include <random>
#include <string>

#include "moece/numerics/tape.hpp"
#include "moece/numerics/tensor.hpp"

namespace moece::models {

using numerics::Tensor;
using numerics::Tape;
using numerics::Var;

// Named parameter tensors, e.g. "block.1.conv.0.kernel". std::map keeps the
// tensors at stable addresses, which Tape::parameter relies on.
using ModelParams = std::map<std::string, Tensor>;

std::size_t count_parameters(const ModelParams& params);
void clear_grads(ModelParams& params);

// Adds "<prefix>.kernel" [3,3,cin,cout] drawn from N(0, 2/(9*cin)) and a zero
// "<prefix>.bias" [cout].
void add_conv(ModelParams& params, const std::string& prefix, std::size_t cin, std::size_t cout,
              std::mt19937_64& rng);

Var conv(Tape& tape, ModelParams& params, const std::string& prefix, Var x, std::size_t stride = 1);

// Rounds every parameter to the nearest float.
void quantize_to_float(ModelParams& params);

}  // namespace moece::models
