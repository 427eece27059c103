#pragma once

#include <cstddef>
#include <span>

#include "moece/channel/generator.hpp"
#include "moece/numerics/complex_grid.hpp"
#include "moece/numerics/tape.hpp"
#include "moece/numerics/tensor.hpp"

namespace moece::pipeline {

using numerics::ComplexGrid;
using numerics::Tensor;

struct TransformContext {
  std::size_t n_ant = 0;
  std::size_t n_pf = 0;
};

struct Preprocessed {
  Tensor x;  // delay-domain [n_ant, n_pf, 2]
  TransformContext context;
};

// Unnormalized DFT of the LS estimate along the subcarrier axis, split into
// real/imaginary channels.
Preprocessed preprocess(const channel::ChannelSample& sample);
Preprocessed preprocess(const ComplexGrid& h_ls);

// Inverse of preprocess for a model output.
ComplexGrid postprocess(const Tensor& y, const TransformContext& context);
// The same inverse on a tape.
numerics::Var to_frequency(numerics::Tape& tape, numerics::Var y);

// ||h - h_hat||^2 / ||h||^2 over complex entries.
double nmse(const ComplexGrid& h, const ComplexGrid& h_hat);
double nmse_db(double nmse_linear);

}  // namespace moece::pipeline
