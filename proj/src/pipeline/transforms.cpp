#include "moece/pipeline/transforms.hpp"

#include <cmath>
#include <string>

#include "moece/error.hpp"
#include "moece/numerics/fft.hpp"

namespace moece::pipeline {

Preprocessed preprocess(const ComplexGrid& h_ls) {
  Preprocessed p;
  p.x = channel::to_real_tensor(numerics::fft_freq_axis(h_ls));
  p.context = {h_ls.n_ant(), h_ls.n_pf()};
  return p;
}

Preprocessed preprocess(const channel::ChannelSample& sample) { return preprocess(sample.h_ls); }

ComplexGrid postprocess(const Tensor& y, const TransformContext& context) {
  if (y.rank() != 3 || y.extent(0) != context.n_ant || y.extent(1) != context.n_pf || y.extent(2) != 2)
    throw ShapeError("postprocess: output " + numerics::shape_to_string(y.shape()) + " does not match [" +
                     std::to_string(context.n_ant) + "," + std::to_string(context.n_pf) + ",2]");
  return numerics::ifft_freq_axis(channel::from_real_tensor(y));
}

numerics::Var to_frequency(numerics::Tape& tape, numerics::Var y) { return tape.ifft_freq_axis(y); }

double nmse(const ComplexGrid& h, const ComplexGrid& h_hat) {
  if (h.n_ant() != h_hat.n_ant() || h.n_pf() != h_hat.n_pf()) throw ShapeError("nmse: grid shapes differ");
  const double ref = h.squared_norm();
  if (!(ref > 0.0)) throw DomainError("nmse: reference channel has zero norm");
  double err = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) err += std::norm(h.entries()[i] - h_hat.entries()[i]);
  return err / ref;
}

double nmse_db(double nmse_linear) { return 10.0 * std::log10(nmse_linear); }

}  // namespace moece::pipeline
