#pragma once

#include "srr/tape.hpp"
#include "srr/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace srr {

template <class T>
struct NamedTensor {
  std::string name;
  Tensor2<T> value;
};

// Builds a scalar (1 x 1) on the tape from parameter leaves given in the
// same order as the parameter list handed to grad_check.
using Objective = std::function<Var(Tape<double>&, std::span<const Var>)>;

struct BlockGradError {
  std::string name;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<BlockGradError> blocks;
  std::vector<Tensor2<double>> analytic;
  std::vector<Tensor2<double>> numeric;
};

// Below this magnitude a gradient entry is compared in absolute terms.
inline constexpr double kGradCheckFloor = 1e-6;

double relative_error(double analytic, double numeric);

// Tape gradients against central finite differences over every parameter
// entry, evaluated in 64-bit. eps must lie in [1e-6, 1e-3].
GradCheckReport grad_check(const Objective& f, std::span<const NamedTensor<double>> params, double eps);

}  // namespace srr
