#include "srr/grad_check.hpp"

#include "srr/error.hpp"

#include <algorithm>
#include <cmath>

namespace srr {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

double evaluate(const Objective& f, std::span<const NamedTensor<double>> params) {
  Tape<double> tape;
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.parameter(p.value));
  const Var out = f(tape, vars);
  return tape.value(out)(0, 0);
}

}  // namespace

GradCheckReport grad_check(const Objective& f, std::span<const NamedTensor<double>> params, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw Error(ErrorCode::DomainError, "grad_check eps must lie in [1e-6, 1e-3]");

  GradCheckReport report;
  {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& p : params) vars.push_back(tape.parameter(p.value));
    const Var out = f(tape, vars);
    tape.backward(out);
    for (Var v : vars) {
      const auto& g = tape.grad(v);
      report.analytic.push_back(g.size() == 0 ? Tensor2<double>::Zero(tape.value(v).rows(), tape.value(v).cols())
                                              : g);
    }
  }

  std::vector<NamedTensor<double>> work(params.begin(), params.end());
  for (std::size_t b = 0; b < work.size(); ++b) {
    Tensor2<double> numeric(work[b].value.rows(), work[b].value.cols());
    double block_max = 0.0;
    for (Eigen::Index i = 0; i < numeric.size(); ++i) {
      double& slot = work[b].value.data()[i];
      const double saved = slot;
      slot = saved + eps;
      const double up = evaluate(f, work);
      slot = saved - eps;
      const double down = evaluate(f, work);
      slot = saved;
      numeric.data()[i] = (up - down) / (2.0 * eps);
      block_max = std::max(block_max, relative_error(report.analytic[b].data()[i], numeric.data()[i]));
    }
    report.blocks.push_back({work[b].name, block_max});
    report.max_rel_error = std::max(report.max_rel_error, block_max);
    report.numeric.push_back(std::move(numeric));
  }
  return report;
}

}  // namespace srr
