#include "revnet/gradcheck.hpp"

#include <cmath>

namespace revnet {

namespace {

double eval_loss(const std::function<Var(Tape&)>& build_loss, const ParamRef& ref, std::int64_t index) {
  Tape tape;
  Var loss;
  try {
    loss = build_loss(tape);
  } catch (const NumericError& e) {
    throw NumericError("finite_diff_check: non-finite loss while perturbing '" + ref.name + "' element " +
                       std::to_string(index) + ": " + e.what());
  }
  const double v = tape.value(loss).scalar_value();
  if (!std::isfinite(v)) {
    throw NumericError("finite_diff_check: non-finite loss while perturbing '" + ref.name + "' element " +
                       std::to_string(index));
  }
  return v;
}

}  // namespace

FiniteDiffReport finite_diff_check(const std::function<Var(Tape&)>& build_loss, const ParamRegistry& params,
                                   double eps) {
  if (eps <= 0.0) throw Error("finite_diff_check: eps must be positive");

  Tape tape;
  Var loss = build_loss(tape);
  tape.backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const ParamRef& ref : params) analytic.push_back(tape.grad_of(*ref.tensor));

  FiniteDiffReport report;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& t = *params[p].tensor;
    for (std::int64_t i = 0; i < t.numel(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double plus = eval_loss(build_loss, params[p], i);
      t[i] = saved - eps;
      const double minus = eval_loss(build_loss, params[p], i);
      t[i] = saved;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = params[p].name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace revnet
