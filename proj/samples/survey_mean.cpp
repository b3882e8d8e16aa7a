// Estimate a population share with 10% of the labels: active sampling
// against uniform sampling with and without predictions.

#include <iostream>

#include "actinf/actinf.hpp"

using namespace actinf;

int main() {
  SyntheticSpec spec;
  spec.n = 5000;
  spec.beta1 = 5.0;
  spec.gamma1 = 5.0;
  const auto data = gen_synthetic(spec, RngSpec{2024});
  const auto& pool = data.pool;
  const Budget budget(500, pool.size());
  const double alpha = 0.1;

  const auto u = pool_uncertainty(pool, std::nullopt);
  const auto active = batch_plan(u, budget, 0.5, RngSpec{2024, 1});
  const auto uniform = uniform_plan(budget, RngSpec{2024, 2});

  auto collect = [&](const SamplingPlan& plan) {
    Labels out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
      if (plan.xi[i]) out[i] = data.hidden[i];
    return out;
  };
  const auto ya = collect(active), yu = collect(uniform);
  const auto spec_mean = ProblemSpec::mean();

  write_report_header(std::cout);
  write_report_rows(std::cout, infer_active(pool, active, ya, spec_mean, alpha));
  write_report_rows(std::cout, infer_ppi(pool, uniform.xi, yu, spec_mean, budget, alpha));
  write_report_rows(std::cout, infer_classical(pool, uniform.xi, yu, spec_mean, alpha));
  std::cout << "# population share " << data.theta_star[0] << '\n';
}
