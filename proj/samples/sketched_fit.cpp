// Fit the sketched estimator on one synthetic dataset and compare the exact
// risk with its limit.

#include <iostream>

#include <sketchreg/sketchreg.hpp>

using namespace sketchreg;

int main() {
  ModelConfig cfg;
  cfg.n = 400;
  cfg.p = 200;
  cfg.beta = RandomIsotropicBeta{5.0};
  cfg.noise_sd = 5.0;
  cfg.seed = 7;
  const Dataset data = sample_dataset(cfg);

  for (const Eigen::Index m : {100, 240, 320, 400}) {
    const SketchOperator S = m == cfg.n ? make_identity(cfg.n) : make_haar(m, cfg.n, 11);
    const SketchedDesign design(S, data.X);
    const Eigen::VectorXd bh = design.fit(data.Y);
    const RiskReport exact =
        exact_risk_report(design, data.sigma, cfg.noise_sd, RiskKind::ConditionalOnBeta, 5.0, &data.beta);
    const double psi = static_cast<double>(m) / static_cast<double>(cfg.n);
    const AsymptoticRisk lim = isotropic_limit(SketchFamily::Orthogonal, cfg.aspect_ratio(), psi, 5.0, 5.0);
    std::cout << "m=" << m << "  ||b_hat - b||_Sigma^2=" << oracle_risk(bh, data.beta, data.sigma)
              << "  exact=" << exact.risk << " (bias " << exact.bias << ", var " << exact.variance << ")"
              << "  limit=" << lim.risk << '\n';
  }
}
