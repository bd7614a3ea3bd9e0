// Optimal sketch sizes: closed form for isotropic features, theory grid for
// a two-level spectrum.

#include <iostream>

#include <sketchreg/sketchreg.hpp>

using namespace sketchreg;

int main() {
  const Eigen::Index n = 400;
  for (const double phi : {0.5, 1.15, 2.0}) {
    const OptimalSize c = optimal_m_closed(6.0, 2.0, phi, n);
    std::cout << "isotropic phi=" << phi << ": m*=" << c.m_star << " (" << to_string(c.case_label)
              << "), risk " << c.attained_risk << '\n';
  }
  const SpectralMeasure H = make_discrete({{2.0, 0.5}, {1.0, 0.5}});
  for (const Eigen::Index p : {200, 424}) {
    const double phi = static_cast<double>(p) / static_cast<double>(n);
    const OptimalSize g = optimal_m_grid(H, SketchFamily::Orthogonal, 6.0, 3.0, phi, n, 0.05);
    std::cout << "two-level p=" << p << ": m*=" << g.m_star << ", risk " << g.attained_risk
              << " (full sample " << theory_risk(H, SketchFamily::Orthogonal, phi, 1.0, 6.0, 3.0).risk << ")\n";
  }
}
